"""
Tests for the command-line entry point.
"""

import json

from dhvae.cli import CONFIG_NAME, SLICES_NAME, build_parser, main
from dhvae.data import load_dataset


def test_parser_requires_a_command():
    """Test the subcommand is mandatory."""
    parser = build_parser()
    args = parser.parse_args(['--set', 'train.seed=2', 'make-blobs'])
    assert args.overrides == ['train.seed=2']
    assert args.command == 'make-blobs'


def test_make_blobs_then_prepare(tmp_path):
    """Test writing the blob corpus and slicing it."""
    blobs = tmp_path / 'blobs'
    data = tmp_path / 'data'
    small = ['--set', 'data.blob_subjects=2',
             '--set', 'data.blob_shape=[16, 16, 8]',
             '--set', 'data.min_fg_pixels=4']

    assert main(['--out', str(blobs), *small, 'make-blobs']) == 0
    assert len(list(blobs.glob('*_mask.nii.gz'))) == 2
    saved = json.loads((blobs / CONFIG_NAME).read_text())
    assert saved['data']['blob_subjects'] == 2

    assert main(['--out', str(data), *small, 'prepare', str(blobs)]) == 0
    dataset = load_dataset(data / SLICES_NAME)
    assert len(dataset) > 0
    assert dataset.slice_shape == (16, 16)
    assert len(set(dataset.subjects())) <= 2


def test_invalid_override_exits_with_error(tmp_path):
    """Test configuration errors give exit status 1."""
    assert main(['--out', str(tmp_path), '--set', 'train.nope=1',
                 'make-blobs']) == 1
    assert main(['--out', str(tmp_path), '--set', 'train.iterations=0',
                 'make-blobs']) == 1
    assert not (tmp_path / CONFIG_NAME).exists()
