"""
Unit tests for volumes, slice extraction, datasets and augmentation.
"""

import numpy as np
import pytest

from dhvae.core.errors import (
    ConfigError,
    DomainError,
    FormatError,
    IngestionError,
    PairingError,
    ShapeError,
)
from dhvae.data import (
    MaskVolume3D,
    Modality,
    Provenance,
    SliceDataset,
    SlicePair,
    SplitTag,
    Volume3D,
    classic_augment,
    dataset_roundtrip,
    extract_tumor_slices,
    load_corpus,
    load_dataset,
    load_volume,
    make_blob_corpus,
    mask_path_for,
    minmax_normalize,
    save_dataset,
    save_volume,
)


def _pair(subject='s', index=0, value=0.5, shape=(4, 4)):
    mask = np.zeros(shape, dtype=np.uint8)
    mask[1:3, 1:3] = 1
    return SlicePair(np.full(shape, value), mask, subject, index)


def test_volume_validation():
    """Test volumes reject bad shapes, voxels and labels."""
    with pytest.raises(ShapeError):
        Volume3D(np.zeros((4, 4)))
    values = np.zeros((2, 2, 2))
    values[0, 0, 0] = np.nan
    with pytest.raises(IngestionError, match="1 non-finite"):
        Volume3D(values)
    with pytest.raises(IngestionError):
        Volume3D(np.zeros((2, 2, 2)), spacing=(1.0, 0.0, 1.0))
    with pytest.raises(DomainError):
        MaskVolume3D(np.full((2, 2, 2), 2))


def test_volume_is_read_only():
    """Test stored arrays cannot be modified."""
    volume = Volume3D(np.zeros((2, 2, 2)))
    with pytest.raises(ValueError):
        volume.values[0, 0, 0] = 1.0


def test_minmax_normalize():
    """Test affine mapping onto [0, 1] and the constant case."""
    volume = Volume3D(np.array([0.0, 100.0, 200.0]).reshape(1, 1, 3))
    assert minmax_normalize(volume).values.ravel().tolist() == [
        0.0, 0.5, 1.0
    ]
    constant = Volume3D(np.full((2, 2, 2), 7.0))
    assert np.all(minmax_normalize(constant).values == 0.0)


def test_minmax_normalize_is_idempotent():
    """Test normalizing twice changes nothing."""
    rng = np.random.default_rng(5)
    volume = Volume3D(rng.normal(40.0, 15.0, size=(6, 6, 4)))
    once = minmax_normalize(volume)
    twice = minmax_normalize(once)
    np.testing.assert_array_equal(once.values, twice.values)


def test_extract_tumor_slices_threshold():
    """Test only slices with enough foreground are kept, in order."""
    values = np.full((4, 4, 3), 0.5)
    labels = np.zeros((4, 4, 3), dtype=np.uint8)
    labels[:3, :3, 0] = 1  # 9 pixels
    labels[:2, :5, 2] = 1  # 8 pixels
    volume = Volume3D(values, subject_id='sub')
    mask = MaskVolume3D(labels, subject_id='sub')

    kept = extract_tumor_slices(volume, mask, min_fg_pixels=8)
    assert [p.slice_index for p in kept] == [0, 2]
    assert all(p.provenance is Provenance.REAL for p in kept)
    assert [p.slice_index for p in
            extract_tumor_slices(volume, mask, min_fg_pixels=9)] == [0]


@pytest.mark.parametrize('seed', [0, 1, 2])
def test_extract_tumor_slices_is_monotone(seed):
    """Test raising the threshold only ever drops slices."""
    volume, mask = make_blob_corpus(1, (16, 16, 8), seed=seed)[0]
    volume = minmax_normalize(volume)
    previous = None
    for threshold in (1, 2, 4, 8, 16, 32, 64, 128):
        kept = {p.slice_index
                for p in extract_tumor_slices(volume, mask, threshold)}
        if previous is not None:
            assert kept <= previous
        previous = kept


def test_extract_tumor_slices_errors():
    """Test pairing and threshold validation."""
    volume = Volume3D(np.zeros((4, 4, 2)))
    with pytest.raises(PairingError):
        extract_tumor_slices(volume, MaskVolume3D(np.zeros((4, 4, 3))))
    with pytest.raises(ConfigError):
        extract_tumor_slices(volume, MaskVolume3D(np.zeros((4, 4, 2))), 0)


def test_slice_pair_validation():
    """Test pairs reject out-of-range images and non-binary masks."""
    with pytest.raises(DomainError):
        SlicePair(np.full((2, 2), 1.5), np.zeros((2, 2)), 's', 0)
    with pytest.raises(DomainError):
        SlicePair(np.zeros((2, 2)), np.full((2, 2), 3), 's', 0)
    with pytest.raises(ShapeError):
        SlicePair(np.zeros((2, 2)), np.zeros((2, 3)), 's', 0)


def test_dataset_rejects_mixed_shapes():
    """Test all pairs of a dataset share one shape."""
    with pytest.raises(ShapeError):
        SliceDataset.from_pairs([_pair(), _pair(shape=(6, 6))])
    with pytest.raises(ConfigError):
        SliceDataset.from_pairs([])


def test_dataset_archive_roundtrip(tmp_path):
    """Test save/load keeps pairs, shape and split tag."""
    pairs = [_pair('a', 0, 0.25),
             SlicePair(np.zeros((4, 4)), np.ones((4, 4)), 'b', 3,
                       Provenance.SYNTHETIC)]
    dataset = SliceDataset.from_pairs(pairs, SplitTag.TEST)
    loaded = dataset_roundtrip(dataset, tmp_path / 'slices.npz')
    assert loaded == dataset
    assert loaded.split_tag is SplitTag.TEST
    assert loaded.subjects() == ['a', 'b']


def test_load_dataset_corrupt_archive(tmp_path):
    """Test a truncated archive raises a format error with an offset."""
    path = save_dataset(SliceDataset.from_pairs([_pair()]),
                        tmp_path / 'slices.npz')
    blob = path.read_bytes()
    path.write_bytes(blob[:len(blob) // 2])
    with pytest.raises(FormatError) as info:
        load_dataset(path)
    assert info.value.offset >= 0


@pytest.mark.parametrize('suffix', ['.nii.gz', '.rawvol'])
def test_volume_file_roundtrip(tmp_path, suffix):
    """Test writing and reading both containers with their masks."""
    rng = np.random.default_rng(0)
    volume = Volume3D(rng.random((6, 5, 4)), (1.0, 2.0, 3.0),
                      Modality.SYNTHETIC, 'sub01')
    labels = (rng.random((6, 5, 4)) > 0.5).astype(np.uint8)
    path = save_volume(volume, tmp_path / f"sub01{suffix}")
    save_volume(MaskVolume3D(labels, volume.spacing), mask_path_for(path))

    loaded, mask = load_volume(path)
    assert loaded.subject_id == 'sub01'
    assert loaded.spacing == pytest.approx((1.0, 2.0, 3.0))
    np.testing.assert_allclose(loaded.values, volume.values, atol=1e-6)
    np.testing.assert_array_equal(mask.values, labels)


def test_raw_container_truncated_payload(tmp_path):
    """Test a short raw payload reports the offset of the gap."""
    path = save_volume(Volume3D(np.zeros((2, 2, 2))),
                       tmp_path / 'v.rawvol')
    blob = path.read_bytes()
    path.write_bytes(blob[:-4])
    with pytest.raises(FormatError) as info:
        load_volume(path)
    assert info.value.offset == len(blob) - 4


def test_load_volume_missing_file(tmp_path):
    """Test a missing file is an ingestion error."""
    with pytest.raises(IngestionError):
        load_volume(tmp_path / 'absent.nii.gz')


def test_load_corpus_requires_masks(tmp_path):
    """Test an image without mask file fails pairing."""
    save_volume(Volume3D(np.zeros((2, 2, 2))), tmp_path / 'a.rawvol')
    with pytest.raises(PairingError):
        load_corpus(tmp_path)


def test_blob_corpus_is_deterministic():
    """Test blob subjects repeat per seed and share prefixes."""
    small = make_blob_corpus(2, (16, 16, 8), seed=3)
    large = make_blob_corpus(3, (16, 16, 8), seed=3)
    assert [v.subject_id for v, _ in small] == ['blob-3-000', 'blob-3-001']
    for (v1, m1), (v2, m2) in zip(small, large):
        np.testing.assert_array_equal(v1.values, v2.values)
        np.testing.assert_array_equal(m1.values, m2.values)
    assert all(m.foreground_voxels > 0 for _, m in small)
    with pytest.raises(ConfigError):
        make_blob_corpus(1, (4, 16, 8))


@pytest.mark.parametrize('shape', [(16, 16, 8), (32, 32, 8)])
def test_blob_foreground_fraction(shape):
    """Test every blob mask covers between 0.5% and 20% of its volume."""
    for seed in range(100):
        _, mask = make_blob_corpus(1, shape, seed=seed)[0]
        fraction = mask.foreground_voxels / mask.values.size
        assert 0.005 <= fraction <= 0.2, (seed, fraction)


def test_classic_augment():
    """Test augmentation size, order and determinism."""
    pairs = [_pair('s', i, 0.1 * (i + 1)) for i in range(3)]
    out = classic_augment(pairs, 3, seed=1)
    assert len(out) == 9
    assert out[:3] == pairs
    assert out == classic_augment(pairs, 3, seed=1)
    assert all(p.subject_id == 's' for p in out)
    # every copy keeps the foreground pixel count or shifts some out
    assert all(p.mask.sum() <= 4 for p in out)
    assert classic_augment(pairs, 1) == pairs
    with pytest.raises(ConfigError):
        classic_augment(pairs, 0)
