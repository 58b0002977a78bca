"""
Unit tests for slice selectors, the segmenter and volume evaluation.
"""

from dataclasses import replace

import numpy as np
import pytest
import torch

from dhvae.core.errors import ConfigError, RangeError, ShapeError
from dhvae.data import (
    MaskVolume3D,
    SliceDataset,
    SlicePair,
    Volume3D,
    extract_tumor_slices,
    make_blob_corpus,
    minmax_normalize,
)
from dhvae.segmentation.selectors import (
    ClassifierSelector,
    FullSelector,
    OracleSelector,
    SliceRange,
    make_selector,
)
from dhvae.segmentation.trainer import (
    HISTORY_COLUMNS,
    predict_slice,
    predict_slices,
    soft_dice_loss,
    train_segmenter,
)
from dhvae.segmentation.unet import SegConfig
from dhvae.segmentation.volume import (
    evaluate_dsc,
    segment_volume,
    subject_dsc_scores,
)

TINY = SegConfig(depth=2, base_filters=4, max_filters=8, epochs=2,
                 batch_size=4, lr=1e-2)


def _subject(first=2, last=4, depth=8, subject_id='s'):
    """Volume whose intensities equal its tumor mask."""
    labels = np.zeros((8, 8, depth), dtype=np.uint8)
    labels[2:6, 2:6, first:last + 1] = 1
    return (Volume3D(labels.astype(np.float64), subject_id=subject_id),
            MaskVolume3D(labels, subject_id=subject_id))


def _threshold(image):
    return image > 0.5


def _pairs(n=8, shape=(16, 16)):
    rng = np.random.default_rng(0)
    pairs = []
    for i in range(n):
        mask = np.zeros(shape, dtype=np.uint8)
        r, c = rng.integers(2, 10, size=2)
        mask[r:r + 5, c:c + 5] = 1
        image = np.clip(0.2 + 0.6 * mask + 0.05 * rng.random(shape), 0, 1)
        pairs.append(SlicePair(image, mask, f"s{i % 2}", i))
    return pairs


def test_slice_range_selector():
    """Test explicit ranges and their bounds."""
    volume, _ = _subject()
    assert SliceRange(1, 5).select(volume) == range(1, 5)
    with pytest.raises(RangeError):
        SliceRange(3, 9).select(volume)
    with pytest.raises(RangeError):
        SliceRange(4, 2).select(volume)


def test_full_and_oracle_selectors():
    """Test the automatic and the ground-truth policies."""
    volume, gt = _subject(first=2, last=4)
    assert FullSelector().select(volume) == range(8)
    assert OracleSelector().select(volume, gt) == range(2, 5)
    empty = MaskVolume3D(np.zeros((8, 8, 8), dtype=np.uint8))
    assert OracleSelector().select(volume, empty) == range(0)
    with pytest.raises(ConfigError):
        OracleSelector().select(volume)


def test_classifier_selector():
    """Test the selection spans the first to the last accepted slice."""
    volume, _ = _subject(first=3, last=5)
    selector = ClassifierSelector(lambda s: bool(s.max() > 0.5))
    assert selector.select(volume) == range(3, 6)
    assert ClassifierSelector(lambda s: False).select(volume) == range(0)


def test_make_selector():
    """Test name resolution and pass-through."""
    assert isinstance(make_selector('oracle'), OracleSelector)
    assert make_selector('range', start=0, stop=2).stop == 2
    selector = FullSelector()
    assert make_selector(selector) is selector
    with pytest.raises(ConfigError, match="Available"):
        make_selector('no-such-policy')
    with pytest.raises(ConfigError, match="start"):
        make_selector('range')
    with pytest.raises(ConfigError, match="width"):
        make_selector('full', width=3)


def test_segment_volume_respects_selection():
    """Test slices outside the selection stay background."""
    volume, gt = _subject(first=2, last=5)
    labels = segment_volume(_threshold, volume, (0, 3)).values
    assert labels[..., :3].sum() == 16
    assert labels[..., 3:].sum() == 0
    oracle = segment_volume(_threshold, volume, 'oracle', gt)
    np.testing.assert_array_equal(oracle.values, gt.values)
    assert oracle.subject_id == 's'


def test_evaluate_dsc():
    """Test per-subject volume Dice and its summary."""
    test = [_subject(subject_id='a'), _subject(2, 3, subject_id='b')]
    assert evaluate_dsc(_threshold, test, 'full') == (1.0, 0.0)

    def half(image):
        out = image > 0.5
        out[:4] = False
        return out

    scores = subject_dsc_scores(half, test, 'oracle')
    assert scores == pytest.approx([2 * 8 / (16 + 8)] * 2)
    with pytest.raises(ConfigError):
        evaluate_dsc(_threshold, [])


def test_soft_dice_loss():
    """Test the loss is small for confident correct logits."""
    target = torch.zeros(1, 1, 4, 4)
    target[..., :2, :2] = 1.0
    good = soft_dice_loss(20.0 * (2.0 * target - 1.0), target)
    bad = soft_dice_loss(-20.0 * (2.0 * target - 1.0), target)
    assert good.item() < 0.01
    assert bad.item() > 0.9


def test_seg_config_validation():
    """Test schedule and shape checks."""
    with pytest.raises(ConfigError):
        SegConfig(epochs=0)
    with pytest.raises(ConfigError):
        SegConfig(lr=0.0)
    with pytest.raises(ConfigError, match="divisible"):
        TINY.check_shape((10, 10))


def test_train_segmenter_smoke():
    """Test a short run returns a history and a usable model."""
    ds = SliceDataset.from_pairs(_pairs())
    model, history = train_segmenter(ds, TINY, progress=False)
    assert list(history.columns) == HISTORY_COLUMNS
    assert history['epoch'].tolist() == [0, 1]
    assert np.isfinite(history['loss']).all()
    assert not model.training

    masks = predict_slices(model, ds.images())
    assert masks.shape == (8, 16, 16) and masks.dtype == np.uint8
    assert set(np.unique(masks)) <= {0, 1}
    assert predict_slice(model, ds.images()[0], (16, 16)).shape == (16, 16)
    with pytest.raises(ShapeError):
        predict_slice(model, ds.images(), (16, 16))


def test_train_segmenter_memorizes_one_pair():
    """Test repeated copies of one pair are learned almost exactly."""
    pair = _pairs(1)[0]
    ds = SliceDataset.from_pairs([pair] * 8)
    cfg = replace(TINY, epochs=150, batch_size=8)
    model, history = train_segmenter(ds, cfg, progress=False)
    assert len(history) == 150
    assert history['train_dsc'].iloc[-1] >= 0.95


def test_segmenter_loss_mostly_decreases_on_blobs():
    """Test the epoch loss rarely goes up on the blob corpus."""
    pairs = []
    for volume, mask in make_blob_corpus(4, (16, 16, 8), seed=0):
        pairs.extend(extract_tumor_slices(minmax_normalize(volume), mask, 4))
    ds = SliceDataset.from_pairs(pairs)
    cfg = replace(TINY, epochs=20, batch_size=len(ds), lr=1e-3)
    _, history = train_segmenter(ds, cfg, progress=False)
    losses = history['loss'].to_numpy()
    non_increasing = np.mean(losses[1:] <= losses[:-1])
    assert non_increasing >= 0.8


def test_train_segmenter_is_reproducible():
    """Test one seed gives one trained model."""
    ds = SliceDataset.from_pairs(_pairs())
    a, _ = train_segmenter(ds, TINY, progress=False)
    b, _ = train_segmenter(ds, TINY, progress=False)
    for p, q in zip(a.parameters(), b.parameters()):
        assert torch.equal(p, q)


def test_train_segmenter_rejects_bad_shape():
    """Test slice shapes must fit the segmenter depth."""
    ds = SliceDataset.from_pairs(_pairs(2, shape=(10, 10)))
    with pytest.raises(ConfigError):
        train_segmenter(ds, TINY, progress=False)
