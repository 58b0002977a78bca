"""
Unit tests for image and mask quality metrics and metric reports.
"""

import math

import numpy as np
import pytest

from dhvae.core.errors import (
    FormatError,
    InsufficientSamplesError,
    ShapeError,
)
from dhvae.metrics.image import (
    EmbeddingStats,
    embed_images,
    fid,
    gaussian_stats,
    lpips,
    psnr,
)
from dhvae.metrics.masks import (
    PixelClassDistribution,
    divergence,
    dsc,
    pixel_class_distribution,
)
from dhvae.metrics.report import MetricsReport
from dhvae.networks.features import RANDOM_KIND, build_extractor


def test_psnr_known_value():
    """Test MSE 0.01 gives 20 dB and identical images give inf."""
    a = np.zeros((4, 4))
    assert psnr(a, np.full((4, 4), 0.1)) == pytest.approx(20.0, abs=1e-9)
    assert psnr(a, a) == math.inf
    assert psnr(a, np.full((4, 4), 25.5), max_val=255.0) == pytest.approx(
        20.0, abs=1e-9
    )
    with pytest.raises(ShapeError):
        psnr(a, np.zeros((2, 2)))


@pytest.mark.parametrize('max_val', [1.0, 255.0])
def test_psnr_decreases_with_error(max_val):
    """Test larger mean squared errors give strictly lower PSNR."""
    rng = np.random.default_rng(0)
    reference = rng.random((8, 8)) * max_val
    noise = rng.standard_normal((8, 8))
    scores = [psnr(reference, reference + scale * max_val * noise,
                   max_val=max_val)
              for scale in (1e-4, 1e-3, 0.01, 0.05, 0.1, 0.5)]
    assert all(a > b for a, b in zip(scores, scores[1:]))


def test_fid_univariate_closed_form():
    """Test the distance of two 1D Gaussians."""
    r = EmbeddingStats(np.array([1.0]), np.array([[4.0]]))
    f = EmbeddingStats(np.array([-0.5]), np.array([[0.25]]))
    expected = 1.5 ** 2 + (2.0 - 0.5) ** 2
    assert abs(fid(r, f) - expected) <= 1e-8


def test_fid_of_identical_sets():
    """Test the distance of a set to itself vanishes."""
    rng = np.random.default_rng(0)
    stats = gaussian_stats(rng.standard_normal((200, 6)))
    assert fid(stats, stats) <= 1e-6
    other = gaussian_stats(rng.standard_normal((200, 6)) + 1.0)
    assert fid(stats, other) > 1.0


def test_gaussian_stats_errors():
    """Test sample count and dimension checks."""
    with pytest.raises(InsufficientSamplesError):
        gaussian_stats(np.zeros((1, 3)))
    with pytest.raises(ShapeError):
        fid(gaussian_stats(np.eye(3)), gaussian_stats(np.eye(2)))
    with pytest.raises(ShapeError):
        EmbeddingStats(np.zeros(2), np.eye(3))


def test_lpips_and_embeddings():
    """Test the perceptual distance and the embedding matrix."""
    fx = build_extractor(RANDOM_KIND, seed=0)
    rng = np.random.default_rng(1)
    a = rng.random((3, 16, 16)).astype(np.float32)
    b = rng.random((3, 16, 16)).astype(np.float32)
    assert lpips(a, a, fx) == pytest.approx(0.0, abs=1e-9)
    assert lpips(a, b, fx) > 0.0
    with pytest.raises(ShapeError):
        lpips(a, b[:2], fx)

    embeddings = embed_images(fx, a, batch_size=2)
    assert embeddings.shape[0] == 3
    assert embeddings.dtype == np.float64


def test_pixel_class_distribution():
    """Test per-pixel foreground frequencies."""
    masks = [np.array([[1, 0], [0, 0]]), np.array([[1, 1], [0, 0]])]
    dist = pixel_class_distribution(masks)
    np.testing.assert_array_equal(dist.prob, [[1.0, 0.5], [0.0, 0.0]])
    assert dist.n_masks == 2
    with pytest.raises(InsufficientSamplesError):
        pixel_class_distribution([])
    with pytest.raises(ShapeError):
        pixel_class_distribution([np.zeros((2, 2)), np.zeros((3, 3))])


def test_divergence_limits():
    """Test zero for equal and ln 2 for disjoint distributions."""
    p = PixelClassDistribution(np.ones((4, 4)), 1)
    q = PixelClassDistribution(np.zeros((4, 4)), 1)
    assert divergence(p, p) == pytest.approx(0.0, abs=1e-12)
    assert divergence(p, q, 'JSD') == pytest.approx(math.log(2), abs=1e-4)
    assert divergence(p, q, 'KLD') > divergence(p, q, 'JSD')
    with pytest.raises(ValueError):
        divergence(p, q, 'TV')
    with pytest.raises(ValueError):
        divergence(p, q, eps=0.0)


def test_jsd_is_symmetric():
    """Test swapping the arguments leaves the JSD unchanged."""
    rng = np.random.default_rng(0)
    p = PixelClassDistribution(rng.random((5, 5)), 3)
    q = PixelClassDistribution(rng.random((5, 5)), 3)
    assert divergence(p, q) == pytest.approx(divergence(q, p), abs=1e-12)


def test_dsc_hand_count():
    """Test Dice on a hand-counted case and the empty case."""
    pred = np.array([[1, 1, 0], [0, 0, 0]])
    gt = np.array([[1, 0, 0], [1, 0, 0]])
    assert dsc(pred, gt) == pytest.approx(2 * 1 / 4)
    assert dsc([1, 1, 0, 0], [1, 1, 1, 1]) == pytest.approx(2 / 3)
    assert dsc(np.zeros(4), np.zeros(4)) == 1.0
    with pytest.raises(ShapeError):
        dsc(np.zeros(3), np.zeros(4))


def test_metrics_report_roundtrip(tmp_path):
    """Test write/read keeps values, provenance and metadata."""
    report = MetricsReport(
        {'fid': 12.5, 'psnr': 21.25}, n_real=10, n_synth=20, seed=3,
        config_hash='0123456789ab', metadata={'extractor': 'random'},
    )
    path = report.write(tmp_path / 'quality' / 'image_quality.csv')
    assert path.with_suffix('.json').exists()
    loaded = MetricsReport.read(path)
    assert loaded.values == report.values
    assert loaded.config_hash == '0123456789ab'
    assert loaded.metadata == {'extractor': 'random'}
    assert loaded['fid'] == 12.5


def test_metrics_report_read_without_rows(tmp_path):
    """Test header-only and empty tables are format errors."""
    path = MetricsReport({'fid': 1.0}, 4, 8, 0, 'aaaa').write(
        tmp_path / 'quality.csv'
    )
    header = path.read_text().splitlines()[0]
    path.write_text(header + '\n')
    with pytest.raises(FormatError, match="no rows"):
        MetricsReport.read(path)
    path.write_text('')
    with pytest.raises(FormatError, match="empty"):
        MetricsReport.read(path)


def test_metrics_report_merged():
    """Test the union of two reports."""
    a = MetricsReport({'fid': 1.0}, 4, 8, 0, 'aaaa')
    b = MetricsReport({'jsd': 0.1, 'fid': 2.0}, 4, 16, 0, 'aaaa',
                      {'mode': 'JSD'})
    merged = a.merged(b)
    assert merged.values == {'fid': 2.0, 'jsd': 0.1}
    assert merged.n_synth == 16
    assert merged.metadata == {'mode': 'JSD'}
