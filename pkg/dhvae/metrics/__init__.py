"""
Evaluation metrics for dhvae.

PSNR, Frechet distance, perceptual distance, mask distribution
divergences and the Dice coefficient, plus the report container.
"""

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
from dhvae.metrics.report import METRIC_COLUMNS, MetricsReport

__all__ = [
    'METRIC_COLUMNS',
    'EmbeddingStats',
    'MetricsReport',
    'PixelClassDistribution',
    'divergence',
    'dsc',
    'embed_images',
    'fid',
    'gaussian_stats',
    'lpips',
    'pixel_class_distribution',
    'psnr',
]
