"""
Image quality metrics: PSNR, Frechet distance and perceptual distance.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import numpy as np
import torch
from scipy import linalg

from dhvae.core.errors import InsufficientSamplesError, ShapeError
from dhvae.networks.features import FeatureExtractor

NORM_GUARD = 1e-10


def psnr(a: Any, b: Any, max_val: float = 1.0) -> float:
    """
    Peak signal-to-noise ratio in decibels.

    Parameters
    ----------
    a, b : array-like
        Arrays of equal shape.
    max_val : float, optional
        Peak signal value. Default is 1.

    Returns
    -------
    float
        ``20 log10(max_val / sqrt(MSE))``; ``inf`` when ``a == b``.

    Examples
    --------
    >>> round(psnr(np.zeros(4), np.full(4, 0.1)), 10)
    20.0
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"PSNR inputs differ: {a.shape} vs {b.shape}")
    if max_val <= 0:
        raise ValueError(f"max_val must be > 0, got {max_val}")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return float('inf')
    return float(20.0 * np.log10(max_val / np.sqrt(mse)))


@dataclass(frozen=True)
class EmbeddingStats:
    """
    Mean and covariance of a set of embeddings.

    The covariance is symmetrized on construction.
    """

    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self) -> None:
        mean = np.atleast_1d(np.asarray(self.mean, dtype=np.float64))
        cov = np.atleast_2d(np.asarray(self.covariance, dtype=np.float64))
        if cov.shape != (mean.size, mean.size):
            raise ShapeError(
                f"Covariance {cov.shape} does not match mean {mean.shape}"
            )
        object.__setattr__(self, 'mean', mean)
        object.__setattr__(self, 'covariance', 0.5 * (cov + cov.T))

    @property
    def dim(self) -> int:
        return int(self.mean.size)


def gaussian_stats(embeddings: Any) -> EmbeddingStats:
    """
    Sample mean and unbiased covariance of an (N, d) matrix.

    Raises
    ------
    InsufficientSamplesError
        If N < 2.
    """
    x = np.asarray(embeddings, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if x.shape[0] < 2:
        raise InsufficientSamplesError(
            f"Need at least 2 embeddings for a covariance, got {x.shape[0]}"
        )
    return EmbeddingStats(
        x.mean(axis=0), np.atleast_2d(np.cov(x, rowvar=False, ddof=1))
    )


def _sqrt_psd(matrix: np.ndarray) -> np.ndarray:
    values, vectors = linalg.eigh(matrix)
    return (vectors * np.sqrt(np.clip(values, 0.0, None))) @ vectors.T


def fid(r: EmbeddingStats, f: EmbeddingStats) -> float:
    """
    Frechet distance between two Gaussians.

    ``|mu_r - mu_f|^2 + Tr(S_r + S_f - 2 (S_r S_f)^(1/2))``, where the
    trace of the square root is taken from the eigenvalues of the
    symmetric ``S_r^(1/2) S_f S_r^(1/2)`` with negative ones clamped.

    Raises
    ------
    ShapeError
        If the dimensions differ.
    """
    if r.dim != f.dim:
        raise ShapeError(f"Embedding dimensions differ: {r.dim} vs {f.dim}")
    root = _sqrt_psd(r.covariance)
    product = root @ f.covariance @ root
    eigenvalues = linalg.eigvalsh(0.5 * (product + product.T))
    trace_sqrt = float(np.sum(np.sqrt(np.clip(eigenvalues, 0.0, None))))
    diff = r.mean - f.mean
    value = (
        float(diff @ diff)
        + float(np.trace(r.covariance) + np.trace(f.covariance))
        - 2.0 * trace_sqrt
    )
    return max(value, 0.0)


def embed_images(
    fx: FeatureExtractor,
    images: Any,
    batch_size: int = 64
) -> np.ndarray:
    """Extractor embeddings of an (N, H, W) stack as a float64 matrix."""
    images = np.asarray(images)
    chunks = []
    with torch.no_grad():
        for start in range(0, len(images), batch_size):
            chunks.append(
                fx.embed(images[start:start + batch_size]).double().numpy()
            )
    if not chunks:
        return np.zeros((0, 0))
    return np.concatenate(chunks)


def lpips(a: Any, b: Any, fx: FeatureExtractor) -> float:
    """
    Perceptual distance between two images or two aligned batches.

    Every tap is unit-normalized along channels at each position, the
    squared differences are summed over channels, averaged over
    positions and summed over taps; batches are averaged.

    Raises
    ------
    ShapeError
        If the inputs differ in shape.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ShapeError(f"LPIPS inputs differ: {a.shape} vs {b.shape}")
    total = 0.0
    with torch.no_grad():
        for fa, fb in zip(fx(a), fx(b), strict=True):
            na = fa / (fa.norm(dim=1, keepdim=True) + NORM_GUARD)
            nb = fb / (fb.norm(dim=1, keepdim=True) + NORM_GUARD)
            per_position = (na - nb).pow(2).sum(dim=1)
            total += float(per_position.double().mean())
    return total
