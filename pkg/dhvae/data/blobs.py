"""
Deterministic synthetic "blob" corpus.

Each subject is smoothed background noise with one to three bright
ellipsoids; the mask is the exact ellipsoid support. The corpus is a
desk-scale stand-in for clinical volumes.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from dhvae.core.errors import ConfigError
from dhvae.data.volumes import MaskVolume3D, Modality, Volume3D
from dhvae.utils.seeding import numpy_rng

BACKGROUND_LEVEL = 0.3
NOISE_STD = 0.05
NOISE_SMOOTHING = 1.5
RADIUS_FRACTION = (0.12, 0.22)
MIN_RADIUS = 1.5
AMPLITUDE = (0.35, 0.6)
TEXTURE_STD = 0.03


def _ellipsoid(
    shape: tuple[int, int, int],
    rng: np.random.Generator
) -> np.ndarray:
    radii = np.maximum(
        rng.uniform(*RADIUS_FRACTION, size=3) * np.asarray(shape),
        MIN_RADIUS,
    )
    centre = rng.uniform(radii, np.asarray(shape) - 1 - radii)
    grid = np.indices(shape, dtype=np.float64)
    distance = sum(
        ((grid[axis] - centre[axis]) / radii[axis]) ** 2 for axis in range(3)
    )
    return distance <= 1.0


def _subject(
    shape: tuple[int, int, int],
    rng: np.random.Generator,
    subject_id: str
) -> tuple[Volume3D, MaskVolume3D]:
    noise = ndimage.gaussian_filter(
        rng.standard_normal(shape), sigma=NOISE_SMOOTHING, mode='reflect'
    )
    noise *= NOISE_STD / max(float(noise.std()), 1e-12)

    clean = np.full(shape, BACKGROUND_LEVEL)
    support = np.zeros(shape, dtype=bool)
    for _ in range(int(rng.integers(1, 4))):
        blob = _ellipsoid(shape, rng)
        clean[blob] = BACKGROUND_LEVEL + rng.uniform(*AMPLITUDE)
        support |= blob

    texture = TEXTURE_STD * rng.standard_normal(shape) * support
    values = clean + noise + texture
    volume = Volume3D(values, (1.0, 1.0, 1.0), Modality.SYNTHETIC, subject_id)
    mask = MaskVolume3D(support.astype(np.uint8), (1.0, 1.0, 1.0), subject_id)
    return volume, mask


def make_blob_corpus(
    n_subjects: int,
    shape: tuple[int, int, int] = (32, 32, 8),
    seed: int = 0
) -> list[tuple[Volume3D, MaskVolume3D]]:
    """
    Generate a deterministic corpus of blob subjects.

    Parameters
    ----------
    n_subjects : int
        Number of subjects, at least 1.
    shape : tuple of int, optional
        Volume shape (H, W, D), every axis at least 8.
        Default is (32, 32, 8).
    seed : int, optional
        Corpus seed. Subject ``i`` draws from its own stream derived
        from ``(seed, i)``, so corpora of different sizes share their
        common prefix. Default is 0.

    Returns
    -------
    list of tuple
        ``(volume, mask)`` per subject, ids ``blob-<seed>-<i>``.

    Raises
    ------
    ConfigError
        If ``n_subjects`` < 1 or any axis is shorter than 8.

    Examples
    --------
    >>> corpus = make_blob_corpus(2, (16, 16, 8), seed=3)
    >>> [v.subject_id for v, _ in corpus]
    ['blob-3-000', 'blob-3-001']
    """
    if n_subjects < 1:
        raise ConfigError(f"n_subjects must be >= 1, got {n_subjects}")
    shape = tuple(int(s) for s in shape)  # type: ignore[assignment]
    if len(shape) != 3 or min(shape) < 8:
        raise ConfigError(f"Blob volumes need 3 axes >= 8, got {shape}")
    return [
        _subject(shape, numpy_rng(seed, 'blob', i), f"blob-{seed}-{i:03d}")
        for i in range(n_subjects)
    ]
