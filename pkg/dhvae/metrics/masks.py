"""
Mask metrics: per-pixel class distributions, their divergences and
the Dice similarity coefficient.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Literal

import numpy as np

from dhvae.core.errors import InsufficientSamplesError, ShapeError

DEFAULT_EPS = 1e-6


@dataclass(frozen=True)
class PixelClassDistribution:
    """Per-pixel foreground frequency over a set of masks."""

    prob: np.ndarray
    n_masks: int

    def __post_init__(self) -> None:
        prob = np.asarray(self.prob, dtype=np.float64)
        if self.n_masks < 1:
            raise InsufficientSamplesError("n_masks must be >= 1")
        if np.any(prob < 0) or np.any(prob > 1):
            raise ValueError("Pixel probabilities must lie in [0, 1]")
        object.__setattr__(self, 'prob', prob)


def pixel_class_distribution(masks: Any) -> PixelClassDistribution:
    """
    Foreground frequency of every pixel across ``masks``.

    Raises
    ------
    InsufficientSamplesError
        If there are no masks.
    ShapeError
        If the masks differ in shape.
    """
    masks = list(masks)
    if not masks:
        raise InsufficientSamplesError("Cannot summarize an empty mask set")
    shapes = {np.shape(m) for m in masks}
    if len(shapes) != 1:
        raise ShapeError(f"Masks have differing shapes {sorted(shapes)}")
    counts = np.zeros(shapes.pop(), dtype=np.int64)
    for mask in masks:
        counts += np.asarray(mask) > 0
    return PixelClassDistribution(counts / len(masks), len(masks))


def _bernoulli_kl(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    return p * np.log(p / q) + (1.0 - p) * np.log((1.0 - p) / (1.0 - q))


def divergence(
    P: PixelClassDistribution,
    Q: PixelClassDistribution,
    mode: Literal['KLD', 'JSD'] = 'JSD',
    eps: float = DEFAULT_EPS
) -> float:
    """
    Mean per-pixel Bernoulli divergence between two distributions.

    Probabilities are smoothed as ``(p + eps) / (1 + 2 eps)``; natural
    logarithm.

    Parameters
    ----------
    P, Q : PixelClassDistribution
        Distributions of equal shape.
    mode : {'KLD', 'JSD'}, optional
        ``KL(P || Q)`` or the Jensen-Shannon divergence.
        Default is ``'JSD'``.
    eps : float, optional
        Smoothing. Default is 1e-6.
    """
    if P.prob.shape != Q.prob.shape:
        raise ShapeError(
            f"Distributions differ in shape: {P.prob.shape} vs "
            f"{Q.prob.shape}"
        )
    if eps <= 0:
        raise ValueError(f"eps must be > 0, got {eps}")
    p = (P.prob + eps) / (1.0 + 2.0 * eps)
    q = (Q.prob + eps) / (1.0 + 2.0 * eps)
    if mode == 'KLD':
        values = _bernoulli_kl(p, q)
    elif mode == 'JSD':
        mid = 0.5 * (p + q)
        values = 0.5 * _bernoulli_kl(p, mid) + 0.5 * _bernoulli_kl(q, mid)
    else:
        raise ValueError(f"mode must be 'KLD' or 'JSD', got '{mode}'")
    return max(float(np.mean(values)), 0.0)


def dsc(pred: Any, gt: Any) -> float:
    """
    Dice similarity coefficient ``2|A & B| / (|A| + |B|)``.

    Two empty masks score 1.

    Examples
    --------
    >>> round(dsc([1, 1, 0, 0], [1, 1, 1, 1]), 4)
    0.6667
    """
    pred = np.asarray(pred) > 0
    gt = np.asarray(gt) > 0
    if pred.shape != gt.shape:
        raise ShapeError(f"DSC inputs differ: {pred.shape} vs {gt.shape}")
    total = int(pred.sum()) + int(gt.sum())
    if total == 0:
        return 1.0
    return 2.0 * int(np.logical_and(pred, gt).sum()) / total
