"""
Reconstruction log-likelihoods of images and masks.
"""

from __future__ import annotations

import math

import torch

from dhvae.core.errors import DomainError, ShapeError

DELTA = 1e-6
LIKELIHOODS = ('bernoulli', 'gaussian')


def _check_targets(target: torch.Tensor, name: str) -> None:
    if bool(((target < 0) | (target > 1) | torch.isnan(target)).any()):
        raise DomainError(f"{name} targets must lie in [0, 1]")


def _per_sample(terms: torch.Tensor) -> torch.Tensor:
    return terms.flatten(1).sum(dim=1)


def bernoulli_log_likelihood(
    target: torch.Tensor,
    prob: torch.Tensor,
    delta: float = DELTA
) -> torch.Tensor:
    """
    Negated binary cross-entropy, summed over pixels, one value per
    sample. Predictions are clamped to ``[delta, 1 - delta]``.

    Examples
    --------
    >>> t = torch.full((1, 1, 1, 1), 0.3, dtype=torch.float64)
    >>> round(-bernoulli_log_likelihood(t, t).item(), 4)
    0.6109
    """
    p = prob.clamp(delta, 1.0 - delta)
    return _per_sample(
        target * torch.log(p) + (1.0 - target) * torch.log1p(-p)
    )


def gaussian_log_likelihood(
    target: torch.Tensor,
    mean: torch.Tensor,
    sigma: float
) -> torch.Tensor:
    """Gaussian log-density with fixed ``sigma``, summed over pixels."""
    z = (target - mean) / sigma
    constant = math.log(sigma) + 0.5 * math.log(2.0 * math.pi)
    return _per_sample(-0.5 * z ** 2 - constant)


def recon_log_likelihood(
    x: torch.Tensor,
    m: torch.Tensor,
    image_out: torch.Tensor,
    mask_prob: torch.Tensor,
    image_likelihood: str = 'bernoulli',
    gaussian_sigma: float = 0.1
) -> tuple[torch.Tensor, torch.Tensor]:
    """
    Log-likelihood of an (image, mask) batch under the decoder outputs.

    Parameters
    ----------
    x, m : torch.Tensor
        Targets of shape (N, C, H, W) with values in [0, 1]; ``m`` binary.
    image_out, mask_prob : torch.Tensor
        Decoder outputs of the same shapes.
    image_likelihood : {'bernoulli', 'gaussian'}, optional
        Cross-entropy on intensities (default) or a fixed-width Gaussian.
    gaussian_sigma : float, optional
        Width of the Gaussian likelihood. Default is 0.1.

    Returns
    -------
    image_ll, mask_ll : torch.Tensor
        Per-sample log-likelihoods of shape (N,).

    Raises
    ------
    DomainError
        If a target leaves [0, 1].
    ShapeError
        If targets and predictions differ in shape.
    """
    if x.shape != image_out.shape or m.shape != mask_prob.shape:
        raise ShapeError(
            f"Targets {tuple(x.shape)}/{tuple(m.shape)} do not match "
            f"predictions {tuple(image_out.shape)}/{tuple(mask_prob.shape)}"
        )
    _check_targets(x, 'Image')
    _check_targets(m, 'Mask')
    if image_likelihood == 'bernoulli':
        image_ll = bernoulli_log_likelihood(x, image_out)
    elif image_likelihood == 'gaussian':
        image_ll = gaussian_log_likelihood(x, image_out, gaussian_sigma)
    else:
        raise DomainError(
            f"Unknown image likelihood '{image_likelihood}', "
            f"expected one of {LIKELIHOODS}"
        )
    return image_ll, bernoulli_log_likelihood(m, mask_prob)
