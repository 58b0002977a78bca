"""
Feature-reconstruction and adversarial regularizers.
"""

from __future__ import annotations

from typing import Any

import torch

from dhvae.core.errors import NumericError, ShapeError
from dhvae.losses.likelihood import DELTA
from dhvae.networks.discriminator import PatchDiscriminator, discriminate
from dhvae.networks.features import FeatureExtractor


def feature_recon_loss(
    x_hat: torch.Tensor,
    x: torch.Tensor,
    fx: FeatureExtractor
) -> tuple[torch.Tensor, torch.Tensor]:
    """
    Perceptual and pixel reconstruction losses.

    Parameters
    ----------
    x_hat, x : torch.Tensor
        Reconstructed and target images, (N, C, H, W) in [0, 1].
    fx : FeatureExtractor
        Frozen extractor; gradients flow through it into ``x_hat``.

    Returns
    -------
    feature : torch.Tensor
        Squared feature distance summed over taps, averaged over the
        batch.
    l1 : torch.Tensor
        Mean absolute pixel difference.

    Raises
    ------
    ShapeError
        If the images differ in shape or have a channel count the
        extractor cannot take.
    """
    if x_hat.shape != x.shape:
        raise ShapeError(
            f"Reconstruction {tuple(x_hat.shape)} and target "
            f"{tuple(x.shape)} differ"
        )
    feature = x_hat.new_zeros(())
    for a, b in zip(fx(x_hat), fx(x), strict=True):
        feature = feature + (a - b).pow(2).flatten(1).sum(dim=1).mean()
    return feature, (x_hat - x).abs().mean()


def _log_prob(logits: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
    if not bool(torch.isfinite(logits).all()):
        raise NumericError(
            "Discriminator produced non-finite logits",
            stage='discriminator',
            diagnostics={'non_finite': int((~torch.isfinite(logits)).sum())},
        )
    p = torch.sigmoid(logits).clamp(DELTA, 1.0 - DELTA)
    return torch.log(p), torch.log1p(-p)


def discriminator_loss(
    real_logits: torch.Tensor,
    fake_logits: torch.Tensor
) -> torch.Tensor:
    """``-mean log D(real) - mean log(1 - D(fake))``."""
    log_real, _ = _log_prob(real_logits)
    _, log_not_fake = _log_prob(fake_logits)
    return -log_real.mean() - log_not_fake.mean()


def generator_loss(fake_logits: torch.Tensor) -> torch.Tensor:
    """Non-saturating generator objective ``-mean log D(fake)``."""
    log_fake, _ = _log_prob(fake_logits)
    return -log_fake.mean()


def adversarial_losses(
    disc: PatchDiscriminator,
    real_pair: tuple[Any, Any],
    fake_pair: tuple[torch.Tensor, torch.Tensor]
) -> tuple[torch.Tensor, torch.Tensor]:
    """
    Discriminator and generator terms for one batch.

    The discriminator term sees the fake pair detached, so it only
    trains the discriminator; the generator term keeps the graph into
    the generator.

    Returns
    -------
    disc_term, gen_term : torch.Tensor
        Scalars.
    """
    real_logits = discriminate(disc, *real_pair)
    fake_image, fake_mask = fake_pair
    detached = discriminate(disc, fake_image.detach(), fake_mask.detach())
    disc_term = discriminator_loss(real_logits, detached)
    gen_term = generator_loss(discriminate(disc, fake_image, fake_mask))
    return disc_term, gen_term
