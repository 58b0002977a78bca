"""
Synthetic pair generation from a trained generator.
"""

from __future__ import annotations

import logging
from pathlib import Path

import numpy as np
import torch

from dhvae.core.errors import ConfigError, GenerationError
from dhvae.data.slices import Provenance, SlicePair
from dhvae.networks.checkpoint import Checkpoint, load_checkpoint
from dhvae.pipeline.config import SamplingConfig
from dhvae.utils.seeding import derive_seed, torch_generator

logger = logging.getLogger(__name__)

MASK_THRESHOLD = 0.5


def generate_pairs(
    checkpoint: str | Path | Checkpoint,
    n: int,
    seed: int = 0,
    cfg: SamplingConfig | None = None
) -> list[SlicePair]:
    """
    Decode ``n`` tumor-bearing pairs from standard normal latents.

    Masks are binarized at 0.5. A pair whose mask keeps fewer than
    ``cfg.min_fg_pixels`` foreground pixels is rejected and replaced by
    a further draw.

    Parameters
    ----------
    checkpoint : str, Path or Checkpoint
        Trained generator.
    n : int
        Number of pairs to return.
    seed : int, optional
        Seed of the latent draws. Default is 0.
    cfg : SamplingConfig, optional
        Rejection threshold, retry budget and batch size.

    Returns
    -------
    list of SlicePair
        Exactly ``n`` synthetic pairs with subject id
        ``synthetic-<seed>`` and consecutive slice indices.

    Raises
    ------
    GenerationError
        If the retry budget runs out before ``n`` pairs are accepted.
    """
    if n < 0:
        raise ConfigError(f"Cannot generate {n} pairs")
    cfg = cfg or SamplingConfig()
    ckpt = (
        checkpoint if isinstance(checkpoint, Checkpoint)
        else load_checkpoint(checkpoint)
    )
    model = ckpt.restore_model()
    model.eval()
    reference = next(model.parameters())
    latent_shape = model.cfg.latent_shape
    generator = torch_generator(derive_seed(seed, 'generate'))
    budget = max(n * cfg.retry_factor, cfg.batch_size)
    subject_id = f"synthetic-{seed}"

    accepted: list[SlicePair] = []
    drawn = 0
    rejected = 0
    with torch.no_grad():
        while len(accepted) < n:
            if drawn >= budget:
                rate = len(accepted) / drawn
                raise GenerationError(
                    f"Accepted {len(accepted)} of {n} requested pairs "
                    f"after {drawn} draws",
                    acceptance_rate=rate,
                )
            count = min(cfg.batch_size, budget - drawn)
            z = torch.randn(
                (count, *latent_shape), generator=generator,
                dtype=reference.dtype
            )
            image, mask_prob = model.decode(z)
            drawn += count
            images = image[:, 0].clamp(0.0, 1.0).double().numpy()
            masks = (mask_prob[:, 0] >= MASK_THRESHOLD).numpy()
            for index in range(count):
                mask = masks[index].astype(np.uint8)
                if int(mask.sum()) < cfg.min_fg_pixels:
                    rejected += 1
                    continue
                accepted.append(SlicePair(
                    image=images[index],
                    mask=mask,
                    subject_id=subject_id,
                    slice_index=len(accepted),
                    provenance=Provenance.SYNTHETIC,
                ))
                if len(accepted) == n:
                    break
    if rejected:
        logger.warning(
            "Rejected %d synthetic pairs with fewer than %d foreground "
            "pixels", rejected, cfg.min_fg_pixels
        )
    return accepted
