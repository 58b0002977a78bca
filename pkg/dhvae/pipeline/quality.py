"""
Image and mask quality evaluation of a generator.
"""

from __future__ import annotations

import logging
from collections.abc import Sequence
from typing import Any

import numpy as np
import torch

from dhvae.core.errors import InsufficientSamplesError
from dhvae.data.slices import SlicePair
from dhvae.hmc.leapfrog import LeapfrogParams
from dhvae.hmc.sampler import sample_posterior
from dhvae.metrics.image import embed_images, fid, gaussian_stats, lpips, psnr
from dhvae.metrics.masks import divergence, pixel_class_distribution
from dhvae.metrics.report import MetricsReport
from dhvae.networks.autoencoder import JointVAE
from dhvae.networks.features import FeatureExtractor, build_extractor
from dhvae.pipeline.config import QualityConfig
from dhvae.pipeline.targets import REFERENCE_TARGETS
from dhvae.utils.seeding import derive_seed, numpy_rng

logger = logging.getLogger(__name__)

BATCH = 64


def _stack(items: Sequence[Any], field: str) -> np.ndarray:
    arrays = [
        getattr(item, field) if isinstance(item, SlicePair) else item
        for item in items
    ]
    return np.stack([np.asarray(a) for a in arrays])


def reconstruct(
    model: JointVAE,
    pairs: Sequence[SlicePair],
    lf: LeapfrogParams | None = None,
    hmc_iterations: int = 10,
    seed: int = 0,
    **likelihood: Any
) -> tuple[np.ndarray, float | None]:
    """
    Reconstructed images of ``pairs``.

    Through the encoder mean, or, when ``lf`` is given, through the
    final state of an HMC chain on each posterior.

    Returns
    -------
    images : np.ndarray
        Shape (N, H, W), float64.
    acceptance_rate : float or None
        Mean acceptance of the chains; None without ``lf``.
    """
    model.eval()
    outputs = []
    rates = []
    for start in range(0, len(pairs), BATCH):
        chunk = pairs[start:start + BATCH]
        x = _stack(chunk, 'image')
        m = _stack(chunk, 'mask').astype(np.float32)
        if lf is None:
            with torch.no_grad():
                image = model(x, m)[0]
        else:
            sample = sample_posterior(
                model, lf, x, m, hmc_iterations,
                seed=derive_seed(seed, 'refine', start), **likelihood
            )
            rates.append(sample.acceptance_rate * len(chunk))
            with torch.no_grad():
                image = model.decode(sample.z)[0]
        outputs.append(image[:, 0].double().numpy())
    rate = sum(rates) / len(pairs) if rates else None
    return np.concatenate(outputs), rate


def _lpips_pairs(
    real: np.ndarray,
    synth: np.ndarray,
    pairing: str,
    seed: int
) -> tuple[np.ndarray, np.ndarray]:
    count = min(len(real), len(synth))
    if pairing == 'shuffled':
        order = numpy_rng(seed, 'lpips-pairing').permutation(len(synth))
        return real[:count], synth[order[:count]]
    return real[:count], synth[:count]


def _batched_lpips(
    a: np.ndarray,
    b: np.ndarray,
    fx: FeatureExtractor
) -> float:
    total = 0.0
    for start in range(0, len(a), BATCH):
        chunk = slice(start, start + BATCH)
        total += lpips(a[chunk], b[chunk], fx) * len(a[chunk])
    return total / len(a)


def evaluate_image_quality(
    real: Sequence[SlicePair],
    synth: Sequence[SlicePair],
    model: JointVAE | None = None,
    fx: FeatureExtractor | None = None,
    cfg: QualityConfig | None = None,
    seed: int = 0,
    config_hash: str = '',
    lf: LeapfrogParams | None = None,
    **likelihood: Any
) -> MetricsReport:
    """
    PSNR, FID and LPIPS of a generator.

    PSNR compares real images with their reconstructions by ``model``
    (skipped when no model is given); FID compares the embedding
    statistics of the real and synthetic sets; LPIPS averages the
    perceptual distance over real/synthetic pairs matched according to
    ``cfg.pairing``.

    Parameters
    ----------
    real, synth : sequence of SlicePair
        Real and synthetic pairs, two or more each.
    model : JointVAE, optional
        Generator for the reconstruction PSNR.
    fx : FeatureExtractor, optional
        Embedding backbone; built from ``cfg.extractor`` if omitted.
    cfg : QualityConfig, optional
        Pairing strategy and HMC refinement settings.
    seed : int, optional
        Seed of the pairing shuffle and the HMC chains. Default is 0.
    config_hash : str, optional
        Stamped into the report.
    lf : LeapfrogParams, optional
        Integrator for ``cfg.refine_with_hmc``.
    **likelihood
        ``image_likelihood`` / ``gaussian_sigma`` of the HMC potential.

    Raises
    ------
    InsufficientSamplesError
        If either set has fewer than two pairs.
    """
    cfg = cfg or QualityConfig()
    if len(real) < 2 or len(synth) < 2:
        raise InsufficientSamplesError(
            f"Image quality needs >= 2 pairs per set, got {len(real)} real "
            f"and {len(synth)} synthetic"
        )
    fx = fx or build_extractor(cfg.extractor)
    real_images = _stack(real, 'image')
    synth_images = _stack(synth, 'image')
    values: dict[str, float] = {}
    metadata: dict[str, Any] = {
        'backbone': fx.kind,
        'tap_indices': list(fx.tap_indices),
        'preprocessing': fx.preprocessing,
        'pairing': cfg.pairing,
        'reference_targets': REFERENCE_TARGETS,
    }

    if model is not None:
        refine = cfg.refine_with_hmc and lf is not None
        if cfg.refine_with_hmc and lf is None:
            logger.warning("HMC refinement requested without an integrator; "
                           "reconstructing through the encoder mean")
        recon, rate = reconstruct(
            model, real, lf if refine else None, cfg.hmc_iterations,
            seed, **likelihood
        )
        scores = [psnr(r, x) for r, x in zip(recon, real_images)]
        values['psnr'] = float(np.mean(scores))
        metadata['reconstruction'] = 'hmc' if refine else 'encoder-mean'
        if rate is not None:
            metadata['hmc_acceptance_rate'] = rate

    real_stats = gaussian_stats(embed_images(fx, real_images))
    synth_stats = gaussian_stats(embed_images(fx, synth_images))
    values['fid'] = fid(real_stats, synth_stats)
    values['lpips'] = _batched_lpips(
        *_lpips_pairs(real_images, synth_images, cfg.pairing, seed), fx
    )
    logger.info(
        "Image quality: %s",
        ', '.join(f"{k}={v:.4f}" for k, v in values.items())
    )
    return MetricsReport(
        values, len(real), len(synth), seed, config_hash, metadata
    )


def evaluate_mask_quality(
    real_masks: Sequence[Any],
    synth_masks: Sequence[Any],
    seed: int = 0,
    config_hash: str = '',
    eps: float = 1e-6
) -> MetricsReport:
    """
    Divergences between the pixel-class distributions of two mask sets.

    Reports ``jsd``, ``kld_real_synth`` (``KL(real || synth)``) and
    ``kld_synth_real``; metadata holds ``n_masks`` of both sets.

    Parameters
    ----------
    real_masks, synth_masks : sequence
        Binary masks (arrays or SlicePair) of one common shape.

    Raises
    ------
    ShapeError
        If the two sets differ in mask shape.
    InsufficientSamplesError
        If either set is empty.
    """
    real = pixel_class_distribution(
        [getattr(m, 'mask', m) for m in real_masks]
    )
    synth = pixel_class_distribution(
        [getattr(m, 'mask', m) for m in synth_masks]
    )
    values = {
        'jsd': divergence(real, synth, 'JSD', eps),
        'kld_real_synth': divergence(real, synth, 'KLD', eps),
        'kld_synth_real': divergence(synth, real, 'KLD', eps),
    }
    metadata = {
        'n_masks_real': real.n_masks,
        'n_masks_synth': synth.n_masks,
        'eps': eps,
        'reference_targets': REFERENCE_TARGETS,
    }
    logger.info("Mask quality: JSD %.5f, KLD %.5f / %.5f",
                values['jsd'], values['kld_real_synth'],
                values['kld_synth_real'])
    return MetricsReport(
        values, real.n_masks, synth.n_masks, seed, config_hash, metadata
    )
