"""
Posterior sampling with Metropolis-Hastings corrected HMC.

Used outside training: step sizes are frozen and every transition is
accepted or rejected, so the chain targets the decoder posterior of
the conditioning pair.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Any

import pandas as pd
import torch

from dhvae.hmc.leapfrog import (
    TRAJECTORY_COLUMNS,
    LeapfrogParams,
    PhaseState,
    evolve,
    hamiltonian,
    kinetic_energy,
    mh_accept,
    sample_momentum,
)
from dhvae.hmc.potential import PotentialFn
from dhvae.networks.autoencoder import JointVAE, as_batch
from dhvae.utils.seeding import torch_generator

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PosteriorSample:
    """
    Result of :func:`sample_posterior`.

    Attributes
    ----------
    z : torch.Tensor
        Final chain state, shape (N, C, h, w).
    acceptance_rate : float
        Accepted fraction over all transitions and samples.
    frame : pd.DataFrame or None
        One row per transition (step, H, kinetic, potential, accept)
        when requested.
    """

    z: torch.Tensor
    acceptance_rate: float
    frame: pd.DataFrame | None = None


def sample_posterior(
    model: JointVAE,
    lf: LeapfrogParams,
    image: Any,
    mask: Any,
    n_iterations: int = 10,
    seed: int | torch.Generator = 0,
    keep_trajectory: bool = False,
    **likelihood: Any
) -> PosteriorSample:
    """
    Run an HMC chain on the latent posterior of (image, mask).

    The chain starts at the encoder mean. Each transition draws fresh
    momentum, integrates ``lf.K`` leapfrog steps and applies the
    acceptance test per sample; rejected samples keep their position.

    Parameters
    ----------
    model : JointVAE
        Trained model.
    lf : LeapfrogParams
        Integrator; its step sizes are used as they are.
    image, mask : array-like or torch.Tensor
        Conditioning pair or batch.
    n_iterations : int, optional
        Number of transitions. Default is 10.
    seed : int or torch.Generator, optional
        Randomness of momenta and acceptance draws. Default is 0.
    keep_trajectory : bool, optional
        Also return per-transition diagnostics. Default is False.
    **likelihood
        ``image_likelihood`` / ``gaussian_sigma`` of the potential.
    """
    generator = torch_generator(seed)
    reference = next(model.parameters())
    x = as_batch(image, reference)
    m = as_batch(mask, reference)
    potential = PotentialFn.from_decoder(model, x, m, **likelihood)
    rows = []
    accepted = 0
    with torch.no_grad():
        z = model.encode(x, m).mean
        u_current = potential(z)
        for step in range(n_iterations):
            rho = sample_momentum(lf.mass, z.shape, generator)
            state0 = PhaseState(z, rho)
            h0 = hamiltonian(state0, lf.mass, u_current)
            stateK, _ = evolve(state0, lf, potential.grad)
            u_proposed = potential(stateK.z)
            hK = hamiltonian(stateK, lf.mass, u_proposed)
            draws = torch.rand(
                h0.shape, generator=generator, dtype=torch.float64
            )
            accept = mh_accept(h0, hK, draws)
            accept = torch.as_tensor(accept).to(z.device)
            keep = accept.view(-1, *([1] * (z.ndim - 1)))
            z = torch.where(keep, stateK.z, z)
            u_current = torch.where(accept, u_proposed, u_current)
            accepted += int(accept.sum())
            if keep_trajectory:
                kinetic = float(kinetic_energy(stateK.rho, lf.mass).mean())
                potential_value = float(u_proposed.mean())
                rows.append((
                    step, potential_value + kinetic, kinetic,
                    potential_value, float(accept.double().mean()),
                ))
    total = max(n_iterations * z.shape[0], 1)
    rate = accepted / total
    logger.debug("Posterior chain acceptance rate %.3f", rate)
    frame = (
        pd.DataFrame(rows, columns=TRAJECTORY_COLUMNS)
        if keep_trajectory else None
    )
    return PosteriorSample(z, rate, frame)
