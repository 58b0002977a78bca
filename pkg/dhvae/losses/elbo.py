"""
Evidence lower bounds of the joint autoencoder.

:func:`hvae_elbo` flows the reparameterized sample through the leapfrog
integrator before decoding; :func:`vae_elbo` is the plain estimator and
coincides with the Hamiltonian one at K = 0 for the same seed.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Any

import torch

from dhvae.core.errors import ConfigError, NumericError
from dhvae.hmc.leapfrog import (
    LeapfrogParams,
    PhaseState,
    evolve,
    kinetic_energy,
    sample_momentum,
)
from dhvae.hmc.potential import PotentialFn, standard_normal_log_density
from dhvae.losses.likelihood import recon_log_likelihood
from dhvae.networks.autoencoder import JointVAE, as_batch, reparameterize
from dhvae.utils.seeding import torch_generator

logger = logging.getLogger(__name__)

ENTROPY_MODES = ('flow', 'literal')


@dataclass(frozen=True)
class ElboTerms:
    """
    Batch-averaged ELBO components (minimization targets) together
    with the tensors later losses need.

    Attributes
    ----------
    recon_image, recon_mask : torch.Tensor
        Cross-entropies (negated log-likelihoods) summed over pixels.
    kl_or_entropy : torch.Tensor
        ``log q(z) - log p(z_K)`` term.
    kinetic : torch.Tensor
        ``0.5 rho_K^T M^-1 rho_K - 0.5 rho_0^T M^-1 rho_0``.
    image_out, mask_prob : torch.Tensor
        Decoder outputs at ``z_K``.
    z0, zK : torch.Tensor
        Start and end of the latent flow.
    """

    recon_image: torch.Tensor
    recon_mask: torch.Tensor
    kl_or_entropy: torch.Tensor
    kinetic: torch.Tensor
    image_out: torch.Tensor
    mask_prob: torch.Tensor
    z0: torch.Tensor
    zK: torch.Tensor

    @property
    def elbo_h(self) -> torch.Tensor:
        """Negated ELBO estimate."""
        return (
            self.recon_image + self.recon_mask
            + self.kl_or_entropy + self.kinetic
        )

    def components(self) -> dict[str, torch.Tensor]:
        """Scalar components keyed by their report names."""
        return {
            'elbo_h': self.elbo_h,
            'recon_image': self.recon_image,
            'recon_mask': self.recon_mask,
            'kl_or_entropy': self.kl_or_entropy,
            'kinetic': self.kinetic,
        }


def _check_components(terms: ElboTerms) -> ElboTerms:
    for name, value in terms.components().items():
        if not bool(torch.isfinite(value)):
            raise NumericError(
                "ELBO is not finite",
                stage=name,
                diagnostics={
                    k: float(v.detach())
                    for k, v in terms.components().items()
                },
            )
    return terms


def _posterior_sample(
    model: JointVAE,
    x: torch.Tensor,
    m: torch.Tensor,
    generator: torch.Generator
) -> tuple[Any, torch.Tensor]:
    posterior = model.encode(x, m)
    noise = torch.randn(
        tuple(posterior.mean.shape), generator=generator,
        dtype=posterior.mean.dtype
    ).to(posterior.mean.device)
    return posterior, reparameterize(posterior, noise)


def hvae_elbo(
    model: JointVAE,
    lf: LeapfrogParams,
    image: Any,
    mask: Any,
    seed: int | torch.Generator,
    entropy_mode: str = 'flow',
    image_likelihood: str = 'bernoulli',
    gaussian_sigma: float = 0.1
) -> ElboTerms:
    """
    Single-sample Hamiltonian ELBO estimate for a batch.

    ``z0`` is drawn by reparameterization, ``rho0`` from the momentum
    distribution (in that order, from one generator), both are evolved
    for ``lf.K`` leapfrog steps with gradients kept through the flow,
    and the final position is decoded.

    Parameters
    ----------
    model : JointVAE
        Encoder and decoder.
    lf : LeapfrogParams
        Integrator; its step sizes receive gradients when learnable.
    image, mask : array-like or torch.Tensor
        Batch of pairs.
    seed : int or torch.Generator
        Randomness of the estimate.
    entropy_mode : {'flow', 'literal'}, optional
        ``'flow'`` scores the final state by the posterior density of
        ``z0`` carried through the volume-preserving flow; ``'literal'``
        evaluates the encoder density directly at ``z_K``.
        Default is ``'flow'``.
    image_likelihood, gaussian_sigma
        See :func:`recon_log_likelihood`.

    Raises
    ------
    NumericError
        If a component is non-finite; ``stage`` names it.
    """
    if entropy_mode not in ENTROPY_MODES:
        raise ConfigError(
            f"entropy_mode must be one of {ENTROPY_MODES}, "
            f"got '{entropy_mode}'"
        )
    generator = torch_generator(seed)
    reference = next(model.parameters())
    x = as_batch(image, reference)
    m = as_batch(mask, reference)

    posterior, z0 = _posterior_sample(model, x, m, generator)
    rho0 = sample_momentum(lf.mass, z0.shape, generator)
    potential = PotentialFn.from_decoder(
        model, x, m, image_likelihood, gaussian_sigma
    )
    stateK, _ = evolve(
        PhaseState(z0, rho0), lf,
        lambda z: potential.grad(z, create_graph=True)
    )
    zK = stateK.z
    image_out, mask_prob = model.decode(zK)
    image_ll, mask_ll = recon_log_likelihood(
        x, m, image_out, mask_prob, image_likelihood, gaussian_sigma
    )
    event_dims = z0.ndim - 1
    log_q = posterior.log_density(z0 if entropy_mode == 'flow' else zK)
    log_prior = standard_normal_log_density(zK, event_dims)
    kinetic = (
        kinetic_energy(stateK.rho, lf.mass) - kinetic_energy(rho0, lf.mass)
    )
    return _check_components(ElboTerms(
        recon_image=-image_ll.mean(),
        recon_mask=-mask_ll.mean(),
        kl_or_entropy=(log_q - log_prior).mean(),
        kinetic=kinetic.mean(),
        image_out=image_out,
        mask_prob=mask_prob,
        z0=z0,
        zK=zK,
    ))


def vae_elbo(
    model: JointVAE,
    image: Any,
    mask: Any,
    seed: int | torch.Generator,
    analytic_kl: bool = False,
    image_likelihood: str = 'bernoulli',
    gaussian_sigma: float = 0.1
) -> ElboTerms:
    """
    Plain single-sample ELBO estimate.

    With ``analytic_kl=False`` the KL term is the sampled
    ``log q(z0) - log p(z0)``, which makes the result identical to
    :func:`hvae_elbo` with K = 0 and the same seed.
    """
    generator = torch_generator(seed)
    reference = next(model.parameters())
    x = as_batch(image, reference)
    m = as_batch(mask, reference)
    posterior, z0 = _posterior_sample(model, x, m, generator)
    image_out, mask_prob = model.decode(z0)
    image_ll, mask_ll = recon_log_likelihood(
        x, m, image_out, mask_prob, image_likelihood, gaussian_sigma
    )
    if analytic_kl:
        kl = posterior.kl_to_standard_normal()
    else:
        kl = posterior.log_density(z0) - standard_normal_log_density(
            z0, z0.ndim - 1
        )
    return _check_components(ElboTerms(
        recon_image=-image_ll.mean(),
        recon_mask=-mask_ll.mean(),
        kl_or_entropy=kl.mean(),
        kinetic=z0.new_zeros(()),
        image_out=image_out,
        mask_prob=mask_prob,
        z0=z0,
        zK=z0,
    ))
