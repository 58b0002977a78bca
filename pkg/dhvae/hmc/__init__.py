"""
Hamiltonian dynamics in the latent space of the joint autoencoder.
"""

from dhvae.hmc.leapfrog import (
    LeapfrogConfig,
    LeapfrogParams,
    PhaseState,
    dump_trajectory,
    evolve,
    hamiltonian,
    kinetic_energy,
    leapfrog_step,
    max_energy_drift,
    mh_accept,
    sample_momentum,
    trajectory_frame,
)
from dhvae.hmc.potential import (
    PotentialFn,
    grad_potential,
    potential_energy,
    standard_normal_log_density,
)
from dhvae.hmc.sampler import PosteriorSample, sample_posterior

__all__ = [
    'LeapfrogConfig',
    'LeapfrogParams',
    'PhaseState',
    'PosteriorSample',
    'PotentialFn',
    'dump_trajectory',
    'evolve',
    'grad_potential',
    'hamiltonian',
    'kinetic_energy',
    'leapfrog_step',
    'max_energy_drift',
    'mh_accept',
    'potential_energy',
    'sample_momentum',
    'sample_posterior',
    'standard_normal_log_density',
    'trajectory_frame',
]
