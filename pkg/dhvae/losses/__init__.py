"""
Loss functions for dhvae.

Reconstruction likelihoods, the plain and Hamiltonian ELBO, the
feature and adversarial regularizers and the weighted global loss.
"""

from dhvae.losses.likelihood import (
    DELTA,
    bernoulli_log_likelihood,
    gaussian_log_likelihood,
    recon_log_likelihood,
)
from dhvae.losses.elbo import ElboTerms, hvae_elbo, vae_elbo
from dhvae.losses.objective import (
    COMPONENTS,
    CSV_COLUMNS,
    LossReport,
    LossWeights,
    append_loss_csv,
    global_loss,
    read_loss_csv,
    reports_frame,
)
from dhvae.losses.regularizers import (
    adversarial_losses,
    discriminator_loss,
    feature_recon_loss,
    generator_loss,
)

__all__ = [
    'COMPONENTS',
    'CSV_COLUMNS',
    'DELTA',
    'ElboTerms',
    'LossReport',
    'LossWeights',
    'adversarial_losses',
    'append_loss_csv',
    'bernoulli_log_likelihood',
    'discriminator_loss',
    'feature_recon_loss',
    'gaussian_log_likelihood',
    'generator_loss',
    'global_loss',
    'hvae_elbo',
    'read_loss_csv',
    'recon_log_likelihood',
    'reports_frame',
    'vae_elbo',
]
