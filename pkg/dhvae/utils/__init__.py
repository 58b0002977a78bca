"""
Utility functions for dhvae.

This module contains logging setup and seed derivation helpers.
"""

from dhvae.utils.logging import configure_logging
from dhvae.utils.seeding import (
    config_hash,
    derive_seed,
    numpy_rng,
    torch_generator,
)

__all__ = [
    'configure_logging',
    'config_hash',
    'derive_seed',
    'numpy_rng',
    'torch_generator',
]
