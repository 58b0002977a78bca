"""
Neural networks for dhvae.

The joint image/mask autoencoder, the patch discriminator, frozen
feature extractors and the checkpoint container.
"""

from dhvae.networks.autoencoder import (
    JointVAE,
    LatentGaussian,
    ModelConfig,
    as_batch,
    init_model,
    reparameterize,
)
from dhvae.networks.checkpoint import (
    CHECKPOINT_FORMAT,
    Checkpoint,
    load_checkpoint,
    save_checkpoint,
)
from dhvae.networks.discriminator import (
    PatchDiscriminator,
    discriminate,
    init_discriminator,
)
from dhvae.networks.features import (
    DEFAULT_TAPS,
    PRETRAINED_KIND,
    RANDOM_KIND,
    FeatureExtractor,
    build_extractor,
    extract_features,
    fetch_pretrained_weights,
)
from dhvae.networks.layers import WSConv2d, group_count

__all__ = [
    'CHECKPOINT_FORMAT',
    'DEFAULT_TAPS',
    'PRETRAINED_KIND',
    'RANDOM_KIND',
    'Checkpoint',
    'FeatureExtractor',
    'JointVAE',
    'LatentGaussian',
    'ModelConfig',
    'PatchDiscriminator',
    'WSConv2d',
    'as_batch',
    'build_extractor',
    'discriminate',
    'extract_features',
    'fetch_pretrained_weights',
    'group_count',
    'init_discriminator',
    'init_model',
    'load_checkpoint',
    'reparameterize',
    'save_checkpoint',
]
