"""
dhvae - joint slice/mask synthesis for segmentation data augmentation.

A Hamiltonian variational autoencoder with feature-reconstruction and
adversarial regularizers generates 2D image slices together with their
tumor masks; the pipeline uses them to enlarge the training set of a
slice-wise segmenter and scores the result by volume Dice.
"""

__version__ = "0.1.0"
__author__ = "Giovanni Laganà"

# Errors
from dhvae.core.errors import (
    ConfigError,
    DHVAEError,
    GenerationError,
    LeakageError,
    NumericError,
)

# Data
from dhvae.data import (
    SliceDataset,
    SlicePair,
    load_corpus,
    load_dataset,
    make_blob_corpus,
    save_dataset,
)

# Pipeline
from dhvae.pipeline import (
    REFERENCE_TARGETS,
    Config,
    ExperimentPlan,
    TrainConfig,
    emit_report,
    evaluate_image_quality,
    evaluate_mask_quality,
    generate_pairs,
    load_config,
    prepare_dataset,
    run_augmentation_experiment,
    train_generator,
)

__all__ = [
    # Version info
    '__version__',
    '__author__',

    # Errors
    'ConfigError',
    'DHVAEError',
    'GenerationError',
    'LeakageError',
    'NumericError',

    # Data
    'SliceDataset',
    'SlicePair',
    'load_corpus',
    'load_dataset',
    'make_blob_corpus',
    'save_dataset',

    # Pipeline
    'Config',
    'ExperimentPlan',
    'REFERENCE_TARGETS',
    'TrainConfig',
    'emit_report',
    'evaluate_image_quality',
    'evaluate_mask_quality',
    'generate_pairs',
    'load_config',
    'prepare_dataset',
    'run_augmentation_experiment',
    'train_generator',
]
