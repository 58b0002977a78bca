"""
End-to-end pipeline for dhvae.

Configuration, generator training, synthetic pair sampling, quality
evaluation, the augmentation experiment and its report.
"""

from dhvae.pipeline.config import (
    Config,
    DataConfig,
    ExperimentPlan,
    OptimizerConfig,
    QualityConfig,
    SamplingConfig,
    TrainConfig,
    load_config,
    with_overrides,
)
from dhvae.pipeline.experiment import (
    ExperimentCell,
    ExperimentResults,
    check_leakage,
    plan_cells,
    run_augmentation_experiment,
    split_corpus,
)
from dhvae.pipeline.generator import train_generator
from dhvae.pipeline.prepare import prepare_dataset
from dhvae.pipeline.quality import (
    evaluate_image_quality,
    evaluate_mask_quality,
)
from dhvae.pipeline.report import emit_report, load_results
from dhvae.pipeline.sampling import generate_pairs
from dhvae.pipeline.targets import REFERENCE_TARGETS

__all__ = [
    'Config',
    'DataConfig',
    'ExperimentCell',
    'ExperimentPlan',
    'ExperimentResults',
    'OptimizerConfig',
    'QualityConfig',
    'REFERENCE_TARGETS',
    'SamplingConfig',
    'TrainConfig',
    'check_leakage',
    'emit_report',
    'evaluate_image_quality',
    'evaluate_mask_quality',
    'generate_pairs',
    'load_config',
    'load_results',
    'plan_cells',
    'prepare_dataset',
    'run_augmentation_experiment',
    'split_corpus',
    'train_generator',
    'with_overrides',
]
