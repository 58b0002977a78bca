"""
Generative data-augmentation experiment.

Every cell of the plan trains a segmenter on the real slices of a
random subset of training subjects, optionally enlarged by classical
augmentation and by synthetic pairs, and scores it by volume DSC on a
held-out subject pool. Generators are trained once per
(fold, real count, beta) and shared by the cells that need them; every
other random choice of a cell is seeded from the cell's own key, so a
cell's result does not depend on which other cells run or in which
order.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

import pandas as pd
from tqdm.auto import tqdm

from dhvae.core.errors import ConfigError, LeakageError
from dhvae.data.augment import classic_augment
from dhvae.data.slices import SliceDataset, SlicePair
from dhvae.data.volumes import minmax_normalize
from dhvae.losses.objective import LossWeights
from dhvae.networks.checkpoint import load_checkpoint
from dhvae.networks.features import build_extractor
from dhvae.pipeline.config import Config, ExperimentPlan, TrainConfig
from dhvae.pipeline.generator import (
    CHECKPOINT_NAME,
    restore_leapfrog,
    train_config_hash,
    train_generator,
)
from dhvae.pipeline.prepare import Subject, subject_slices
from dhvae.pipeline.quality import (
    evaluate_image_quality,
    evaluate_mask_quality,
)
from dhvae.pipeline.sampling import generate_pairs
from dhvae.segmentation.trainer import train_segmenter
from dhvae.segmentation.volume import evaluate_dsc
from dhvae.utils.seeding import derive_seed, numpy_rng

logger = logging.getLogger(__name__)

RUN_COLUMNS = [
    'fold', 'real_count', 'beta', 'method', 'synth_count',
    'classic_factor', 'seed', 'n_train_slices', 'dsc_mean', 'dsc_std',
]
BETA_SWEEP_COLUMNS = [
    'fold', 'real_count', 'beta', 'psnr', 'fid', 'lpips', 'jsd',
    'kld_real_synth', 'kld_synth_real',
]
GENERATIVE_METHODS = ('dhvae', 'classic+dhvae')
CLASSIC_METHODS = ('classic', 'classic+dhvae')


def check_leakage(
    train_subjects: Sequence[str],
    test_subjects: Sequence[str]
) -> None:
    """
    Raises
    ------
    LeakageError
        If any subject id is on both sides.
    """
    shared = sorted(set(train_subjects) & set(test_subjects))
    if shared:
        raise LeakageError(
            f"Subjects in both train and test sets: {', '.join(shared)}"
        )


@dataclass(frozen=True)
class ExperimentCell:
    """
    One segmenter training run of the experiment.

    ``beta`` is None for methods without a generator and
    ``classic_factor`` is 1 for methods without classical augmentation.

    Raises
    ------
    LeakageError
        If a training subject is also a test subject.
    """

    fold: int
    real_count: int
    beta: float | None
    method: str
    synth_count: int
    classic_factor: int
    seed: int
    train_subjects: tuple[str, ...]
    test_subjects: tuple[str, ...]

    def __post_init__(self) -> None:
        check_leakage(self.train_subjects, self.test_subjects)

    @property
    def generator_key(self) -> tuple[int, int, float | None]:
        return (self.fold, self.real_count, self.beta)

    @property
    def generation_seed(self) -> int:
        return derive_seed(self.seed, 'generate', self.fold,
                           self.real_count, repr(self.beta))

    @property
    def classic_seed(self) -> int:
        return derive_seed(self.seed, 'classic', self.fold, self.real_count)

    @property
    def segmenter_seed(self) -> int:
        return derive_seed(self.seed, 'segmenter', self.fold,
                           self.real_count)

    def describe(self) -> str:
        parts = [self.method, f"fold {self.fold}",
                 f"{self.real_count} real", f"seed {self.seed}"]
        if self.beta is not None:
            parts.append(f"beta {self.beta:g}, +{self.synth_count} synthetic")
        if self.classic_factor > 1:
            parts.append(f"classic x{self.classic_factor}")
        return ', '.join(parts)


def split_corpus(
    corpus: Sequence[Subject],
    n_test: int,
    seed: int = 0
) -> tuple[list[Subject], list[Subject]]:
    """
    Seeded split into a training pool and a held-out pool of ``n_test``
    subjects; both keep the corpus order.

    Raises
    ------
    ConfigError
        If fewer than one training subject would remain.
    """
    if not 1 <= n_test < len(corpus):
        raise ConfigError(
            f"Cannot hold out {n_test} of {len(corpus)} subjects"
        )
    order = numpy_rng(seed, 'split').permutation(len(corpus))
    test_index = set(order[:n_test].tolist())
    train = [s for i, s in enumerate(corpus) if i not in test_index]
    test = [s for i, s in enumerate(corpus) if i in test_index]
    return train, test


def fold_subjects(
    train_ids: Sequence[str],
    fold: int,
    real_count: int,
    seed: int = 0
) -> tuple[str, ...]:
    """
    Training subjects of a fold. Smaller real counts of the same fold
    are prefixes of larger ones.
    """
    if real_count > len(train_ids):
        raise ConfigError(
            f"real_count {real_count} exceeds the training pool of "
            f"{len(train_ids)} subjects"
        )
    ids = sorted(train_ids)
    order = numpy_rng(seed, 'fold', fold).permutation(len(ids))
    return tuple(ids[i] for i in order[:real_count])


def plan_cells(
    plan: ExperimentPlan,
    train_ids: Sequence[str],
    test_ids: Sequence[str],
    seed: int = 0
) -> list[ExperimentCell]:
    """All cells of a plan, in a fixed order."""
    cells = []
    test = tuple(test_ids)
    for fold in range(plan.folds):
        for real_count in plan.real_counts:
            common = {
                'fold': fold,
                'real_count': real_count,
                'train_subjects': fold_subjects(
                    train_ids, fold, real_count, seed
                ),
                'test_subjects': test,
            }
            for cell_seed in plan.seeds:
                variants = []
                if 'reference' in plan.methods:
                    variants.append((None, 'reference', 0, 1))
                if 'classic' in plan.methods:
                    variants += [(None, 'classic', 0, factor)
                                 for factor in plan.classic_factors]
                for beta in plan.betas:
                    for count in plan.synth_counts:
                        if 'dhvae' in plan.methods:
                            variants.append((beta, 'dhvae', count, 1))
                        if 'classic+dhvae' in plan.methods:
                            variants += [
                                (beta, 'classic+dhvae', count, factor)
                                for factor in plan.classic_factors
                            ]
                cells += [
                    ExperimentCell(
                        beta=beta, method=method, synth_count=count,
                        classic_factor=factor, seed=cell_seed, **common
                    )
                    for beta, method, count, factor in variants
                ]
    return cells


@dataclass
class ExperimentResults:
    """
    Tables produced by :func:`run_augmentation_experiment`.

    Attributes
    ----------
    runs : pd.DataFrame
        One row per cell, columns :data:`RUN_COLUMNS`.
    beta_sweep : pd.DataFrame
        One row per trained generator, columns
        :data:`BETA_SWEEP_COLUMNS`.
    metadata : dict
        Provenance (config hash, subject split).
    """

    runs: pd.DataFrame
    beta_sweep: pd.DataFrame = field(
        default_factory=lambda: pd.DataFrame(columns=BETA_SWEEP_COLUMNS)
    )
    metadata: dict[str, Any] = field(default_factory=dict)


class GeneratorCache:
    """
    Trains each (fold, real count, beta) generator once and records its
    quality row. Checkpoints of finished runs with the same settings
    found under ``work_dir`` are reused.
    """

    def __init__(
        self,
        cfg: Config,
        slices: dict[str, list[SlicePair]],
        work_dir: Path,
        progress: bool = False
    ) -> None:
        self.cfg = cfg
        self.slices = slices
        self.work_dir = work_dir
        self.progress = progress
        self.paths: dict[tuple[int, int, float | None], Path] = {}
        self.quality_rows: list[dict[str, Any]] = []

    def train_config(self, cell: ExperimentCell) -> TrainConfig:
        base = self.cfg.train
        seed = derive_seed(base.seed, 'generator', cell.fold,
                           cell.real_count, repr(cell.beta))
        return replace(
            base,
            model=replace(base.model, seed=seed),
            weights=LossWeights.from_beta(cell.beta,
                                          base.weights.warmup_iters),
            seed=seed,
        )

    def _reusable(self, path: Path, train_cfg: TrainConfig) -> bool:
        if not path.exists():
            return False
        ckpt = load_checkpoint(path)
        return (
            ckpt.metadata.get('config_hash') == train_config_hash(train_cfg)
            and ckpt.iteration == train_cfg.iterations
        )

    def checkpoint(self, cell: ExperimentCell) -> Path:
        key = cell.generator_key
        if key in self.paths:
            return self.paths[key]
        train_cfg = self.train_config(cell)
        out_dir = self.work_dir / 'generators' / (
            f"fold{cell.fold}-real{cell.real_count}-beta{cell.beta:g}"
        )
        path = out_dir / CHECKPOINT_NAME
        real = [p for s in cell.train_subjects for p in self.slices[s]]
        if self._reusable(path, train_cfg):
            logger.info("Reusing generator '%s'", path)
        else:
            path = train_generator(
                SliceDataset.from_pairs(real), train_cfg, out_dir,
                progress=self.progress
            )
        self.paths[key] = path
        self.quality_rows.append(self._quality(cell, path, real))
        return path

    def _quality(
        self,
        cell: ExperimentCell,
        path: Path,
        real: list[SlicePair]
    ) -> dict[str, Any]:
        ckpt = load_checkpoint(path)
        quality = self.cfg.quality
        seed = derive_seed(self.cfg.train.seed, 'quality', cell.fold,
                           cell.real_count, repr(cell.beta))
        synth = generate_pairs(ckpt, quality.n_samples, seed,
                               self.cfg.sampling)
        fx = build_extractor(quality.extractor)
        image = evaluate_image_quality(
            real, synth, ckpt.restore_model(), fx, quality, seed,
            lf=restore_leapfrog(ckpt) if quality.refine_with_hmc else None,
            **self.cfg.train.likelihood,
        )
        masks = evaluate_mask_quality(real, synth, seed,
                                      eps=quality.divergence_eps)
        merged = image.merged(masks)
        return {
            'fold': cell.fold, 'real_count': cell.real_count,
            'beta': cell.beta,
            **{name: merged[name] for name in BETA_SWEEP_COLUMNS[3:]},
        }


def run_cell(
    cell: ExperimentCell,
    slices: dict[str, list[SlicePair]],
    test_pool: Sequence[Subject],
    cfg: Config,
    generators: GeneratorCache | None = None
) -> dict[str, Any]:
    """
    Train and evaluate the segmenter of one cell.

    Returns
    -------
    dict
        The cell's row with keys :data:`RUN_COLUMNS`.
    """
    pairs = [p for s in cell.train_subjects for p in slices[s]]
    if not pairs:
        raise ConfigError(
            f"No tumor-bearing slices among subjects {cell.train_subjects}"
        )
    if cell.method in CLASSIC_METHODS:
        pairs = classic_augment(pairs, cell.classic_factor, cell.classic_seed)
    if cell.method in GENERATIVE_METHODS and cell.synth_count > 0:
        if generators is None:
            raise ConfigError(f"Method '{cell.method}' needs generators")
        pairs = pairs + generate_pairs(
            generators.checkpoint(cell), cell.synth_count,
            cell.generation_seed, cfg.sampling
        )
    dataset = SliceDataset.from_pairs(pairs)
    check_leakage(dataset.subjects(), cell.test_subjects)

    seg_cfg = replace(cfg.segmentation, seed=cell.segmenter_seed)
    model, _ = train_segmenter(dataset, seg_cfg, progress=False)
    mean, std = evaluate_dsc(model, test_pool, cfg.experiment.selector)
    logger.info("Cell %s: DSC %.4f +/- %.4f", cell.describe(), mean, std)
    return {
        'fold': cell.fold,
        'real_count': cell.real_count,
        'beta': math.nan if cell.beta is None else cell.beta,
        'method': cell.method,
        'synth_count': cell.synth_count,
        'classic_factor': cell.classic_factor,
        'seed': cell.seed,
        'n_train_slices': len(dataset),
        'dsc_mean': mean,
        'dsc_std': std,
    }


def run_augmentation_experiment(
    plan: ExperimentPlan,
    train_pool: Sequence[Subject],
    test_pool: Sequence[Subject],
    cfg: Config | None = None,
    work_dir: str | Path = 'experiment',
    progress: bool = True
) -> ExperimentResults:
    """
    Run every cell of an augmentation plan.

    Parameters
    ----------
    plan : ExperimentPlan
        Sweeps to run; overrides ``cfg.experiment``.
    train_pool, test_pool : sequence of (Volume3D, MaskVolume3D)
        Subjects available for training and the held-out evaluation
        subjects. Volumes are min-max normalized here.
    cfg : Config, optional
        Generator, sampling, quality and segmenter settings; the fold
        draws are seeded by ``cfg.train.seed``.
    work_dir : str or Path, optional
        Receives the generator checkpoints.
    progress : bool, optional
        Show a progress bar over cells. Default is True.

    Raises
    ------
    LeakageError
        If a subject id appears in both pools.
    """
    cfg = replace(cfg or Config(), experiment=plan)
    train_ids = [volume.subject_id for volume, _ in train_pool]
    test_ids = [volume.subject_id for volume, _ in test_pool]
    check_leakage(train_ids, test_ids)
    if not test_pool:
        raise ConfigError("The held-out pool is empty")

    slices = subject_slices(train_pool, cfg.data)
    test = [(minmax_normalize(volume), mask) for volume, mask in test_pool]
    cells = plan_cells(plan, train_ids, test_ids, cfg.train.seed)
    generators = GeneratorCache(cfg, slices, Path(work_dir))
    logger.info("Running %d experiment cells", len(cells))

    rows = [
        run_cell(cell, slices, test, cfg, generators)
        for cell in tqdm(cells, desc='cells', disable=not progress)
    ]
    return ExperimentResults(
        runs=pd.DataFrame(rows, columns=RUN_COLUMNS),
        beta_sweep=pd.DataFrame(
            generators.quality_rows, columns=BETA_SWEEP_COLUMNS
        ).sort_values(['fold', 'real_count', 'beta'], ignore_index=True),
        metadata={
            'config_hash': cfg.hash,
            'train_subjects': sorted(train_ids),
            'test_subjects': sorted(test_ids),
        },
    )
