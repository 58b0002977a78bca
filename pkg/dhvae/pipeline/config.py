"""
Run configuration.

Every setting of a run lives in one frozen :class:`Config` tree of
dataclasses. Config files are TOML with ``spec_version = 1`` at the top
and one table per section; any field is addressable by its dotted key,
both in files (``train.model.depth = 4``) and as command-line overrides
(``--set train.model.depth=4``).

Examples
--------
>>> cfg = load_config(overrides=['train.iterations=10'])
>>> cfg.train.iterations
10
"""

from __future__ import annotations

import logging
import tomllib
from collections.abc import Iterable, Mapping
from dataclasses import asdict, dataclass, field, fields, is_dataclass
from pathlib import Path
from typing import Any, get_type_hints

import torch

from dhvae.core.errors import ConfigError
from dhvae.hmc.leapfrog import LeapfrogConfig
from dhvae.losses.elbo import ENTROPY_MODES
from dhvae.losses.likelihood import LIKELIHOODS
from dhvae.losses.objective import LossWeights
from dhvae.networks.autoencoder import ModelConfig
from dhvae.networks.features import RANDOM_KIND
from dhvae.segmentation.unet import SegConfig
from dhvae.utils.seeding import config_hash

logger = logging.getLogger(__name__)

SPEC_VERSION = 1
PRECISIONS = {'float32': torch.float32, 'float64': torch.float64}
METHODS = ('reference', 'dhvae', 'classic', 'classic+dhvae')
PAIRINGS = ('index', 'shuffled')


@dataclass(frozen=True)
class OptimizerConfig:
    """
    Decoupled-weight-decay Adam settings shared by the generator and
    the discriminator optimizers.
    """

    lr: float = 5e-5
    beta1: float = 0.5
    beta2: float = 0.999
    weight_decay: float = 1e-6

    def __post_init__(self) -> None:
        if not self.lr > 0:
            raise ConfigError(f"optimizer.lr must be > 0, got {self.lr}")
        for name in ('beta1', 'beta2'):
            if not 0.0 <= getattr(self, name) < 1.0:
                raise ConfigError(
                    f"optimizer.{name} must lie in [0, 1), "
                    f"got {getattr(self, name)}"
                )
        if self.weight_decay < 0:
            raise ConfigError(
                f"optimizer.weight_decay must be >= 0, "
                f"got {self.weight_decay}"
            )

    def build(self, params: Iterable[torch.nn.Parameter]) -> torch.optim.AdamW:
        return torch.optim.AdamW(
            params, lr=self.lr, betas=(self.beta1, self.beta2),
            weight_decay=self.weight_decay,
        )


@dataclass(frozen=True)
class TrainConfig:
    """
    Generator training run.

    Parameters
    ----------
    model : ModelConfig
        Autoencoder architecture.
    lf : LeapfrogConfig
        Latent integrator.
    weights : LossWeights
        Global objective weights and warm-up.
    optimizer : OptimizerConfig
        Settings of both optimizers.
    iterations : int, optional
        Total iterations. Default is 300.
    batch_size : int, optional
        Pairs per iteration. Default is 16.
    seed : int, optional
        Seed of batches and estimator noise. Default is 0.
    checkpoint_every : int, optional
        Checkpoint cadence in iterations; the last iteration is always
        checkpointed. Default is 100.
    entropy_mode : {'flow', 'literal'}, optional
        Treatment of the final-state entropy. Default is ``'flow'``.
    image_likelihood : {'bernoulli', 'gaussian'}, optional
        Image reconstruction likelihood. Default is ``'bernoulli'``.
    gaussian_sigma : float, optional
        Standard deviation of the Gaussian likelihood. Default is 0.1.
    extractor : str, optional
        Feature extractor kind of the feature loss.
        Default is the test kind.
    disc_depth : int, optional
        Strided blocks of the discriminator. Default is 3.
    precision : {'float32', 'float64'}, optional
        Dtype of every network. Default is ``'float32'``.
    """

    model: ModelConfig = field(default_factory=ModelConfig)
    lf: LeapfrogConfig = field(default_factory=LeapfrogConfig)
    weights: LossWeights = field(default_factory=LossWeights)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    iterations: int = 300
    batch_size: int = 16
    seed: int = 0
    checkpoint_every: int = 100
    entropy_mode: str = 'flow'
    image_likelihood: str = 'bernoulli'
    gaussian_sigma: float = 0.1
    extractor: str = RANDOM_KIND
    disc_depth: int = 3
    precision: str = 'float32'

    def __post_init__(self) -> None:
        for name in ('iterations', 'batch_size', 'checkpoint_every',
                     'disc_depth'):
            if getattr(self, name) < 1:
                raise ConfigError(
                    f"train.{name} must be >= 1, got {getattr(self, name)}"
                )
        if self.entropy_mode not in ENTROPY_MODES:
            raise ConfigError(
                f"train.entropy_mode must be one of {ENTROPY_MODES}"
            )
        if self.image_likelihood not in LIKELIHOODS:
            raise ConfigError(
                f"train.image_likelihood must be one of {LIKELIHOODS}"
            )
        if not self.gaussian_sigma > 0:
            raise ConfigError("train.gaussian_sigma must be > 0")
        if self.precision not in PRECISIONS:
            raise ConfigError(
                f"train.precision must be one of {sorted(PRECISIONS)}"
            )

    @property
    def dtype(self) -> torch.dtype:
        return PRECISIONS[self.precision]

    @property
    def likelihood(self) -> dict[str, Any]:
        """Keyword arguments of the reconstruction likelihood."""
        return {
            'image_likelihood': self.image_likelihood,
            'gaussian_sigma': self.gaussian_sigma,
        }


@dataclass(frozen=True)
class DataConfig:
    """
    Ingestion settings.

    ``modality`` is empty to let the reader choose. The blob fields
    describe the synthetic corpus written by ``make-blobs``;
    ``test_subjects`` is the size of the held-out pool of the
    augmentation experiment.
    """

    min_fg_pixels: int = 10
    axis: int = -1
    modality: str = ''
    workers: int = 1
    blob_subjects: int = 12
    blob_shape: tuple[int, int, int] = (32, 32, 8)
    test_subjects: int = 4

    def __post_init__(self) -> None:
        object.__setattr__(
            self, 'blob_shape', tuple(int(s) for s in self.blob_shape)
        )
        if self.min_fg_pixels < 1:
            raise ConfigError("data.min_fg_pixels must be >= 1")
        if self.axis not in (-3, -2, -1, 0, 1, 2):
            raise ConfigError(f"data.axis {self.axis} is not a volume axis")
        if self.workers < 1 or self.blob_subjects < 1:
            raise ConfigError("data.workers and data.blob_subjects must "
                              "be >= 1")
        if self.test_subjects < 1:
            raise ConfigError("data.test_subjects must be >= 1")


@dataclass(frozen=True)
class SamplingConfig:
    """
    Synthetic pair generation.

    A request for ``n`` pairs may decode at most
    ``max(n * retry_factor, batch_size)`` latents.
    """

    min_fg_pixels: int = 10
    retry_factor: int = 20
    batch_size: int = 64

    def __post_init__(self) -> None:
        for name in ('min_fg_pixels', 'retry_factor', 'batch_size'):
            if getattr(self, name) < 1:
                raise ConfigError(f"sampling.{name} must be >= 1")


@dataclass(frozen=True)
class QualityConfig:
    """
    Image and mask quality evaluation.

    Parameters
    ----------
    extractor : str, optional
        Embedding backbone of FID and LPIPS. Default is the test kind.
    pairing : {'index', 'shuffled'}, optional
        How real and synthetic images are paired for LPIPS: in input
        order, or after a seeded shuffle of the synthetic set.
        Default is ``'shuffled'``.
    refine_with_hmc : bool, optional
        Reconstruct from an HMC posterior chain instead of the encoder
        mean. Default is False.
    hmc_iterations : int, optional
        Transitions of that chain. Default is 10.
    divergence_eps : float, optional
        Smoothing of the mask distributions. Default is 1e-6.
    n_samples : int, optional
        Synthetic pairs drawn per generator in the beta sweep.
        Default is 64.
    """

    extractor: str = RANDOM_KIND
    pairing: str = 'shuffled'
    refine_with_hmc: bool = False
    hmc_iterations: int = 10
    divergence_eps: float = 1e-6
    n_samples: int = 64

    def __post_init__(self) -> None:
        if self.pairing not in PAIRINGS:
            raise ConfigError(f"quality.pairing must be one of {PAIRINGS}")
        if self.hmc_iterations < 1:
            raise ConfigError("quality.hmc_iterations must be >= 1")
        if not 0 < self.divergence_eps < 0.5:
            raise ConfigError("quality.divergence_eps must lie in (0, 0.5)")
        if self.n_samples < 2:
            raise ConfigError("quality.n_samples must be >= 2")


@dataclass(frozen=True)
class ExperimentPlan:
    """
    Sweeps of the augmentation experiment.

    Parameters
    ----------
    real_counts : tuple of int
        Numbers of real training subjects.
    synth_counts : tuple of int
        Numbers of synthetic pairs added by the generative methods.
    folds : int
        Random draws of the real training subjects.
    seeds : tuple of int
        Seeds of sampling and segmenter training.
    betas : tuple of float
        Regularizer weights; one generator is trained per value.
    methods : tuple of str
        Any of ``'reference'``, ``'dhvae'``, ``'classic'`` and
        ``'classic+dhvae'``.
    classic_factors : tuple of int
        Multiplication factors of classical augmentation.
    selector : str
        Slice selector policy of the volume evaluation.
    """

    real_counts: tuple[int, ...] = (6,)
    synth_counts: tuple[int, ...] = (0, 500)
    folds: int = 1
    seeds: tuple[int, ...] = (0,)
    betas: tuple[float, ...] = (0.01,)
    methods: tuple[str, ...] = ('reference', 'dhvae')
    classic_factors: tuple[int, ...] = (2, 5)
    selector: str = 'oracle'

    def __post_init__(self) -> None:
        for name in ('real_counts', 'synth_counts', 'seeds', 'betas',
                     'methods', 'classic_factors'):
            value = tuple(getattr(self, name))
            object.__setattr__(self, name, value)
            if not value:
                raise ConfigError(f"experiment.{name} must not be empty")
        if self.folds < 1:
            raise ConfigError(f"experiment.folds must be >= 1, "
                              f"got {self.folds}")
        if min(self.real_counts) < 1:
            raise ConfigError("experiment.real_counts must be >= 1")
        if min(self.synth_counts) < 0:
            raise ConfigError("experiment.synth_counts must be >= 0")
        if min(self.classic_factors) < 1:
            raise ConfigError("experiment.classic_factors must be >= 1")
        if any(not 0.0 <= beta <= 1.0 for beta in self.betas):
            raise ConfigError("experiment.betas must lie in [0, 1]")
        unknown = sorted(set(self.methods) - set(METHODS))
        if unknown:
            raise ConfigError(
                f"Unknown experiment method(s) {unknown}; "
                f"available: {list(METHODS)}"
            )


@dataclass(frozen=True)
class Config:
    """Root of the configuration tree."""

    spec_version: int = SPEC_VERSION
    data: DataConfig = field(default_factory=DataConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    sampling: SamplingConfig = field(default_factory=SamplingConfig)
    quality: QualityConfig = field(default_factory=QualityConfig)
    segmentation: SegConfig = field(default_factory=SegConfig)
    experiment: ExperimentPlan = field(default_factory=ExperimentPlan)

    def __post_init__(self) -> None:
        if self.spec_version != SPEC_VERSION:
            raise ConfigError(
                f"Unsupported spec_version {self.spec_version!r}, "
                f"expected {SPEC_VERSION}"
            )

    def to_dict(self) -> dict[str, Any]:
        """Plain nested data; tuples become lists."""
        return plain_data(asdict(self))

    @property
    def hash(self) -> str:
        """Short stable digest stamped into reports and checkpoints."""
        return config_hash(self.to_dict())


def plain_data(value: Any) -> Any:
    if isinstance(value, dict):
        return {key: plain_data(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [plain_data(item) for item in value]
    return value


def build_config(cls: type, data: Any, prefix: str = '') -> Any:
    """Build config dataclass ``cls`` from nested plain data."""
    if not isinstance(data, Mapping):
        raise ConfigError(f"'{prefix.rstrip('.') or 'config'}' must be "
                          f"a table")
    hints = get_type_hints(cls)
    names = {f.name for f in fields(cls) if f.init}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigError(
            "Unknown config key(s): "
            + ', '.join(prefix + key for key in unknown)
        )
    kwargs = {}
    for name, value in data.items():
        hint = hints[name]
        if isinstance(hint, type) and is_dataclass(hint):
            kwargs[name] = build_config(hint, value, f"{prefix}{name}.")
        elif isinstance(value, list):
            kwargs[name] = tuple(value)
        else:
            kwargs[name] = value
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"Invalid value under '{prefix}': {exc}") from exc


def config_from_dict(data: Mapping[str, Any]) -> Config:
    """
    Build a configuration from nested plain data.

    Raises
    ------
    ConfigError
        On unknown keys, invalid values or a wrong ``spec_version``.
    """
    return build_config(Config, data, '')


def parse_override(text: str) -> tuple[str, Any]:
    """
    Split ``dotted.key=value``; the value is read as a TOML literal and
    falls back to a bare string.

    Examples
    --------
    >>> parse_override('experiment.betas=[0.1, 0.01]')
    ('experiment.betas', [0.1, 0.01])
    >>> parse_override('train.entropy_mode=literal')
    ('train.entropy_mode', 'literal')
    """
    key, sep, raw = text.partition('=')
    key = key.strip()
    if not sep or not key:
        raise ConfigError(f"Override '{text}' is not of the form key=value")
    try:
        value = tomllib.loads(f"value = {raw.strip()}")['value']
    except tomllib.TOMLDecodeError:
        value = raw.strip()
    return key, value


def _assign(data: dict[str, Any], key: str, value: Any) -> None:
    *parents, leaf = key.split('.')
    node = data
    for part in parents:
        child = node.get(part)
        if not isinstance(child, dict):
            raise ConfigError(f"Unknown config key: {key}")
        node = child
    if leaf not in node:
        raise ConfigError(f"Unknown config key: {key}")
    node[leaf] = value


def with_overrides(
    cfg: Config,
    overrides: Mapping[str, Any] | Iterable[str]
) -> Config:
    """
    Return ``cfg`` with dotted-key overrides applied.

    ``overrides`` is a mapping of dotted keys to values, or an iterable
    of ``key=value`` strings.
    """
    if isinstance(overrides, Mapping):
        items = list(overrides.items())
    else:
        items = [parse_override(text) for text in overrides]
    data = cfg.to_dict()
    for key, value in items:
        _assign(data, key, value)
        logger.debug("Config override %s = %r", key, value)
    return config_from_dict(data)


def load_config(
    path: str | Path | None = None,
    overrides: Mapping[str, Any] | Iterable[str] = ()
) -> Config:
    """
    Read a TOML config file (or start from defaults) and apply
    overrides.

    Raises
    ------
    ConfigError
        If the file is not valid TOML, lacks ``spec_version``, has
        unknown keys or invalid values.
    """
    if path is None:
        cfg = Config()
    else:
        path = Path(path)
        try:
            with path.open('rb') as handle:
                data = tomllib.load(handle)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"'{path}' is not valid TOML: {exc}") from exc
        except OSError as exc:
            raise ConfigError(f"Cannot read config '{path}': {exc}") from exc
        if 'spec_version' not in data:
            raise ConfigError(f"'{path}' does not declare spec_version")
        cfg = config_from_dict(data)
        logger.info("Loaded config '%s'", path)
    return with_overrides(cfg, overrides)
