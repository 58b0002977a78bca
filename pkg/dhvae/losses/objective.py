"""
Weighted global objective and per-iteration loss reports.
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from pathlib import Path
from typing import TypeVar

import pandas as pd
import torch

from dhvae.core.errors import ConfigError, NumericError

COMPONENTS = (
    'disc_disc',
    'disc_gen',
    'elbo_h',
    'feature',
    'global',
    'kinetic',
    'kl_or_entropy',
    'l1',
    'recon_image',
    'recon_mask',
)
CSV_COLUMNS = ['iteration', *COMPONENTS]
CSV_FLOAT_FORMAT = '%.17g'

Scalar = TypeVar('Scalar', float, torch.Tensor)


@dataclass(frozen=True)
class LossWeights:
    """
    Weights of the global objective.

    Only ``alpha`` is stored; ``beta`` is derived as ``1 - alpha`` so
    the two can never disagree.

    Parameters
    ----------
    alpha : float, optional
        Weight of the Hamiltonian ELBO, in [0, 1]. Default is 0.99.
    warmup_iters : int, optional
        Iterations before the discriminative term enters the objective
        and the discriminator starts training. Default is 1000.

    Examples
    --------
    >>> LossWeights.from_beta(0.1).alpha
    0.9
    """

    alpha: float = 0.99
    warmup_iters: int = 1000

    def __post_init__(self) -> None:
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.warmup_iters < 0:
            raise ConfigError(
                f"warmup_iters must be >= 0, got {self.warmup_iters}"
            )

    @property
    def beta(self) -> float:
        """Weight of the regularizers."""
        return 1.0 - self.alpha

    @classmethod
    def from_beta(cls, beta: float, warmup_iters: int = 1000) -> LossWeights:
        """Weights with regularizer weight ``beta``."""
        return cls(alpha=1.0 - beta, warmup_iters=warmup_iters)

    def adversarial_active(self, iteration: int) -> bool:
        """Whether iteration ``iteration`` is past the warm-up."""
        return iteration >= self.warmup_iters


def global_loss(
    components: Mapping[str, Scalar],
    w: LossWeights,
    iteration: int
) -> Scalar:
    """
    Combine loss components into the generator objective.

    Before the warm-up ends the result is
    ``alpha * elbo_h + beta * (feature + l1)``; afterwards ``disc_gen``
    joins the regularizer sum.

    Parameters
    ----------
    components : mapping
        Needs ``elbo_h``, ``feature``, ``l1`` and ``disc_gen``; floats
        or tensors.
    w : LossWeights
        Weights and warm-up length.
    iteration : int
        Current iteration (0-based).

    Examples
    --------
    >>> parts = {'elbo_h': 2.0, 'disc_gen': 0.5, 'feature': 0.2, 'l1': 0.1}
    >>> round(global_loss(parts, LossWeights(0.99, warmup_iters=0), 5), 6)
    1.988
    """
    regularizer = components['feature'] + components['l1']
    if w.adversarial_active(iteration):
        regularizer = regularizer + components['disc_gen']
    return w.alpha * components['elbo_h'] + w.beta * regularizer


@dataclass(frozen=True)
class LossReport:
    """
    Finite loss components of one training iteration.

    ``values['global']`` is always recomputed from the other components
    with :func:`global_loss`, so every report satisfies the
    recomputation identity by construction.
    """

    iteration: int
    values: dict[str, float] = field(default_factory=dict)

    @classmethod
    def from_components(
        cls,
        components: Mapping[str, float | torch.Tensor],
        w: LossWeights,
        iteration: int
    ) -> LossReport:
        """
        Build a report from float or tensor components.

        Raises
        ------
        NumericError
            If a component is missing or non-finite.
        """
        values = {
            name: float(components.get(name, 0.0))
            for name in COMPONENTS if name != 'global'
        }
        values['global'] = global_loss(values, w, iteration)
        bad = [k for k, v in values.items() if not math.isfinite(v)]
        if bad:
            raise NumericError(
                f"Non-finite loss at iteration {iteration}",
                stage=bad[0],
                diagnostics=values,
            )
        return cls(iteration, values)

    def __getitem__(self, name: str) -> float:
        return self.values[name]

    def as_row(self) -> dict[str, float | int]:
        """Row in CSV column order."""
        return {'iteration': self.iteration,
                **{k: self.values[k] for k in COMPONENTS}}


def reports_frame(reports: Iterable[LossReport]) -> pd.DataFrame:
    """Reports as a DataFrame with the fixed column order."""
    return pd.DataFrame([r.as_row() for r in reports], columns=CSV_COLUMNS)


def append_loss_csv(reports: Iterable[LossReport], path: str | Path) -> Path:
    """
    Append reports to a CSV file, writing the header for a new file.

    Floats are written with 17 significant digits so a reloaded report
    reproduces the logged values exactly.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    new_file = not path.exists() or path.stat().st_size == 0
    reports_frame(reports).to_csv(
        path, mode='a', header=new_file, index=False,
        float_format=CSV_FLOAT_FORMAT
    )
    return path


def read_loss_csv(path: str | Path) -> pd.DataFrame:
    """Load a loss CSV written by :func:`append_loss_csv`."""
    frame = pd.read_csv(path, float_precision='round_trip')
    missing = set(CSV_COLUMNS) - set(frame.columns)
    if missing:
        raise ConfigError(f"'{path}' lacks loss columns {sorted(missing)}")
    return frame[CSV_COLUMNS]
