"""
Named metric results with provenance.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import pandas as pd

from dhvae.core.errors import FormatError, ReportError

logger = logging.getLogger(__name__)

METRIC_COLUMNS = ['metric', 'value', 'n_real', 'n_synth', 'seed',
                  'config_hash']
FLOAT_FORMAT = '%.12g'


@dataclass
class MetricsReport:
    """
    Scalar metric values sharing one provenance.

    Parameters
    ----------
    values : dict
        Metric name to value, in insertion order.
    n_real, n_synth : int
        Sizes of the compared sets.
    seed : int
        Seed of the run that produced the values.
    config_hash : str
        Hash of the configuration of that run.
    metadata : dict, optional
        Free-form provenance (backbone identity, preprocessing,
        reference targets); written to a JSON sidecar.
    """

    values: dict[str, float]
    n_real: int
    n_synth: int
    seed: int
    config_hash: str
    metadata: dict[str, Any] = field(default_factory=dict)

    def __getitem__(self, metric: str) -> float:
        return self.values[metric]

    def merged(self, other: MetricsReport) -> MetricsReport:
        """Union of two reports; ``other`` wins on name clashes."""
        return MetricsReport(
            {**self.values, **other.values},
            max(self.n_real, other.n_real),
            max(self.n_synth, other.n_synth),
            self.seed,
            self.config_hash,
            {**self.metadata, **other.metadata},
        )

    def to_frame(self) -> pd.DataFrame:
        """One row per metric in the fixed column order."""
        rows = [
            (name, value, self.n_real, self.n_synth, self.seed,
             self.config_hash)
            for name, value in self.values.items()
        ]
        return pd.DataFrame(rows, columns=METRIC_COLUMNS)

    def write(self, path: str | Path) -> Path:
        """
        Write the CSV table and a ``.json`` metadata sidecar next to it.

        Raises
        ------
        ReportError
            If the files cannot be written.
        """
        path = Path(path)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            self.to_frame().to_csv(path, index=False,
                                   float_format=FLOAT_FORMAT)
            path.with_suffix('.json').write_text(
                json.dumps(self.metadata, indent=2, sort_keys=True,
                           default=str)
            )
        except OSError as exc:
            raise ReportError(
                f"Cannot write metrics to '{path}': {exc}"
            ) from exc
        logger.info("Wrote %d metrics to '%s'", len(self.values), path)
        return path

    @classmethod
    def read(cls, path: str | Path) -> MetricsReport:
        """
        Load a report written by :meth:`write`.

        Raises
        ------
        FormatError
            If the table holds no metric rows.
        """
        path = Path(path)
        try:
            frame = pd.read_csv(path, dtype={'config_hash': str})
        except pd.errors.EmptyDataError as exc:
            raise FormatError(f"Metrics file '{path}' is empty", 0) from exc
        if frame.empty:
            raise FormatError(
                f"Metrics file '{path}' has no rows", path.stat().st_size
            )
        sidecar = path.with_suffix('.json')
        metadata = json.loads(sidecar.read_text()) if sidecar.exists() else {}
        first = frame.iloc[0]
        return cls(
            dict(zip(frame['metric'], frame['value'].astype(float))),
            int(first['n_real']), int(first['n_synth']),
            int(first['seed']), str(first['config_hash']), metadata,
        )
