"""
Experiment report files.

``emit_report`` writes, into one directory:

``runs.csv``
    One row per experiment cell; columns ``fold, real_count, beta,
    method, synth_count, classic_factor, seed, n_train_slices,
    dsc_mean, dsc_std``. ``beta`` is empty for methods without a
    generator.
``summary.csv``
    Cells grouped over folds and seeds; columns ``real_count, beta,
    method, synth_count, classic_factor, n_runs, dsc_mean, dsc_std``
    (population std of the per-cell means).
``beta_sweep.csv``
    Generator quality per (fold, real count, beta); columns ``fold,
    real_count, beta, psnr, fid, lpips, jsd, kld_real_synth,
    kld_synth_real``. Only written when generators were trained.
``dsc_curve.png``
    Mean volume DSC against the synthetic count with std bands.
``report.json``
    Provenance and the published reference targets.

Floats are written with 10 significant digits, so re-emitting a
reloaded report reproduces the CSV files byte for byte.
"""

from __future__ import annotations

import json
import logging
from pathlib import Path

import numpy as np
import pandas as pd

from dhvae.core.errors import ConfigError, ReportError
from dhvae.pipeline.experiment import (
    BETA_SWEEP_COLUMNS,
    GENERATIVE_METHODS,
    RUN_COLUMNS,
    ExperimentResults,
)
from dhvae.pipeline.targets import REFERENCE_TARGETS
from dhvae.plots.curves import CurvePlot, Series

logger = logging.getLogger(__name__)

FLOAT_FORMAT = '%.10g'
GROUP_KEYS = ['real_count', 'beta', 'method', 'synth_count',
              'classic_factor']
SUMMARY_COLUMNS = [*GROUP_KEYS, 'n_runs', 'dsc_mean', 'dsc_std']
FILES = {
    'runs': 'runs.csv',
    'summary': 'summary.csv',
    'beta_sweep': 'beta_sweep.csv',
    'curve': 'dsc_curve.png',
    'metadata': 'report.json',
}


def summarize_runs(runs: pd.DataFrame) -> pd.DataFrame:
    """Mean and population std of cell DSC over folds and seeds."""
    grouped = runs.groupby(GROUP_KEYS, dropna=False, sort=True)['dsc_mean']
    summary = grouped.agg(
        n_runs='size',
        dsc_mean='mean',
        dsc_std=lambda s: float(s.std(ddof=0)),
    ).reset_index()
    return summary[SUMMARY_COLUMNS]


def _label(method: str, beta: float, real_count: int, factor: int,
           several_counts: bool) -> str:
    label = method
    if factor > 1:
        label += f" x{factor}"
    if not np.isnan(beta):
        label += f" (beta={beta:g})"
    if several_counts:
        label += f", {real_count} real"
    return label


def curve_series(summary: pd.DataFrame) -> list[Series]:
    """
    Series of the DSC curve: one line per generative configuration,
    one flat level per non-generative method.
    """
    several_counts = summary['real_count'].nunique() > 1
    series = []
    keys = ['real_count', 'beta', 'method', 'classic_factor']
    for (real_count, beta, method, factor), rows in summary.groupby(
        keys, dropna=False, sort=True
    ):
        rows = rows.sort_values('synth_count')
        series.append(Series(
            label=_label(method, beta, real_count, factor, several_counts),
            x=rows['synth_count'].to_numpy(),
            y=rows['dsc_mean'].to_numpy(),
            std=rows['dsc_std'].to_numpy(),
            flat=method not in GENERATIVE_METHODS,
        ))
    return series


def emit_report(
    results: ExperimentResults,
    out_dir: str | Path
) -> dict[str, Path]:
    """
    Write the experiment tables, the DSC curve and the provenance.

    Parameters
    ----------
    results : ExperimentResults
        Output of the experiment; ``runs`` must not be empty.
    out_dir : str or Path
        Target directory, created if needed.

    Returns
    -------
    dict
        Written paths by kind (see :data:`FILES`).

    Raises
    ------
    ConfigError
        If there are no runs or columns are missing; nothing is
        written.
    ValueError
        If the DSC curve cannot be drawn; nothing is written.
    ReportError
        If the directory or a file cannot be written.
    """
    runs = results.runs
    if runs.empty:
        raise ConfigError("Cannot report an empty sweep")
    missing = set(RUN_COLUMNS) - set(runs.columns)
    if missing:
        raise ConfigError(f"Run table lacks columns {sorted(missing)}")
    runs = runs[RUN_COLUMNS]
    summary = summarize_runs(runs)
    out_dir = Path(out_dir)
    paths = {kind: out_dir / name for kind, name in FILES.items()}
    metadata = {
        **results.metadata,
        'methods': sorted(runs['method'].unique().tolist()),
        'run_columns': RUN_COLUMNS,
        'summary_columns': SUMMARY_COLUMNS,
        'reference_targets': REFERENCE_TARGETS,
    }
    curve = CurvePlot(
        curve_series(summary),
        title='Volume DSC versus synthetic pairs',
        xlabel='synthetic pairs added',
        ylabel='volume DSC',
    )

    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        curve.save(paths['curve'])
        runs.to_csv(paths['runs'], index=False, float_format=FLOAT_FORMAT)
        summary.to_csv(paths['summary'], index=False,
                       float_format=FLOAT_FORMAT)
        if results.beta_sweep.empty:
            del paths['beta_sweep']
        else:
            results.beta_sweep[BETA_SWEEP_COLUMNS].to_csv(
                paths['beta_sweep'], index=False, float_format=FLOAT_FORMAT
            )
        paths['metadata'].write_text(
            json.dumps(metadata, indent=2, sort_keys=True, default=str)
        )
    except OSError as exc:
        raise ReportError(
            f"Cannot write report to '{out_dir}': {exc}"
        ) from exc
    logger.info("Wrote report of %d runs to '%s'", len(runs), out_dir)
    return paths


def load_results(out_dir: str | Path) -> ExperimentResults:
    """Reload the tables of an emitted report."""
    out_dir = Path(out_dir)
    runs_path = out_dir / FILES['runs']
    if not runs_path.exists():
        raise FileNotFoundError(f"No '{FILES['runs']}' in '{out_dir}'")
    runs = pd.read_csv(runs_path)
    sweep_path = out_dir / FILES['beta_sweep']
    sweep = (
        pd.read_csv(sweep_path) if sweep_path.exists()
        else pd.DataFrame(columns=BETA_SWEEP_COLUMNS)
    )
    meta_path = out_dir / FILES['metadata']
    metadata = json.loads(meta_path.read_text()) if meta_path.exists() else {}
    provenance = {
        key: value for key, value in metadata.items()
        if key in ('config_hash', 'train_subjects', 'test_subjects')
    }
    return ExperimentResults(runs, sweep, provenance)
