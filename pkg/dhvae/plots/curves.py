from __future__ import annotations

"""
Curve plots with standard-deviation bands.

This module provides the line plot used for DSC versus
synthetic-count figures: one line per series, an optional shaded
mean +/- std band, and flat reference levels drawn as dashed lines.
"""

from dataclasses import dataclass

import numpy as np
from matplotlib.axes import Axes

from dhvae.plots.backend import MatplotlibPlot
from dhvae.plots.colors import get_plot_colors


@dataclass(frozen=True)
class Series:
    """
    One curve.

    Attributes
    ----------
    label : str
        Legend entry.
    x, y : np.ndarray
        Abscissae and means.
    std : np.ndarray or None
        Half-width of the band around ``y``.
    flat : bool
        Draw as a horizontal dashed level at ``y[0]`` spanning the
        x-range of the plot.
    """

    label: str
    x: np.ndarray
    y: np.ndarray
    std: np.ndarray | None = None
    flat: bool = False


class CurvePlot(MatplotlibPlot):
    """
    Line plot of several series with shaded bands.

    Parameters
    ----------
    series : list of Series
        The curves, drawn in order.
    title : str, optional
        Title of the plot. Default is ''.
    xlabel : str, optional
        Label for the x-axis. Default is 'X-axis'.
    ylabel : str, optional
        Label for the y-axis. Default is 'Y-axis'.
    figsize : tuple, optional
        Figure size in inches (width, height). Default is (8, 5).
    grid : bool, optional
        Whether to show grid lines. Default is True.
    band_alpha : float, optional
        Opacity of the std bands. Default is 0.2.

    Raises
    ------
    ValueError
        If there are no series, or a series has mismatched lengths.

    Examples
    --------
    >>> plot = CurvePlot([Series('dhvae', np.array([0, 500]),
    ...                          np.array([0.6, 0.7]))])
    >>> plot.save('curve.png')  # doctest: +SKIP
    """

    def __init__(
        self,
        series: list[Series],
        title: str = '',
        xlabel: str = 'X-axis',
        ylabel: str = 'Y-axis',
        figsize: tuple = (8, 5),
        grid: bool = True,
        band_alpha: float = 0.2
    ) -> None:
        super().__init__(title=title, figsize=figsize)
        if not series:
            raise ValueError("CurvePlot needs at least one series")
        for item in series:
            if len(item.x) != len(item.y) or (
                item.std is not None and len(item.std) != len(item.y)
            ):
                raise ValueError(
                    f"Series '{item.label}' has mismatched lengths"
                )
        self.series = series
        self.xlabel = xlabel
        self.ylabel = ylabel
        self.grid_enabled = grid
        self.band_alpha = band_alpha
        self.plot_colors = get_plot_colors(len(series))

        self._render()

    def _x_range(self) -> tuple[float, float]:
        xs = np.concatenate([
            np.asarray(s.x, dtype=float) for s in self.series if not s.flat
        ] or [np.zeros(1)])
        return float(xs.min()), float(max(xs.max(), xs.min() + 1.0))

    def _render(self) -> None:
        """Render the curves."""
        self.fig, ax = self._create_figure()
        self.axes = ax
        low, high = self._x_range()

        for item, color in zip(self.series, self.plot_colors):
            x = np.asarray(item.x, dtype=float)
            y = np.asarray(item.y, dtype=float)
            if item.flat:
                x = np.array([low, high])
                y = np.full(2, y[0])
            ax.plot(
                x, y,
                color=color,
                linewidth=2,
                linestyle='--' if item.flat else '-',
                marker=None if item.flat else 'o',
                label=item.label
            )
            if item.std is not None:
                std = np.asarray(item.std, dtype=float)
                if item.flat:
                    std = np.full(2, std[0])
                ax.fill_between(
                    x, y - std, y + std,
                    color=color,
                    alpha=self.band_alpha,
                    linewidth=0
                )

        self._style_axes(ax)

    def _style_axes(self, ax: Axes) -> None:
        """
        Apply styling to the axes.

        Parameters
        ----------
        ax : Axes
            The axes to style.
        """
        ax.set_title(self.title, fontweight='bold', pad=20)
        ax.set_ylabel(self.ylabel)
        ax.set_xlabel(self.xlabel)
        ax.grid(
            self.grid_enabled,
            alpha=0.3,
            linestyle='--',
            color='gray'
        )
        for spine in ax.spines.values():
            spine.set_linewidth(1.2)
        ax.legend(frameon=True, fancybox=True)
        self.fig.tight_layout()
