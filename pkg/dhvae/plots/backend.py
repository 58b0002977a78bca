from __future__ import annotations

"""
Matplotlib backend for report figures.

This module provides the base class of all report plots, handling
figure/axes creation, saving and closing.
"""

from abc import ABC, abstractmethod
from pathlib import Path

import matplotlib.pyplot as plt
from matplotlib.axes import Axes
from matplotlib.figure import Figure

from dhvae.core.errors import ReportError


class MatplotlibPlot(ABC):
    """
    Abstract base class for matplotlib report plots.

    Parameters
    ----------
    title : str, optional
        The title of the plot. Default is empty string.
    figsize : tuple, optional
        The size of the figure in inches (width, height).
        Default is (8, 5).

    Attributes
    ----------
    fig : Figure or None
        The matplotlib Figure object.
    axes : Axes or None
        The matplotlib Axes object.
    """

    def __init__(
        self,
        title: str = '',
        figsize: tuple = (8, 5)
    ) -> None:
        self.title = title
        self.figsize = figsize
        self.fig: Figure | None = None
        self.axes: Axes | None = None

    def save(
        self,
        filename: str | Path,
        dpi: int = 150,
        bbox_inches: str = 'tight',
        **kwargs
    ) -> Path:
        """
        Save the plot to a file and release the figure.

        Parameters
        ----------
        filename : str or Path
            The output filename. The file format is inferred from
            the extension (e.g., .png, .pdf, .svg).
        dpi : int, optional
            The resolution in dots per inch. Default is 150.
        bbox_inches : str, optional
            The bounding box adjustment. Default is 'tight'.
        **kwargs
            Additional matplotlib savefig parameters.

        Raises
        ------
        RuntimeError
            If the plot has not been rendered yet.
        ReportError
            If the file cannot be written.
        """
        if self.fig is None:
            raise RuntimeError(
                "Plot has not been rendered yet. "
                "Call _render() first or check initialization."
            )
        path = Path(filename)
        if path.suffix.lower() == '.png':
            # no version stamp, so reruns write identical bytes
            kwargs.setdefault('metadata', {'Software': None})
        try:
            self.fig.savefig(
                path,
                dpi=dpi,
                bbox_inches=bbox_inches,
                **kwargs
            )
        except OSError as exc:
            raise ReportError(f"Cannot write figure '{path}': {exc}") from exc
        finally:
            self.close()
        return path

    def close(self) -> None:
        """Release the figure."""
        if self.fig is not None:
            plt.close(self.fig)

    @abstractmethod
    def _render(self) -> None:
        """
        Render the plot.

        This method must be implemented by concrete plot classes
        to create the actual visualization.
        """

    def _create_figure(self, **kwargs) -> tuple[Figure, Axes]:
        """
        Create a matplotlib figure with one axes.

        Returns
        -------
        fig : Figure
            The matplotlib Figure object.
        axes : Axes
            The matplotlib Axes object.
        """
        fig, axes = plt.subplots(figsize=self.figsize, **kwargs)
        return fig, axes
