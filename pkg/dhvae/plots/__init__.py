"""
Report figures.
"""

from dhvae.plots.backend import MatplotlibPlot
from dhvae.plots.colors import get_plot_colors
from dhvae.plots.curves import CurvePlot, Series

__all__ = [
    'CurvePlot',
    'MatplotlibPlot',
    'Series',
    'get_plot_colors',
]
