from __future__ import annotations

"""
Color helpers for report figures.
"""

from itertools import cycle, islice

DEFAULT_COLORS = [
    '#1f77b4', '#ff7f0e', '#2ca02c', '#d62728', '#9467bd',
    '#8c564b', '#e377c2', '#7f7f7f', '#bcbd22', '#17becf'
]


def get_plot_colors(n_colors: int | None = None) -> list[str]:
    """
    Get a list of colors suitable for multi-series plots.

    Parameters
    ----------
    n_colors : int, optional
        Number of colors needed. If None, returns the default cycle.
        Otherwise cycles through the defaults to reach the requested
        number.

    Returns
    -------
    List[str]
        Hex color strings.

    Examples
    --------
    >>> get_plot_colors(2)
    ['#1f77b4', '#ff7f0e']
    >>> len(get_plot_colors(12))
    12
    """
    if n_colors is None:
        return list(DEFAULT_COLORS)
    return list(islice(cycle(DEFAULT_COLORS), n_colors))
