"""
Unit tests for CurvePlot and the plot helpers.
"""

import numpy as np
import pytest

from dhvae.plots import CurvePlot, MatplotlibPlot, Series, get_plot_colors


def _series():
    return [
        Series('dhvae', np.array([0, 100, 500]), np.array([0.6, 0.65, 0.7]),
               std=np.array([0.02, 0.03, 0.01])),
        Series('reference', np.array([0]), np.array([0.6]),
               std=np.array([0.02]), flat=True),
    ]


def test_curve_plot_basic():
    """Test curve plot creation."""
    plot = CurvePlot(_series(), title='DSC', xlabel='n', ylabel='dsc')

    assert plot.title == 'DSC'
    assert plot.fig is not None
    assert plot.axes is not None
    assert len(plot.axes.get_lines()) == 2
    assert plot.plot_colors == get_plot_colors(2)


def test_curve_plot_flat_level_spans_range():
    """Test a flat series is drawn across the x-range of the curves."""
    plot = CurvePlot(_series())
    level = plot.axes.get_lines()[1]

    np.testing.assert_array_equal(level.get_xdata(), [0.0, 500.0])
    np.testing.assert_array_equal(level.get_ydata(), [0.6, 0.6])
    assert level.get_linestyle() == '--'


def test_curve_plot_only_flat_series():
    """Test a plot of flat levels alone."""
    plot = CurvePlot([Series('reference', np.array([0]), np.array([0.5]),
                             flat=True)])
    assert plot.axes.get_lines()[0].get_xdata().tolist() == [0.0, 1.0]


def test_curve_plot_invalid_data():
    """Test error handling for empty and mismatched series."""
    with pytest.raises(ValueError):
        CurvePlot([])
    with pytest.raises(ValueError):
        CurvePlot([Series('bad', np.array([0, 1]), np.array([0.5]))])
    with pytest.raises(ValueError):
        CurvePlot([Series('bad', np.array([0]), np.array([0.5]),
                          std=np.array([0.1, 0.2]))])


def test_curve_plot_save(tmp_path):
    """Test saving writes a PNG and releases the figure."""
    path = CurvePlot(_series()).save(tmp_path / 'curve.png')

    assert path.exists()
    assert path.read_bytes()[:8] == b'\x89PNG\r\n\x1a\n'


def test_save_before_render():
    """Test saving a plot that never rendered."""
    class Unrendered(MatplotlibPlot):
        def _render(self):
            pass

    with pytest.raises(RuntimeError):
        Unrendered().save('never.png')


def test_get_plot_colors():
    """Test the color cycle."""
    assert get_plot_colors(2) == ['#1f77b4', '#ff7f0e']
    assert len(get_plot_colors(12)) == 12
    assert get_plot_colors(11)[10] == get_plot_colors(1)[0]
    assert len(get_plot_colors()) == 10
