"""
Tests for media, builtin shapes, grids and contrast rasterization.
"""

import math
import os
import sys

import numpy as np
import pytest
from numpy.testing import assert_allclose

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from src.errors import ConfigurationError
from src.geometry import (
    BUILTIN_MEDIA, Disk, Grid, MediumSpec, Polygon, builtin_medium, contains,
    geometry_from_dict, rasterize_contrast,
)


def test_square_membership():
    square = builtin_medium("square", 16).geometry
    assert contains(square, (0.0, 0.0))
    assert contains(square, (0.99, -0.99))
    assert not contains(square, (1.01, 0.0))
    assert not contains(square, (0.0, -1.5))


def test_builtin_media_declare_expected_corners():
    assert len(builtin_medium("square", 16).corners) == 4
    assert len(builtin_medium("hexagon", 25).corners) == 6
    assert builtin_medium("rain_small", 9).corners == [(0.0, 0.0)]
    assert builtin_medium("rain_regular", 9).corners == [(2.0, 3.0)]
    assert builtin_medium("heart", 16).corners == [(-1.0, -0.5)]
    assert builtin_medium("disk", 4).corners == []
    for name in BUILTIN_MEDIA:
        assert builtin_medium(name, 2.0).name == name


def test_rain_small_orientation():
    """The small drop hangs below its corner at the origin."""
    xmin, xmax, ymin, ymax = builtin_medium("rain_small", 9).geometry.bounding_box()
    assert -0.11 < xmin < -0.09 and 0.09 < xmax < 0.11
    assert -0.21 < ymin < -0.19 and abs(ymax) < 1e-9
    assert contains(builtin_medium("rain_small", 9).geometry, (0.0, -0.1))


def test_heart_corner_on_boundary():
    heart = builtin_medium("heart", 16).geometry
    distances = np.hypot(*(heart.boundary() - np.array([-1.0, -0.5])).T)
    assert distances.min() < 1e-12


def test_hexagon_circumradius():
    hexagon = builtin_medium("hexagon", 25).geometry
    assert_allclose(np.hypot(*hexagon.vertices.T), 2.0)
    assert_allclose(hexagon.origin_radius(), 2.0)


def test_invalid_media_rejected():
    with pytest.raises(ConfigurationError):
        builtin_medium("triangle", 4)
    with pytest.raises(ConfigurationError):
        builtin_medium("square", 1.0)
    with pytest.raises(ConfigurationError):
        builtin_medium("square", -2.0)
    with pytest.raises(ConfigurationError):
        Polygon([(0, 0), (0, 1), (1, 0)])
    with pytest.raises(ConfigurationError):
        Polygon([(0, 0), (1, 1), (1, 0), (0, 1)])


def test_geometry_from_dict():
    poly = geometry_from_dict({"kind": "polygon", "vertices": [[0, 0], [2, 0], [0, 2]]})
    assert isinstance(poly, Polygon)
    assert_allclose(poly.area(), 2.0)
    disk = geometry_from_dict({"kind": "disk", "center": [1.0, 0.0], "radius": 0.5})
    assert isinstance(disk, Disk)
    assert_allclose(disk.origin_radius(), 1.5)
    with pytest.raises(ConfigurationError):
        geometry_from_dict({"kind": "spline"})


def test_grid_cells_are_centered():
    grid = Grid.square(1.0, 40)
    xs, ys = grid.axes()
    assert_allclose(grid.hx, 0.05)
    assert_allclose(xs[0], -0.975)
    assert_allclose(ys[-1], 0.975)
    X, Y = grid.mesh()
    assert X.shape == (40, 40)
    assert_allclose(X[:, 0], xs)
    with pytest.raises(ConfigurationError):
        Grid.square(1.0, 16)


def test_grid_around_respects_cell_bound():
    geometry = builtin_medium("hexagon", 25).geometry
    grid = Grid.around(geometry, max_cell=0.05)
    assert grid.h <= 0.05 + 1e-12
    assert grid.contains_box(geometry.bounding_box())


def test_rasterized_contrast_integrates_to_area():
    medium = builtin_medium("square", 16)
    grid = Grid.square(1.5, 96)
    q = rasterize_contrast(medium, grid)
    assert_allclose(q.sum() * grid.cell_area, 15.0 * 4.0, rtol=1e-2)
    assert q.max() == pytest.approx(15.0)
    assert q[0, 0] == 0.0


def test_rasterized_disk_area_with_subsampling():
    medium = MediumSpec(Disk(radius=1.0), n=4.0)
    grid = Grid.square(1.3, 64)
    q = rasterize_contrast(medium, grid, subsamples=4)
    assert abs(q.sum() * grid.cell_area - 3.0 * math.pi) / (3.0 * math.pi) < 5e-3
    assert np.any((q > 0) & (q < 3.0))


@pytest.mark.parametrize("subsamples", [1, 4])
def test_rasterized_mass_error_is_first_order(subsamples):
    medium = MediumSpec(Disk(radius=1.0), n=4.0)
    exact = medium.contrast * math.pi
    perimeter = 2.0 * math.pi
    for resolution in (32, 64, 128, 256, 512):
        grid = Grid.square(1.5, resolution)
        q = rasterize_contrast(medium, grid, subsamples=subsamples)
        error = abs(q.sum() * grid.cell_area - exact)
        assert error <= 2.0 * medium.contrast * perimeter * grid.h, (resolution, error)


def test_rasterize_requires_enclosing_grid():
    with pytest.raises(ConfigurationError):
        rasterize_contrast(builtin_medium("square", 16), Grid.square(1.0, 64))
