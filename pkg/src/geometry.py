"""
Scatterer supports, media and sampling grids.

Geometries answer vectorized point-membership queries with the even-odd
ray-crossing rule, and every builtin medium reproduces one of the reference
shapes (rain drops, heart, square, hexagon, disk) together with the
corner points a reconstruction should recover.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np

from .errors import ConfigurationError

logger = logging.getLogger(__name__)

MIN_CURVE_SAMPLES = 512
DEFAULT_CURVE_SAMPLES = 1024
MIN_GRID_RESOLUTION = 32

Point = Tuple[float, float]
Box = Tuple[float, float, float, float]


def _points_array(points) -> np.ndarray:
    arr = np.asarray(points, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(1, 2)
    if arr.shape[-1] != 2:
        raise ConfigurationError(f"points must have 2 coordinates, got shape {arr.shape}")
    return arr


def _even_odd(polyline: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Even-odd crossing test of ``points`` (P, 2) against a closed polyline."""
    px, py = points[:, 0], points[:, 1]
    inside = np.zeros(len(points), dtype=bool)
    start = polyline
    end = np.roll(polyline, -1, axis=0)
    for (x1, y1), (x2, y2) in zip(start, end):
        if y1 == y2:
            continue
        straddles = (y1 > py) != (y2 > py)
        x_cross = x1 + (py - y1) * (x2 - x1) / (y2 - y1)
        inside ^= straddles & (px < x_cross)
    return inside


def _signed_area(vertices: np.ndarray) -> float:
    x, y = vertices[:, 0], vertices[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def _segments_cross(p1, p2, q1, q2) -> bool:
    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    d1, d2 = orient(q1, q2, p1), orient(q1, q2, p2)
    d3, d4 = orient(p1, p2, q1), orient(p1, p2, q2)
    return (d1 * d2 < 0) and (d3 * d4 < 0)


class Geometry:
    """Common interface of all scatterer supports."""

    kind = "geometry"
    name = "custom"

    def contains(self, points) -> np.ndarray:
        raise NotImplementedError

    def bounding_box(self) -> Box:
        raise NotImplementedError

    def boundary(self) -> np.ndarray:
        """Closed polyline sampling of the boundary."""
        raise NotImplementedError

    def circumradius(self) -> float:
        """Radius of a ball around the bounding-box center that contains D."""
        xmin, xmax, ymin, ymax = self.bounding_box()
        center = np.array([(xmin + xmax) / 2.0, (ymin + ymax) / 2.0])
        return float(np.max(np.linalg.norm(self.boundary() - center, axis=1)))

    def origin_radius(self) -> float:
        """Radius of the smallest origin-centered ball containing D."""
        return float(np.max(np.linalg.norm(self.boundary(), axis=1)))

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass
class Polygon(Geometry):
    """Simple counterclockwise polygon."""

    vertices: np.ndarray
    name: str = "polygon"
    kind = "polygon"

    def __post_init__(self):
        self.vertices = _points_array(self.vertices)
        if len(self.vertices) < 3:
            raise ConfigurationError("polygon needs at least 3 vertices")
        if _signed_area(self.vertices) <= 0:
            raise ConfigurationError("polygon vertices must be counterclockwise")
        n = len(self.vertices)
        for i in range(n):
            for j in range(i + 2, n):
                if i == 0 and j == n - 1:
                    continue
                if _segments_cross(self.vertices[i], self.vertices[(i + 1) % n],
                                   self.vertices[j], self.vertices[(j + 1) % n]):
                    raise ConfigurationError("polygon edges intersect")

    def contains(self, points) -> np.ndarray:
        return _even_odd(self.vertices, _points_array(points))

    def bounding_box(self) -> Box:
        mins, maxs = self.vertices.min(axis=0), self.vertices.max(axis=0)
        return float(mins[0]), float(maxs[0]), float(mins[1]), float(maxs[1])

    def boundary(self) -> np.ndarray:
        return np.vstack([self.vertices, self.vertices[:1]])

    def area(self) -> float:
        return _signed_area(self.vertices)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "vertices": self.vertices.tolist()}


@dataclass
class ParametricCurve(Geometry):
    """Closed polyline sampled from a named parametric family."""

    samples: np.ndarray
    family: str = "custom"
    parameters: dict = field(default_factory=dict)
    rotation_deg: float = 0.0
    name: str = "curve"
    kind = "parametric"

    def __post_init__(self):
        self.samples = _points_array(self.samples)
        if len(self.samples) < MIN_CURVE_SAMPLES:
            raise ConfigurationError(
                f"parametric curve needs at least {MIN_CURVE_SAMPLES} samples"
            )
        if not np.allclose(self.samples[0], self.samples[-1], atol=1e-12):
            raise ConfigurationError("parametric polyline must be closed")

    def contains(self, points) -> np.ndarray:
        return _even_odd(self.samples[:-1], _points_array(points))

    def bounding_box(self) -> Box:
        mins, maxs = self.samples.min(axis=0), self.samples.max(axis=0)
        return float(mins[0]), float(maxs[0]), float(mins[1]), float(maxs[1])

    def boundary(self) -> np.ndarray:
        return self.samples

    def area(self) -> float:
        return abs(_signed_area(self.samples[:-1]))

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "family": self.family,
            "parameters": dict(self.parameters),
            "rotation_deg": self.rotation_deg,
        }


@dataclass
class Disk(Geometry):
    center: Tuple[float, float] = (0.0, 0.0)
    radius: float = 1.0
    name: str = "disk"
    kind = "disk"

    def __post_init__(self):
        if not self.radius > 0:
            raise ConfigurationError("disk radius must be positive")
        self.center = (float(self.center[0]), float(self.center[1]))

    def contains(self, points) -> np.ndarray:
        pts = _points_array(points)
        return np.hypot(pts[:, 0] - self.center[0], pts[:, 1] - self.center[1]) < self.radius

    def bounding_box(self) -> Box:
        cx, cy = self.center
        r = self.radius
        return cx - r, cx + r, cy - r, cy + r

    def boundary(self, samples: int = DEFAULT_CURVE_SAMPLES) -> np.ndarray:
        t = np.linspace(0.0, 2.0 * np.pi, samples + 1)
        pts = np.column_stack([self.center[0] + self.radius * np.cos(t),
                               self.center[1] + self.radius * np.sin(t)])
        pts[-1] = pts[0]
        return pts

    def circumradius(self) -> float:
        return self.radius

    def origin_radius(self) -> float:
        return float(np.hypot(*self.center) + self.radius)

    def area(self) -> float:
        return math.pi * self.radius ** 2

    def to_dict(self) -> dict:
        return {"kind": self.kind, "center": list(self.center), "radius": self.radius}


@dataclass
class MediumSpec:
    """Support D plus a constant refractive index n inside it."""

    geometry: Geometry
    n: float
    corners: List[Point] = field(default_factory=list)
    name: str = "custom"

    def __post_init__(self):
        if not (self.n > 0):
            raise ConfigurationError(f"refractive index must be positive, got {self.n}")
        if self.n == 1:
            raise ConfigurationError("refractive index n = 1 gives no scatterer")

    @property
    def contrast(self) -> float:
        return self.n - 1.0

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "n": self.n,
            "geometry": self.geometry.to_dict(),
            "corners": [list(c) for c in self.corners],
        }


@dataclass
class Grid:
    """Cell-centered uniform grid over a bounding box."""

    xmin: float
    xmax: float
    ymin: float
    ymax: float
    resolution: int

    def __post_init__(self):
        if not (self.xmax > self.xmin and self.ymax > self.ymin):
            raise ConfigurationError("grid box must have positive extent")
        if self.resolution < MIN_GRID_RESOLUTION:
            raise ConfigurationError(
                f"grid resolution must be >= {MIN_GRID_RESOLUTION}, got {self.resolution}"
            )

    @classmethod
    def square(cls, half_width: float, resolution: int, center: Point = (0.0, 0.0)) -> "Grid":
        cx, cy = center
        return cls(cx - half_width, cx + half_width, cy - half_width, cy + half_width, resolution)

    @classmethod
    def from_box(cls, box: Sequence[float], resolution: int) -> "Grid":
        xmin, xmax, ymin, ymax = (float(v) for v in box)
        return cls(xmin, xmax, ymin, ymax, int(resolution))

    @classmethod
    def around(cls, geometry: Geometry, max_cell: float, margin_cells: int = 3,
               min_resolution: int = 64) -> "Grid":
        """Square grid enclosing ``geometry`` with cell size at most ``max_cell``."""
        xmin, xmax, ymin, ymax = geometry.bounding_box()
        half = 0.5 * max(xmax - xmin, ymax - ymin)
        center = (0.5 * (xmin + xmax), 0.5 * (ymin + ymax))
        resolution = max(min_resolution,
                         int(math.ceil(2.0 * half / max_cell)) + 2 * margin_cells + 1)
        h = 2.0 * half / (resolution - 2 * margin_cells - 1)
        return cls.square(0.5 * resolution * h, resolution, center)

    @property
    def hx(self) -> float:
        return (self.xmax - self.xmin) / self.resolution

    @property
    def hy(self) -> float:
        return (self.ymax - self.ymin) / self.resolution

    @property
    def h(self) -> float:
        return max(self.hx, self.hy)

    @property
    def cell_area(self) -> float:
        return self.hx * self.hy

    def axes(self) -> Tuple[np.ndarray, np.ndarray]:
        i = np.arange(self.resolution) + 0.5
        return self.xmin + i * self.hx, self.ymin + i * self.hy

    def mesh(self) -> Tuple[np.ndarray, np.ndarray]:
        """Cell-center coordinates, indexed [ix, iy]."""
        xs, ys = self.axes()
        return np.meshgrid(xs, ys, indexing="ij")

    def points(self) -> np.ndarray:
        X, Y = self.mesh()
        return np.column_stack([X.ravel(), Y.ravel()])

    def contains_box(self, box: Box, margin_cells: int = 2) -> bool:
        xmin, xmax, ymin, ymax = box
        return (xmin - self.xmin >= margin_cells * self.hx
                and self.xmax - xmax >= margin_cells * self.hx
                and ymin - self.ymin >= margin_cells * self.hy
                and self.ymax - ymax >= margin_cells * self.hy)

    def to_dict(self) -> dict:
        return {"box": [self.xmin, self.xmax, self.ymin, self.ymax], "resolution": self.resolution}


def contains(geometry: Geometry, p) -> bool:
    """True iff point ``p`` lies strictly inside ``geometry`` (even-odd rule)."""
    return bool(geometry.contains(_points_array(p))[0])


def _curve(fn, samples: int = DEFAULT_CURVE_SAMPLES) -> np.ndarray:
    t = np.linspace(0.0, 2.0 * np.pi, samples + 1)
    pts = np.column_stack(fn(t))
    pts[-1] = pts[0]
    return pts


def _rotate(points: np.ndarray, degrees: float) -> np.ndarray:
    a = math.radians(degrees)
    rot = np.array([[math.cos(a), -math.sin(a)], [math.sin(a), math.cos(a)]])
    return points @ rot.T


def _rain_small() -> ParametricCurve:
    pts = _curve(lambda t: (np.sin(t / 2.0) / 5.0, -np.sin(t) / 10.0))
    # the corner (t = 0) sits at the origin, so the rotation keeps it fixed
    pts = _rotate(pts, 270.0)
    pts[-1] = pts[0]
    return ParametricCurve(pts, family="rain_drop",
                           parameters={"scale_x": 0.2, "scale_y": 0.1},
                           rotation_deg=270.0, name="rain_small")


def _rain_regular() -> ParametricCurve:
    pts = _curve(lambda t: (np.sin(t / 2.0) + 2.0, -0.5 * np.sin(t) + 3.0))
    return ParametricCurve(pts, family="rain_drop",
                           parameters={"scale_x": 1.0, "scale_y": 0.5, "shift": [2.0, 3.0]},
                           name="rain_regular")


def _heart() -> ParametricCurve:
    def fn(t):
        envelope = (1.0 - np.cos(t)) / 4.0
        return (envelope * (1.5 * np.sin(t) - 0.5 * np.sin(2.0 * t)) - 1.0,
                envelope * (np.cos(t) - 0.5 * np.cos(2.0 * t)) - 0.5)

    return ParametricCurve(_curve(fn), family="heart", name="heart")


def _regular_polygon(sides: int, circumradius: float, name: str,
                     phase: float = 0.0) -> Polygon:
    angles = phase + 2.0 * np.pi * np.arange(sides) / sides
    return Polygon(np.column_stack([circumradius * np.cos(angles),
                                    circumradius * np.sin(angles)]), name=name)


BUILTIN_MEDIA = ("rain_small", "rain_regular", "heart", "square", "hexagon", "disk")


def builtin_medium(name: str, n: float) -> MediumSpec:
    """
    Reference media with their declared corner points.

    Args:
        name: one of rain_small, rain_regular, heart, square, hexagon, disk
        n: constant refractive index inside the support

    Raises:
        ConfigurationError: unknown name or invalid n.
    """
    if name == "rain_small":
        geometry, corners = _rain_small(), [(0.0, 0.0)]
    elif name == "rain_regular":
        geometry, corners = _rain_regular(), [(2.0, 3.0)]
    elif name == "heart":
        geometry, corners = _heart(), [(-1.0, -0.5)]
    elif name == "square":
        geometry = Polygon([(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)], name="square")
        corners = [tuple(v) for v in geometry.vertices.tolist()]
    elif name == "hexagon":
        geometry = _regular_polygon(6, 2.0, "hexagon")
        corners = [tuple(v) for v in geometry.vertices.tolist()]
    elif name == "disk":
        geometry, corners = Disk(name="disk"), []
    else:
        raise ConfigurationError(
            f"unknown builtin medium '{name}'; choose from {', '.join(BUILTIN_MEDIA)}"
        )
    return MediumSpec(geometry=geometry, n=float(n), corners=corners, name=name)


def geometry_from_dict(data: dict) -> Geometry:
    """Explicit geometry from a config entry (polygon vertices or disk)."""
    kind = data.get("kind")
    if kind == "polygon":
        return Polygon(data["vertices"], name=data.get("name", "polygon"))
    if kind == "disk":
        return Disk(center=tuple(data.get("center", (0.0, 0.0))),
                    radius=float(data.get("radius", 1.0)))
    raise ConfigurationError(f"unsupported explicit geometry kind '{kind}'")


def _boundary_cells(inside: np.ndarray) -> np.ndarray:
    """Cells whose 8-neighbourhood mixes inside and outside centers."""
    padded = np.pad(inside, 1, mode="edge")
    mixed = np.zeros_like(inside)
    rows, cols = inside.shape
    for dx in (-1, 0, 1):
        for dy in (-1, 0, 1):
            shifted = padded[1 + dx:1 + dx + rows, 1 + dy:1 + dy + cols]
            mixed |= shifted != inside
    return mixed


def rasterize_contrast(medium: MediumSpec, grid: Grid, subsamples: int = 4) -> np.ndarray:
    """
    Sample q = n - 1 at the grid cells, indexed [ix, iy].

    Cells straddling the boundary get the inside fraction of a
    ``subsamples`` x ``subsamples`` sub-grid (``subsamples=1`` keeps the
    center value).

    Raises:
        ConfigurationError: grid does not contain the geometry with a
            two-cell margin.
    """
    if not grid.contains_box(medium.geometry.bounding_box()):
        raise ConfigurationError(
            f"grid {grid.to_dict()['box']} does not contain geometry "
            f"{medium.geometry.bounding_box()} with a 2-cell margin"
        )
    X, Y = grid.mesh()
    inside = medium.geometry.contains(np.column_stack([X.ravel(), Y.ravel()])).reshape(X.shape)
    fraction = inside.astype(float)

    if subsamples > 1:
        edge = _boundary_cells(inside)
        if np.any(edge):
            offsets = (np.arange(subsamples) + 0.5) / subsamples - 0.5
            ox, oy = np.meshgrid(offsets * grid.hx, offsets * grid.hy, indexing="ij")
            cx, cy = X[edge], Y[edge]
            sub = np.column_stack([(cx[:, None] + ox.ravel()[None, :]).ravel(),
                                   (cy[:, None] + oy.ravel()[None, :]).ravel()])
            hits = medium.geometry.contains(sub).reshape(len(cx), -1)
            fraction[edge] = hits.mean(axis=1)

    logger.debug("Rasterized contrast", extra={"medium": medium.name,
                                                "cells_inside": int(inside.sum())})
    return medium.contrast * fraction
