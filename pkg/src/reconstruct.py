"""
Herglotz wave synthesis and corner detection.

At a transmission eigenvalue the Herglotz wave built from the minimizing
kernel nearly vanishes at the corners (cusps) of the scatterer when the
contrast is positive and localizes there when it is negative. The
detector looks for isolated extrema of |v| and clusters them.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import ndimage
from scipy.spatial import ConvexHull, QhullError
from sklearn.cluster import DBSCAN
from sklearn.decomposition import PCA

from .errors import ConfigurationError, ContractViolation, ReconstructionError
from .geometry import Grid
from .specfun import bessel_j_signed_orders, i_power, mode_indices
from .spectral import TruncatedKernel
from .utils import uniform_angles

logger = logging.getLogger(__name__)

POINTS_PER_WAVELENGTH = 10
QUADRATURE_DIRECTIONS = 512
MODES = ("auto", "vanishing", "localizing")


@dataclass
class HerglotzField:
    """|v| normalized to max 1 on ``grid``; values are indexed [ix, iy]."""

    grid: Grid
    values: np.ndarray
    k: float
    kernel: TruncatedKernel
    scale: float = 1.0

    @property
    def magnitude(self) -> np.ndarray:
        return np.abs(self.values)

    @property
    def wavelength(self) -> float:
        return 2.0 * math.pi / self.k

    def rows(self):
        X, Y = self.grid.mesh()
        v = self.values.ravel()
        return zip(X.ravel(), Y.ravel(), v.real, v.imag, np.abs(v))


@dataclass
class CuspCluster:
    representative: Tuple[float, float]
    members: List[Tuple[float, float]]
    extremum: float

    def to_dict(self) -> dict:
        return {
            "representative": list(self.representative),
            "members": [list(p) for p in self.members],
            "extremum": self.extremum,
        }


@dataclass
class CuspParams:
    """
    Detector settings. Distances default to fractions of the wavelength λ:
    clusters merge within λ/4, isolation and nodal-line checks use λ.
    """

    tau_v: float = 0.05
    tau_l: float = 0.95
    cluster_radius: Optional[float] = None
    isolation_radius: Optional[float] = None
    comparable_ratio: float = 0.9
    nodal_min_points: int = 5
    nodal_elongation: float = 0.1
    region: Optional[Sequence[float]] = None

    def __post_init__(self):
        if not 0 < self.tau_v < 1 or not 0 < self.tau_l <= 1:
            raise ConfigurationError("thresholds must satisfy 0 < tau_v < 1 and 0 < tau_l <= 1")
        if self.region is not None and len(self.region) != 4:
            raise ConfigurationError("region must be [xmin, xmax, ymin, ymax]")


@dataclass
class CuspReport:
    k: float
    mode: str
    vanishing: List[CuspCluster] = field(default_factory=list)
    localizing: List[CuspCluster] = field(default_factory=list)
    curve_artifacts: List[Tuple[float, float]] = field(default_factory=list)
    thresholds: dict = field(default_factory=dict)
    polygon: Optional[List[Tuple[float, float]]] = None
    diagnostic: Optional[str] = None

    @property
    def corners(self) -> List[Tuple[float, float]]:
        clusters = self.localizing if self.mode == "localizing" else self.vanishing
        return [c.representative for c in clusters]

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "mode": self.mode,
            "vanishing": [c.to_dict() for c in self.vanishing],
            "localizing": [c.to_dict() for c in self.localizing],
            "curve_artifacts": [list(p) for p in self.curve_artifacts],
            "thresholds": self.thresholds,
            "polygon": None if self.polygon is None else [list(p) for p in self.polygon],
            "diagnostic": self.diagnostic,
        }


def herglotz_values(kernel: TruncatedKernel, X, Y) -> np.ndarray:
    """
    Unnormalized v_g(x) = ∫ e^{ik x·d} g(d) ds(d) by its mode expansion
    sqrt(2π) Σ a_n i^n J_n(k|x|) e^{inθ}.
    """
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    r = np.hypot(X, Y)
    theta = np.arctan2(Y, X)
    bessel = bessel_j_signed_orders(kernel.order, kernel.k * r)
    total = np.zeros(r.shape, dtype=complex)
    for row, n in enumerate(mode_indices(kernel.order)):
        total += kernel.coeffs[row] * i_power(n) * bessel[row] * np.exp(1j * n * theta)
    return math.sqrt(2.0 * math.pi) * total


def herglotz_quadrature(kernel: TruncatedKernel, X, Y,
                        directions: int = QUADRATURE_DIRECTIONS) -> np.ndarray:
    """Same wave by trapezoidal quadrature over ``directions`` plane waves."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    angles = uniform_angles(directions)
    weights = (2.0 * math.pi / directions) * kernel.evaluate(angles)
    phase = np.exp(1j * kernel.k * (np.multiply.outer(X, np.cos(angles))
                                    + np.multiply.outer(Y, np.sin(angles))))
    return phase @ weights


def herglotz_eval(kernel: TruncatedKernel, grid: Grid) -> HerglotzField:
    """
    Herglotz wave of ``kernel`` on ``grid``, scaled so max |v| = 1.

    Raises:
        ConfigurationError: grid spacing coarser than λ/10.
    """
    wavelength = 2.0 * math.pi / kernel.k
    if grid.h > wavelength / POINTS_PER_WAVELENGTH:
        raise ConfigurationError(
            f"evaluation grid too coarse: h={grid.h:.4g} > λ/{POINTS_PER_WAVELENGTH}"
            f"={wavelength / POINTS_PER_WAVELENGTH:.4g}"
        )
    X, Y = grid.mesh()
    values = herglotz_values(kernel, X, Y)
    peak = float(np.max(np.abs(values)))
    if peak == 0.0:
        raise ContractViolation("Herglotz wave vanishes on the whole grid")
    return HerglotzField(grid=grid, values=values / peak, k=kernel.k, kernel=kernel, scale=peak)


def helmholtz_residual(wave: HerglotzField) -> float:
    """‖Δ_h v + k² v‖ / ‖k² v‖ over interior nodes with the 5-point Laplacian."""
    v = wave.values
    hx, hy = wave.grid.hx, wave.grid.hy
    lap = ((v[2:, 1:-1] - 2.0 * v[1:-1, 1:-1] + v[:-2, 1:-1]) / hx ** 2
           + (v[1:-1, 2:] - 2.0 * v[1:-1, 1:-1] + v[1:-1, :-2]) / hy ** 2)
    target = wave.k ** 2 * v[1:-1, 1:-1]
    return float(np.linalg.norm(lap + target) / np.linalg.norm(target))


def _strict_extrema(magnitude: np.ndarray, minima: bool) -> np.ndarray:
    footprint = np.ones((3, 3), dtype=bool)
    footprint[1, 1] = False
    if minima:
        neighbours = ndimage.minimum_filter(magnitude, footprint=footprint, mode="nearest")
        return magnitude < neighbours
    neighbours = ndimage.maximum_filter(magnitude, footprint=footprint, mode="nearest")
    return magnitude > neighbours


def _cluster(points: np.ndarray, values: np.ndarray, radius: float,
             minima: bool) -> List[CuspCluster]:
    if len(points) == 0:
        return []
    labels = DBSCAN(eps=radius, min_samples=1).fit(points).labels_
    clusters = []
    for label in dict.fromkeys(labels):
        members = points[labels == label]
        member_values = values[labels == label]
        centroid = members.mean(axis=0)
        extremum = float(member_values.min() if minima else member_values.max())
        clusters.append(CuspCluster(
            representative=(float(centroid[0]), float(centroid[1])),
            members=[(float(x), float(y)) for x, y in members],
            extremum=extremum,
        ))
    return clusters


def _nodal_line_mask(points: np.ndarray, radius: float, min_points: int,
                     elongation: float) -> np.ndarray:
    """Candidates lying on an elongated chain of minima (a nodal curve)."""
    mask = np.zeros(len(points), dtype=bool)
    for i, p in enumerate(points):
        near = points[np.hypot(*(points - p).T) <= radius]
        if len(near) < min_points:
            continue
        ratios = PCA(n_components=2).fit(near).explained_variance_ratio_
        if ratios[1] < elongation:
            mask[i] = True
    return mask


def _isolated_maxima(points: np.ndarray, values: np.ndarray, all_points: np.ndarray,
                     all_values: np.ndarray, radius: float, ratio: float) -> np.ndarray:
    keep = np.ones(len(points), dtype=bool)
    for i, (p, value) in enumerate(zip(points, values)):
        dist = np.hypot(*(all_points - p).T)
        rivals = (dist > 0) & (dist <= radius) & (all_values >= ratio * value)
        keep[i] = not np.any(rivals)
    return keep


def _region_slices(grid: Grid, region: Optional[Sequence[float]]):
    xs, ys = grid.axes()
    if region is None:
        return slice(None), slice(None)
    xmin, xmax, ymin, ymax = region
    ix = np.nonzero((xs >= xmin) & (xs <= xmax))[0]
    iy = np.nonzero((ys >= ymin) & (ys <= ymax))[0]
    if len(ix) < 3 or len(iy) < 3:
        raise ConfigurationError(f"region {list(region)} holds fewer than 3x3 grid nodes")
    return slice(ix[0], ix[-1] + 1), slice(iy[0], iy[-1] + 1)


def detect_cusps(wave: HerglotzField, mode: str = "auto",
                 params: Optional[CuspParams] = None) -> CuspReport:
    """
    Locate isolated near-zeros (vanishing) and isolated peaks (localizing) of |v|.

    Args:
        wave: normalized Herglotz wave
        mode: "vanishing", "localizing" or "auto" (report both, corners from
            whichever produced clusters, preferring vanishing)
        params: thresholds and distances; lengths default to fractions of λ

    Returns:
        CuspReport with clusters, rejected nodal-curve points and the
        thresholds used.
    """
    if mode not in MODES:
        raise ConfigurationError(f"mode must be one of {MODES}, got {mode!r}")
    params = params or CuspParams()
    wavelength = wave.wavelength
    cluster_radius = params.cluster_radius or wavelength / 4.0
    isolation_radius = params.isolation_radius or wavelength

    sx, sy = _region_slices(wave.grid, params.region)
    magnitude = wave.magnitude[sx, sy]
    peak = float(magnitude.max())
    if peak > 0:
        magnitude = magnitude / peak
    X, Y = wave.grid.mesh()
    X, Y = X[sx, sy], Y[sx, sy]

    report = CuspReport(k=wave.k, mode=mode, thresholds={
        "tau_v": params.tau_v, "tau_l": params.tau_l, "cluster_radius": cluster_radius,
        "isolation_radius": isolation_radius, "region": params.region,
    })

    if mode in ("auto", "vanishing"):
        minima = _strict_extrema(magnitude, minima=True) & (magnitude <= params.tau_v)
        points = np.column_stack([X[minima], Y[minima]])
        values = magnitude[minima]
        nodal = _nodal_line_mask(points, isolation_radius, params.nodal_min_points,
                                 params.nodal_elongation) if len(points) else np.zeros(0, bool)
        report.curve_artifacts = [(float(x), float(y)) for x, y in points[nodal]]
        report.vanishing = _cluster(points[~nodal], values[~nodal], cluster_radius, minima=True)

    if mode in ("auto", "localizing"):
        maxima = _strict_extrema(magnitude, minima=False)
        all_points = np.column_stack([X[maxima], Y[maxima]])
        all_values = magnitude[maxima]
        strong = all_values >= params.tau_l
        points, values = all_points[strong], all_values[strong]
        isolated = _isolated_maxima(points, values, all_points, all_values,
                                    isolation_radius, params.comparable_ratio)
        report.localizing = _cluster(points[isolated], values[isolated], cluster_radius,
                                     minima=False)

    if mode == "auto":
        report.mode = "vanishing" if report.vanishing or not report.localizing else "localizing"
    if not report.corners:
        report.diagnostic = "no isolated extrema above threshold"
    logger.info("Corner detection finished", extra={
        "k": wave.k, "mode": report.mode, "vanishing": len(report.vanishing),
        "localizing": len(report.localizing), "curve_artifacts": len(report.curve_artifacts),
    })
    return report


def polygon_from_cusps(report: CuspReport) -> List[Tuple[float, float]]:
    """
    Convex hull of the detected corners, counterclockwise.

    Raises:
        ReconstructionError: fewer than three corners, or all collinear.
    """
    corners = np.asarray(report.corners, dtype=float)
    if len(corners) < 3:
        raise ReconstructionError("insufficient corners")
    try:
        hull = ConvexHull(corners)
    except QhullError:
        raise ReconstructionError("insufficient corners")
    polygon = [(float(x), float(y)) for x, y in corners[hull.vertices]]
    report.polygon = polygon
    return polygon
