"""
Independent ground truth for disks.

Mie series for plane-wave scattering by a homogeneous disk, per-mode
determinants of the disk interior transmission problem, and the search
window implied by the lower bound on the first transmission eigenvalue.
Nothing here depends on the forward solver or the inversion.
"""

import functools
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, List, Tuple

import numpy as np
from scipy.optimize import brentq

from .errors import ConfigurationError
from .geometry import MediumSpec
from .specfun import MAX_ORDER, bessel_j_orders, bessel_y_orders, i_power
from .utils import uniform_angles

logger = logging.getLogger(__name__)

TAIL_TOLERANCE = 1e-12
SCAN_STEP = 1e-3
ROOT_TOLERANCE = 1e-10
DEDUP_TOLERANCE = 1e-7
DEFAULT_WINDOW_FACTOR = 4.0


def _check_medium_parameters(k: float, n: float, radius: float) -> None:
    if not k > 0:
        raise ConfigurationError(f"wavenumber must be positive, got {k}")
    if not n > 0 or n == 1:
        raise ConfigurationError(f"refractive index must be positive and != 1, got {n}")
    if not radius > 0:
        raise ConfigurationError(f"radius must be positive, got {radius}")


def _orders_with_derivatives(table: np.ndarray, top: int) -> Tuple[np.ndarray, np.ndarray]:
    """Values Z_0..Z_top and derivatives from a table holding Z_0..Z_{top+1}."""
    values = table[:top + 1]
    derivs = np.empty_like(values)
    derivs[0] = -table[1]
    derivs[1:] = 0.5 * (table[:top] - table[2:top + 2])
    return values, derivs


@dataclass
class MieSolution:
    """
    Mode coefficients of the disk solution for incidence e^{ik x·d}.

    Outside: u = Σ i^ℓ [J_ℓ(kr) + b_ℓ H_ℓ(kr)] e^{iℓ(θ-θ_d)};
    inside:  u = Σ i^ℓ c_ℓ J_ℓ(k√n r) e^{iℓ(θ-θ_d)}; b_{-ℓ} = b_ℓ.
    Arrays hold ℓ = 0..L.
    """

    k: float
    n: float
    radius: float
    scattered: np.ndarray
    interior: np.ndarray
    max_condition: float = 0.0

    @property
    def order(self) -> int:
        return len(self.scattered) - 1


def mie_coefficients(k: float, n: float, radius: float) -> MieSolution:
    """Solve the 2x2 value/normal-derivative matching for every mode."""
    _check_medium_parameters(k, n, radius)
    kappa = k * math.sqrt(n)
    order = min(int(math.ceil(math.e * kappa * radius / 2.0)) + 10, MAX_ORDER - 1)
    while True:
        jk, djk = _orders_with_derivatives(bessel_j_orders(order + 1, k * radius), order)
        yk, dyk = _orders_with_derivatives(bessel_y_orders(order + 1, k * radius), order)
        jq, djq = _orders_with_derivatives(bessel_j_orders(order + 1, kappa * radius), order)
        hk, dhk = jk + 1j * yk, djk + 1j * dyk

        determinant = jk * kappa * djq - jq * k * djk
        denominator = k * jq * dhk - kappa * djq * hk
        scattered = determinant / denominator
        interior = k * (jk * dhk - hk * djk) / denominator
        if abs(scattered[-1]) < TAIL_TOLERANCE or order + 11 > MAX_ORDER:
            break
        order += 10

    condition = np.abs(hk) * np.abs(kappa * djq) + np.abs(jq) * np.abs(k * dhk)
    condition = float(np.max(condition / np.abs(denominator)))
    if condition > 1e12:
        logger.warning("Ill-conditioned Mie mode matching",
                       extra={"k": k, "n": n, "condition": condition})
    return MieSolution(k=float(k), n=float(n), radius=float(radius),
                       scattered=scattered, interior=interior, max_condition=condition)


def _mode_sum(coefficients: np.ndarray, radial: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """Σ_{ℓ=-L..L} i^ℓ c_ℓ Z_ℓ e^{iℓφ} using the ±ℓ symmetry."""
    total = coefficients[0] * radial[0]
    for ell in range(1, len(coefficients)):
        total = total + 2.0 * i_power(ell) * coefficients[ell] * radial[ell] * np.cos(ell * phi)
    return total


def mie_field(k: float, n: float, radius: float, d: float) -> Callable[[np.ndarray, np.ndarray], np.ndarray]:
    """
    Total field of the disk problem as a callable ``field(X, Y)``.

    Args:
        k: wavenumber
        n: refractive index inside the disk (centered at the origin)
        radius: disk radius
        d: incidence angle θ_d in radians
    """
    solution = mie_coefficients(k, n, radius)
    kappa = k * math.sqrt(n)
    order = solution.order

    def field_at(X, Y) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        Y = np.asarray(Y, dtype=float)
        r = np.hypot(X, Y)
        phi = np.arctan2(Y, X) - d
        out = np.zeros(r.shape, dtype=complex)
        inside = r < radius
        if np.any(inside):
            radial = bessel_j_orders(order, kappa * r[inside])
            out[inside] = _mode_sum(solution.interior, radial, phi[inside])
        outside = ~inside
        if np.any(outside):
            ro = r[outside]
            jr = bessel_j_orders(order, k * ro)
            yr = bessel_y_orders(order, k * ro)
            incident = np.exp(1j * k * ro * np.cos(phi[outside]))
            scattered = _mode_sum(solution.scattered, jr + 1j * yr, phi[outside])
            out[outside] = incident + scattered
        return out

    field_at.solution = solution
    return field_at


def _farfield_from_coefficients(k: float, scattered: np.ndarray, phi: np.ndarray) -> np.ndarray:
    prefactor = math.sqrt(2.0 / (math.pi * k)) * np.exp(-1j * math.pi / 4.0)
    total = scattered[0] * np.ones_like(phi, dtype=complex)
    for ell in range(1, len(scattered)):
        total = total + 2.0 * scattered[ell] * np.cos(ell * phi)
    return prefactor * total


def mie_farfield(k: float, n: float, radius: float, d: float, obs_angle):
    """Far-field pattern of the disk with the e^{ikr}/sqrt(r) normalization."""
    solution = mie_coefficients(k, n, radius)
    phi = np.asarray(obs_angle, dtype=float) - d
    values = _farfield_from_coefficients(k, solution.scattered, np.atleast_1d(phi))
    return complex(values[0]) if np.ndim(obs_angle) == 0 else values


def mie_farfield_matrix(k: float, n: float, radius: float, m: int, n_inc: int) -> np.ndarray:
    """Analytic far-field matrix of a disk on uniform angle sets."""
    solution = mie_coefficients(k, n, radius)
    phi = uniform_angles(m)[:, None] - uniform_angles(n_inc)[None, :]
    return _farfield_from_coefficients(k, solution.scattered, phi)


def mie_mode_farfield(k: float, n: float, radius: float) -> np.ndarray:
    """Far-field amplitude per mode ℓ = 0..L (diagonal of the disk operator)."""
    solution = mie_coefficients(k, n, radius)
    return math.sqrt(2.0 / (math.pi * k)) * np.exp(-1j * math.pi / 4.0) * solution.scattered


def transmission_determinant(ell: int, k, n: float, radius: float) -> np.ndarray:
    """
    d_ℓ(k) = det[[J_ℓ(kr), J_ℓ(k√n r)], [k J_ℓ'(kr), k√n J_ℓ'(k√n r)]].

    Real for real k and n; vectorized over ``k``.
    """
    k = np.asarray(k, dtype=float)
    ell = abs(int(ell))
    kappa = k * math.sqrt(n)
    jk, djk = _orders_with_derivatives(bessel_j_orders(ell + 1, k * radius), ell)
    jq, djq = _orders_with_derivatives(bessel_j_orders(ell + 1, kappa * radius), ell)
    return jk[ell] * kappa * djq[ell] - jq[ell] * k * djk[ell]


@dataclass
class DiskEigenvalue:
    k: float
    multiplicity: int
    modes: List[int] = field(default_factory=list)

    def __float__(self) -> float:
        return self.k


def disk_transmission_eigs(n: float, radius: float, k_lo: float, k_hi: float,
                           step: float = SCAN_STEP) -> List[DiskEigenvalue]:
    """
    Real transmission eigenvalues of a disk in (k_lo, k_hi).

    Sign changes of d_ℓ on a grid of spacing <= ``step`` are refined by
    Brent's method; ℓ > 0 roots count twice (±ℓ). Roots from different
    modes closer than 1e-7 are merged.
    """
    if not n > 0 or n == 1:
        raise ConfigurationError(f"refractive index must be positive and != 1, got {n}")
    if not radius > 0:
        raise ConfigurationError(f"radius must be positive, got {radius}")
    lo = max(float(k_lo), step)
    hi = float(k_hi)
    if hi <= lo:
        return []
    count = int(math.ceil((hi - lo) / step)) + 1
    ks = np.linspace(lo, hi, count)
    top_mode = min(int(math.ceil(hi * math.sqrt(n) * radius)) + 5, MAX_ORDER - 1)

    kappa = ks * math.sqrt(n)
    jk, djk = _orders_with_derivatives(bessel_j_orders(top_mode + 1, ks * radius), top_mode)
    jq, djq = _orders_with_derivatives(bessel_j_orders(top_mode + 1, kappa * radius), top_mode)
    table = jk * kappa * djq - jq * ks * djk

    roots: List[Tuple[float, int]] = []
    for ell in range(top_mode + 1):
        values = table[ell]
        flips = np.nonzero(values[:-1] * values[1:] < 0)[0]
        for i in flips:
            root = brentq(lambda kk: float(transmission_determinant(ell, kk, n, radius)),
                          ks[i], ks[i + 1], xtol=ROOT_TOLERANCE)
            roots.append((root, ell))

    roots.sort()
    merged: List[DiskEigenvalue] = []
    for root, ell in roots:
        weight = 1 if ell == 0 else 2
        if merged and abs(root - merged[-1].k) < DEDUP_TOLERANCE:
            merged[-1].multiplicity += weight
            merged[-1].modes.append(ell)
        else:
            merged.append(DiskEigenvalue(k=float(root), multiplicity=weight, modes=[ell]))
    return merged


@functools.lru_cache(maxsize=64)
def first_disk_eigenvalue(n: float) -> float:
    """Smallest real transmission eigenvalue of the unit disk with index n."""
    lo, hi = 0.0, 2.0
    while hi < 1e4:
        found = disk_transmission_eigs(n, 1.0, lo, hi)
        if found:
            return found[0].k
        lo, hi = hi, 2.0 * hi
    raise ConfigurationError(f"no transmission eigenvalue found for n={n}")


def dirichlet_box_eigenvalue(width: float, height: float) -> float:
    """First Dirichlet eigenvalue of -Δ on a width x height rectangle."""
    return math.pi ** 2 * (1.0 / width ** 2 + 1.0 / height ** 2)


@dataclass(frozen=True)
class SearchWindow:
    k_lo: float
    k_hi: float

    def __post_init__(self):
        if not (0 < self.k_lo < self.k_hi):
            raise ConfigurationError(f"invalid search window ({self.k_lo}, {self.k_hi})")

    def contains(self, k: float) -> bool:
        return self.k_lo <= k <= self.k_hi


def lower_bound(medium: MediumSpec) -> float:
    """
    Lower bound on the first transmission eigenvalue of ``medium``.

    max(k_{1,n}/r, sqrt(λ_1/n)) for n > 1 and max(k_{1,n}/r, sqrt(λ_1))
    for n < 1, with λ_1 taken on the bounding box (a smaller eigenvalue
    than the true one, so the bound stays valid).
    """
    geometry = medium.geometry
    r = geometry.circumradius()
    xmin, xmax, ymin, ymax = geometry.bounding_box()
    lam = dirichlet_box_eigenvalue(xmax - xmin, ymax - ymin)
    k1 = first_disk_eigenvalue(float(medium.n))
    if medium.n > 1:
        return max(k1 / r, math.sqrt(lam / medium.n))
    return max(k1 / r, math.sqrt(lam))


def bound_window(medium: MediumSpec, factor: float = DEFAULT_WINDOW_FACTOR) -> SearchWindow:
    """Search window [k_lo, factor * k_lo] from the eigenvalue lower bound."""
    if not factor > 1:
        raise ConfigurationError(f"window factor must exceed 1, got {factor}")
    k_lo = lower_bound(medium)
    logger.info("Search window from eigenvalue bound",
                extra={"medium": medium.name, "k_lo": k_lo, "k_hi": factor * k_lo})
    return SearchWindow(k_lo=k_lo, k_hi=factor * k_lo)
