"""
Spectral detection of transmission eigenvalues from far-field data.

For each wavenumber the far-field operator is restricted to trigonometric
kernels of degree <= N and the smallest singular value of the restriction
is taken as the indicator. Transmission eigenvalues show up as sharp dips
of that indicator along the wavenumber axis; the right singular vector at
a dip is the Herglotz kernel handed to the reconstruction stage.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg, optimize

from .errors import ConfigurationError, ContractViolation
from .forward import FarFieldMatrix
from .specfun import bessel_j_orders, mode_indices

logger = logging.getLogger(__name__)

DEFAULT_DIP_THRESHOLD = 0.1
DEFAULT_ORDER_MARGIN = 5
NORM_TOLERANCE = 1e-10
WEIGHTINGS = ("kernel", "herglotz")
DEFAULT_WEIGHTING = "herglotz"
SIDES = ("incident", "observation")
GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass
class TruncatedKernel:
    """
    g_N(θ) = Σ_{|n|<=N} a_n e^{inθ} / sqrt(2π) with ‖a‖₂ = 1.

    ``coeffs`` is stored in mode order -N..N.
    """

    k: float
    order: int
    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=complex)
        if self.coeffs.shape != (2 * self.order + 1,):
            raise ContractViolation(
                f"kernel of order {self.order} needs {2 * self.order + 1} coefficients, "
                f"got {self.coeffs.shape}"
            )
        norm = float(np.linalg.norm(self.coeffs))
        if abs(norm - 1.0) > NORM_TOLERANCE:
            raise ContractViolation(f"kernel coefficients must have unit norm, got {norm:.3e}")

    @property
    def modes(self) -> np.ndarray:
        return mode_indices(self.order)

    def evaluate(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        basis = np.exp(1j * np.multiply.outer(theta, self.modes)) / math.sqrt(2.0 * math.pi)
        return basis @ self.coeffs

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "order": self.order,
            "coeffs": [[c.real, c.imag] for c in self.coeffs],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TruncatedKernel":
        coeffs = np.array([complex(re, im) for re, im in data["coeffs"]])
        return cls(k=float(data["k"]), order=int(data["order"]), coeffs=coeffs)


class IndicatorValue(NamedTuple):
    sigma: float
    kernel: TruncatedKernel
    degenerate: bool = False


@dataclass
class IndicatorCurve:
    """σ(k) sampled on a uniform wavenumber grid."""

    ks: np.ndarray
    sigmas: np.ndarray
    orders: List[int] = field(default_factory=list)
    kernels: List[TruncatedKernel] = field(default_factory=list)

    @property
    def step(self) -> float:
        return float(self.ks[1] - self.ks[0]) if len(self.ks) > 1 else 0.0

    @property
    def median(self) -> float:
        return float(np.median(self.sigmas))

    def rows(self):
        return zip(self.ks, self.sigmas)


@dataclass
class EigenDetection:
    k_star: float
    kernel: TruncatedKernel
    sigma: float
    dip_depth: float
    refined: bool = False

    def to_dict(self) -> dict:
        return {
            "k_star": self.k_star,
            "sigma": self.sigma,
            "dip_depth": self.dip_depth,
            "refined": self.refined,
            "kernel": self.kernel.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "EigenDetection":
        return cls(k_star=float(data["k_star"]), kernel=TruncatedKernel.from_dict(data["kernel"]),
                   sigma=float(data["sigma"]), dip_depth=float(data["dip_depth"]),
                   refined=bool(data.get("refined", False)))


@dataclass
class ScanResult:
    curve: IndicatorCurve
    detections: List[EigenDetection]
    diagnostic: Optional[str] = None


def kernel_basis_matrix(angles: np.ndarray, order: int) -> np.ndarray:
    """
    Columns e^{inθ_j} sqrt(w) / sqrt(2π), n = -N..N, over uniform ``angles``.

    The sqrt(w) factor makes the columns orthonormal whenever the angle
    count exceeds 2N + 1.
    """
    angles = np.asarray(angles, dtype=float)
    if len(angles) < 2 * order + 2:
        raise ConfigurationError(
            f"{len(angles)} angles cannot resolve kernels of order {order}; need >= {2 * order + 2}"
        )
    weight = 2.0 * math.pi / len(angles)
    phases = np.exp(1j * np.outer(angles, mode_indices(order)))
    return phases * math.sqrt(weight) / math.sqrt(2.0 * math.pi)


def apply_coefficients(A: FarFieldMatrix, coeffs: np.ndarray) -> np.ndarray:
    """(F g)(x̂_i) by quadrature over the incidence angles, any coefficient norm."""
    coeffs = np.asarray(coeffs, dtype=complex)
    order = (len(coeffs) - 1) // 2
    basis = np.exp(1j * np.outer(A.inc_angles, mode_indices(order))) / math.sqrt(2.0 * math.pi)
    return A.quad_weight * (A.values @ (basis @ coeffs))


def apply_truncated(A: FarFieldMatrix, kernel: TruncatedKernel) -> np.ndarray:
    """
    F_{k,N} g at the observation angles.

    Raises:
        ContractViolation: kernel and matrix belong to different wavenumbers.
    """
    if abs(A.k - kernel.k) > 1e-12 * max(1.0, abs(A.k)):
        raise ContractViolation(f"kernel for k={kernel.k} applied to matrix at k={A.k}")
    return apply_coefficients(A, kernel.coeffs)


def herglotz_mode_norms(k: float, order: int, radius: float) -> np.ndarray:
    """
    ‖v_n‖_{L²(B_R)} for the Herglotz wave of each basis kernel, n = -N..N.

    Uses ∫_0^R J_n(kr)² r dr = R²/2 [J_n(kR)² - J_{n-1}(kR) J_{n+1}(kR)],
    rearranged around J_n² so small values keep their relative accuracy.
    """
    x = k * radius
    table = bessel_j_orders(order + 1, x)
    norms = np.empty(order + 1)
    norms[0] = radius ** 2 / 2.0 * (table[0] ** 2 + table[1] ** 2)
    for n in range(1, order + 1):
        jn = table[n]
        if jn == 0.0:
            norms[n] = 0.0
            continue
        ratio = table[n - 1] * table[n + 1] / (jn * jn)
        norms[n] = radius ** 2 / 2.0 * jn * jn * (1.0 - ratio)
    norms = 2.0 * math.pi * np.sqrt(np.maximum(norms, 0.0))
    return np.concatenate([norms[:0:-1], norms])


def _phase_fix(coeffs: np.ndarray) -> np.ndarray:
    """Rotate so the largest-magnitude coefficient is real and positive."""
    lead = coeffs[int(np.argmax(np.abs(coeffs)))]
    if lead == 0:
        return coeffs
    return coeffs * (np.conj(lead) / abs(lead))


def _degenerate(k: float, order: int) -> IndicatorValue:
    coeffs = np.zeros(2 * order + 1, dtype=complex)
    coeffs[order] = 1.0
    return IndicatorValue(0.0, TruncatedKernel(k, order, coeffs), True)


def _weighted_system(A: FarFieldMatrix, order: int, side: str) -> Tuple[np.ndarray, float]:
    """Rows sqrt(w_row) (F g)(x̂_i) for the basis kernels, and w_row."""
    if side == "incident":
        values, row_weight, col_angles = A.values, A.obs_weight, A.inc_angles
    elif side == "observation":
        values, row_weight, col_angles = A.values.T, A.quad_weight, A.obs_angles
    else:
        raise ConfigurationError(f"side must be one of {SIDES}, got {side!r}")
    basis = kernel_basis_matrix(col_angles, order)
    col_weight = 2.0 * math.pi / len(col_angles)
    return math.sqrt(row_weight * col_weight) * (values @ basis), row_weight


def _mode_scale(k: float, order: int, weighting: str, radius: Optional[float]) -> Optional[np.ndarray]:
    """Column divisors of the weighting, None for "kernel"."""
    if weighting not in WEIGHTINGS:
        raise ConfigurationError(f"weighting must be one of {WEIGHTINGS}, got {weighting!r}")
    if weighting == "kernel":
        return None
    if radius is None or not radius > 0:
        raise ConfigurationError("herglotz weighting needs a positive radius")
    scale = herglotz_mode_norms(k, order, radius) ** 2
    if np.any(scale <= 0):
        raise ConfigurationError(
            f"order {order} exceeds the representable Bessel range at kR={k * radius:.3g}"
        )
    return scale


def indicator(A: FarFieldMatrix, order: int, weighting: str = "kernel",
              side: str = "incident", radius: Optional[float] = None) -> IndicatorValue:
    """
    Smallest singular value of the far-field operator on kernels of degree <= N.

    Args:
        A: far-field matrix at one wavenumber
        order: truncation order N
        weighting: "kernel" minimizes ‖F g‖ over ‖g‖ = 1; "herglotz" scales
            mode n by ‖v_n‖²_{L²(B_R)}, the weak-scattering response of that
            mode, so modes beyond kR do not pull the floor towards zero
        side: "incident" uses F, "observation" uses Fᵀ (rows and columns swap)
        radius: R for the "herglotz" weighting

    Returns:
        IndicatorValue(sigma, kernel, degenerate); an all-zero matrix gives
        sigma 0 with ``degenerate`` set.
    """
    if order < 0:
        raise ConfigurationError(f"truncation order must be non-negative, got {order}")
    scale = _mode_scale(A.k, order, weighting, radius)
    system, _ = _weighted_system(A, order, side)
    if not np.any(A.values):
        return _degenerate(A.k, order)
    if scale is not None:
        system = system / scale

    _, singular, vh = linalg.svd(system)
    sigma = float(singular[-1])
    coeffs = np.conj(vh[-1])
    if scale is not None:
        coeffs = coeffs / scale
        coeffs = coeffs / np.linalg.norm(coeffs)
    if singular[0] == 0.0:
        return _degenerate(A.k, order)
    return IndicatorValue(sigma, TruncatedKernel(A.k, order, _phase_fix(coeffs)))


def indicator_l1(A: FarFieldMatrix, order: int, weighting: str = "kernel",
                 side: str = "incident", radius: Optional[float] = None,
                 budget_per_mode: int = 200) -> IndicatorValue:
    """
    min over kernels of Σ_i w |(F g)(x̂_i)| / ‖D a‖, by Powell from the L² minimizer.

    ``weighting``, ``side`` and ``radius`` are those of ``indicator``: D is
    the identity for "kernel" and the squared Herglotz mode norms for
    "herglotz". The L¹ cost is less sensitive to a few corrupted angles.
    """
    seed = indicator(A, order, weighting=weighting, side=side, radius=radius)
    if seed.degenerate:
        return seed
    system, row_weight = _weighted_system(A, order, side)
    scale = _mode_scale(A.k, order, weighting, radius)
    if scale is None:
        scale = np.ones(2 * order + 1)
    size = 2 * order + 1

    def unpack(x: np.ndarray) -> np.ndarray:
        coeffs = x[:size] + 1j * x[size:]
        norm = np.linalg.norm(coeffs)
        return coeffs / norm if norm > 0 else coeffs

    def cost(x: np.ndarray) -> float:
        coeffs = unpack(x)
        weighted_norm = float(np.linalg.norm(scale * coeffs))
        if weighted_norm == 0.0:
            return math.inf
        return math.sqrt(row_weight) * float(np.sum(np.abs(system @ coeffs))) / weighted_norm

    x0 = np.concatenate([seed.kernel.coeffs.real, seed.kernel.coeffs.imag])
    result = optimize.minimize(cost, x0, method="Powell",
                               options={"maxfev": budget_per_mode * size, "xtol": 1e-8, "ftol": 1e-12})
    best = result.x if result.fun <= cost(x0) else x0
    coeffs = unpack(best)
    return IndicatorValue(float(cost(best)), TruncatedKernel(A.k, order, _phase_fix(coeffs)))


def truncation_order(k: float, radius: float, n_inc: int,
                     margin: int = DEFAULT_ORDER_MARGIN) -> int:
    """N(k) = ⌈e k R / 2⌉ + margin, capped by what ``n_inc`` angles resolve."""
    order = int(math.ceil(math.e * k * radius / 2.0)) + margin
    return max(0, min(order, (n_inc - 2) // 2))


def add_noise(A: FarFieldMatrix, level: float, seed: Optional[int] = None) -> FarFieldMatrix:
    """
    A + ε ‖A‖_F / sqrt(m n) · Z with Z standard complex Gaussian entries.

    ``level`` is the relative noise ε; the expected ‖noise‖_F is ε ‖A‖_F.
    """
    if level < 0:
        raise ConfigurationError(f"noise level must be non-negative, got {level}")
    if level == 0:
        return A
    rng = np.random.default_rng(seed)
    shape = A.values.shape
    z = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2.0)
    scale = level * np.linalg.norm(A.values) / math.sqrt(A.values.size)
    return FarFieldMatrix(k=A.k, values=A.values + scale * z)


def golden_section(fn: Callable[[float], float], lo: float, hi: float,
                   tol: float = 1e-3) -> float:
    """Minimizer of a unimodal ``fn`` on [lo, hi] to within ``tol``."""
    a, b = lo, hi
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = fn(c), fn(d)
    while abs(b - a) > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = fn(d)
    return (a + b) / 2.0


def _local_minima(sigmas: np.ndarray) -> List[int]:
    return [i for i in range(1, len(sigmas) - 1)
            if sigmas[i] < sigmas[i - 1] and sigmas[i] <= sigmas[i + 1]]


def scan(matrices: Sequence[FarFieldMatrix], radius: float,
         dip_threshold: float = DEFAULT_DIP_THRESHOLD, margin: int = DEFAULT_ORDER_MARGIN,
         order: Optional[int] = None, weighting: str = DEFAULT_WEIGHTING, side: str = "incident",
         cost: str = "l2", provider: Optional[Callable[[float], FarFieldMatrix]] = None,
         refine_tol: float = 1e-3) -> ScanResult:
    """
    Indicator curve over a wavenumber grid and the dips it contains.

    A dip is a strict local minimum whose depth σ/median(σ) is below
    ``dip_threshold``. With a ``provider`` (k -> FarFieldMatrix) each dip
    is refined by golden-section search between its grid neighbours;
    otherwise the grid minimizer is reported.

    Args:
        matrices: far-field matrices in increasing k on a uniform grid
        radius: prior radius R of a disk containing the scatterer
        dip_threshold: maximum σ/median(σ) of an accepted dip
        margin: additive margin of the truncation rule
        order: fixed N overriding the truncation rule
        weighting: see ``indicator``
        side: see ``indicator``
        cost: "l2" (SVD) or "l1" (``indicator_l1``)
        provider: optional source of matrices at off-grid wavenumbers
        refine_tol: golden-section stopping width
    """
    if not matrices:
        raise ConfigurationError("empty k grid")
    if cost not in ("l2", "l1"):
        raise ConfigurationError(f"cost must be 'l2' or 'l1', got {cost!r}")
    ks = np.array([A.k for A in matrices])
    if np.any(np.diff(ks) <= 0):
        raise ConfigurationError("wavenumbers must be strictly increasing")

    def evaluate(A: FarFieldMatrix) -> IndicatorValue:
        n_cols = A.n_inc if side == "incident" else A.m
        N = order if order is not None else truncation_order(A.k, radius, n_cols, margin)
        if cost == "l1":
            return indicator_l1(A, N, weighting=weighting, side=side, radius=radius)
        return indicator(A, N, weighting=weighting, side=side, radius=radius)

    values = [evaluate(A) for A in matrices]
    curve = IndicatorCurve(ks=ks, sigmas=np.array([v.sigma for v in values]),
                           orders=[v.kernel.order for v in values],
                           kernels=[v.kernel for v in values])
    median = curve.median
    logger.info("Indicator curve computed", extra={
        "k_min": float(ks[0]), "k_max": float(ks[-1]), "points": len(ks), "median_sigma": median,
    })

    detections: List[EigenDetection] = []
    if median <= 0:
        return ScanResult(curve, detections, "indicator vanishes identically")

    for i in _local_minima(curve.sigmas):
        depth = curve.sigmas[i] / median
        if depth >= dip_threshold:
            continue
        if provider is not None:
            k_star = golden_section(lambda kk: evaluate(provider(kk)).sigma,
                                    float(ks[i - 1]), float(ks[i + 1]), refine_tol)
            best = evaluate(provider(k_star))
            if best.sigma > curve.sigmas[i]:
                k_star, best = float(ks[i]), values[i]
                refined = False
            else:
                refined = True
        else:
            k_star, best, refined = float(ks[i]), values[i], False
        detection = EigenDetection(k_star=k_star, kernel=best.kernel, sigma=best.sigma,
                                   dip_depth=best.sigma / median, refined=refined)
        logger.info("Transmission eigenvalue candidate", extra={
            "k_star": k_star, "sigma": best.sigma, "dip_depth": detection.dip_depth,
            "refined": refined,
        })
        detections.append(detection)

    diagnostic = None
    if not detections:
        diagnostic = "no dip below threshold"
        logger.warning("No transmission eigenvalue detected", extra={
            "k_min": float(ks[0]), "k_max": float(ks[-1]), "threshold": dip_threshold,
        })
    return ScanResult(curve, detections, diagnostic)
