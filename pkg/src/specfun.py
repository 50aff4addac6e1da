"""
Cylinder special functions and circular-harmonic utilities.

J_n is evaluated for all orders 0..n_max at once by Miller's downward
recurrence normalized with J_0 + 2 Σ J_2k = 1, which stays stable for
n >> x.  Y_n comes from upward recurrence seeded with scipy's Y_0, Y_1.
Every routine is a pure function of its arguments.
"""

import math
from typing import Union

import numpy as np
from scipy import special

from .errors import DomainError

MAX_ORDER = 200
# whole-order J tables; plane-wave expansions at k|x| = 800 need about 1100 orders
MAX_TABLE_ORDER = 2048
_RESCALE_ABOVE = 1e250
_RESCALE_BY = 1e-250

ArrayLike = Union[float, np.ndarray]


def _as_nonneg_array(x: ArrayLike, name: str = "x") -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} must be finite")
    if np.any(arr < 0):
        raise DomainError(f"{name} must be non-negative")
    return arr


def _check_order(n: int, limit: int = MAX_ORDER) -> None:
    if abs(int(n)) > limit:
        raise DomainError(f"|order| {n} exceeds supported maximum {limit}")


def _miller_start(n_max: int, x_max: float) -> int:
    """Even starting order for the downward recurrence."""
    top = max(n_max, int(math.ceil(x_max))) + 20
    start = top + int(math.sqrt(160.0 * top))
    return start + (start % 2)


def bessel_j_orders(n_max: int, x: ArrayLike) -> np.ndarray:
    """
    J_0..J_{n_max} at every point of ``x``.

    Unlike the single-order functions, tables reach ``MAX_TABLE_ORDER``.

    Returns:
        Array of shape (n_max + 1,) + shape(x).
    """
    if n_max < 0:
        raise DomainError("n_max must be non-negative")
    _check_order(n_max, MAX_TABLE_ORDER)
    x = _as_nonneg_array(x)
    shape = x.shape
    flat = x.reshape(-1)
    out = np.zeros((n_max + 1, flat.size))
    if flat.size == 0:
        return out.reshape((n_max + 1,) + shape)

    at_origin = flat == 0.0
    xs = np.where(at_origin, 1.0, flat)
    start = _miller_start(n_max, float(flat.max()))

    j_next = np.zeros(flat.size)
    j_cur = np.full(flat.size, 1e-30)
    norm = np.zeros(flat.size)
    for order in range(start, 0, -1):
        j_prev = (2.0 * order / xs) * j_cur - j_next
        lower = order - 1
        if lower <= n_max:
            out[lower] = j_prev
        if lower > 0 and lower % 2 == 0:
            norm += 2.0 * j_prev
        j_next, j_cur = j_cur, j_prev
        big = np.abs(j_cur) > _RESCALE_ABOVE
        if np.any(big):
            j_cur[big] *= _RESCALE_BY
            j_next[big] *= _RESCALE_BY
            norm[big] *= _RESCALE_BY
            out[:, big] *= _RESCALE_BY
    norm += j_cur
    out /= norm

    out[:, at_origin] = 0.0
    out[0, at_origin] = 1.0
    return out.reshape((n_max + 1,) + shape)


def bessel_y_orders(n_max: int, x: ArrayLike) -> np.ndarray:
    """Y_0..Y_{n_max} at every point of ``x`` (x > 0) by upward recurrence."""
    if n_max < 0:
        raise DomainError("n_max must be non-negative")
    _check_order(n_max)
    x = _as_nonneg_array(x)
    if np.any(x <= 0):
        raise DomainError("Y_n is singular at x = 0")
    out = np.empty((n_max + 1,) + x.shape)
    out[0] = special.y0(x)
    if n_max >= 1:
        out[1] = special.y1(x)
    with np.errstate(over="ignore", invalid="ignore"):
        for order in range(1, n_max):
            out[order + 1] = (2.0 * order / x) * out[order] - out[order - 1]
    return out


def _signed(values: np.ndarray, n: int) -> np.ndarray:
    """Apply Z_{-n} = (-1)^n Z_n for negative orders."""
    return values if n >= 0 or n % 2 == 0 else -values


def bessel_j(n: int, x: ArrayLike) -> ArrayLike:
    """
    Bessel function of the first kind J_n(x) for integer n, x >= 0.

    Raises:
        DomainError: non-finite or negative x, or |n| > 200.
    """
    _check_order(n)
    arr = _as_nonneg_array(x)
    values = _signed(bessel_j_orders(abs(n), arr)[abs(n)], n)
    return float(values) if np.ndim(x) == 0 else values


def bessel_y(n: int, x: ArrayLike) -> ArrayLike:
    """Bessel function of the second kind Y_n(x) for integer n, x > 0."""
    _check_order(n)
    arr = _as_nonneg_array(x)
    values = _signed(bessel_y_orders(abs(n), arr)[abs(n)], n)
    return float(values) if np.ndim(x) == 0 else values


def hankel1(n: int, x: ArrayLike) -> ArrayLike:
    """
    Hankel function of the first kind H_n^(1)(x) = J_n(x) + i Y_n(x).

    Raises:
        DomainError: x <= 0 (logarithmic singularity at the origin).
    """
    arr = _as_nonneg_array(x)
    if np.any(arr <= 0):
        raise DomainError("H_n^(1) is singular at x = 0")
    values = np.asarray(bessel_j(n, arr)) + 1j * np.asarray(bessel_y(n, arr))
    return complex(values) if np.ndim(x) == 0 else values


def bessel_j_derivative(n: int, x: ArrayLike) -> ArrayLike:
    """dJ_n/dx = (J_{n-1} - J_{n+1}) / 2."""
    if n == 0:
        values = -np.asarray(bessel_j(1, x))
    else:
        values = 0.5 * (np.asarray(bessel_j(n - 1, x)) - np.asarray(bessel_j(n + 1, x)))
    return float(values) if np.ndim(x) == 0 else values


def hankel1_derivative(n: int, x: ArrayLike) -> ArrayLike:
    """dH_n^(1)/dx = (H_{n-1} - H_{n+1}) / 2."""
    if n == 0:
        values = -np.asarray(hankel1(1, x))
    else:
        values = 0.5 * (np.asarray(hankel1(n - 1, x)) - np.asarray(hankel1(n + 1, x)))
    return complex(values) if np.ndim(x) == 0 else values


def circular_harmonic(n: int, theta: ArrayLike) -> ArrayLike:
    """e^{i n θ} / sqrt(2π); orthonormal on the unit circle."""
    values = np.exp(1j * n * np.asarray(theta, dtype=float)) / math.sqrt(2.0 * math.pi)
    return complex(values) if np.ndim(theta) == 0 else values


def i_power(n: int) -> complex:
    """Exact i^n for integer n."""
    return (1.0 + 0j, 1j, -1.0 + 0j, -1j)[n % 4]


def mode_indices(order: int) -> np.ndarray:
    """Mode numbers -N..N in storage order."""
    return np.arange(-order, order + 1)


def jacobi_anger_order(k: float, radius: float, margin: int = 10) -> int:
    """Truncation order beyond which the Bessel tail is negligible."""
    return int(math.ceil(math.e * k * radius / 2.0)) + margin


def bessel_j_signed_orders(order: int, x: ArrayLike) -> np.ndarray:
    """J_n(x) for n = -N..N, shape (2N+1,) + shape(x)."""
    positive = bessel_j_orders(order, x)
    signs = np.where(np.arange(1, order + 1) % 2 == 0, 1.0, -1.0)
    signs = signs.reshape((-1,) + (1,) * (positive.ndim - 1))
    negative = (positive[1:] * signs)[::-1]
    return np.concatenate([negative, positive], axis=0)


def plane_wave_expansion(k: float, x: ArrayLike, y: ArrayLike,
                         theta_d: float, order: int) -> np.ndarray:
    """
    Truncated Jacobi–Anger sum Σ_{|n|<=N} i^n J_n(k|x|) e^{in(θ_x - θ_d)}.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    r = np.hypot(x, y)
    theta = np.arctan2(y, x)
    bessel = bessel_j_signed_orders(order, k * r)
    total = np.zeros(r.shape, dtype=complex)
    for row, n in enumerate(mode_indices(order)):
        total += i_power(n) * bessel[row] * np.exp(1j * n * (theta - theta_d))
    return total
