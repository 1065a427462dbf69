"""Scalar and vector primitives shared by the estimators.

Everything here is a pure function of its arguments.
"""

from __future__ import annotations

import math
from typing import Callable

import numpy as np
from scipy.special import ndtri

from quantcorr.errors import DegenerateWindow, InvalidQuantile, InvalidSeries

Kernel = Callable[[np.ndarray], np.ndarray]

_SQRT_2PI = math.sqrt(2.0 * math.pi)
# NW denominators below this are treated as an empty window.
NW_DENOMINATOR_FLOOR = 1e-300


def as_tau(tau: float) -> float:
    """Validate a quantile level and return it as a float in (0, 1)."""
    try:
        value = float(tau)
    except (TypeError, ValueError) as exc:
        raise InvalidQuantile(f"quantile level must be a number, got {tau!r}") from exc
    if not 0.0 < value < 1.0:
        raise InvalidQuantile(f"quantile level must lie in (0, 1), got {value}")
    return value


def as_series(values, name: str = "series") -> np.ndarray:
    """Return ``values`` as a 1-d float array, rejecting empty or non-finite input."""
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1:
        arr = arr.reshape(-1)
    if arr.size == 0:
        raise InvalidSeries(f"{name} is empty")
    if not np.all(np.isfinite(arr)):
        raise InvalidSeries(f"{name} contains NaN or infinite values")
    return arr


def psi(w, tau: float):
    """Quantile score ``tau - I(w < 0)``; zero counts as non-negative."""
    w = np.asarray(w, dtype=float)
    out = tau - (w < 0.0)
    return float(out) if out.ndim == 0 else out


def rho(w, tau: float):
    """Check function ``w * (tau - I(w < 0))``."""
    w = np.asarray(w, dtype=float)
    out = w * (tau - (w < 0.0))
    return float(out) if out.ndim == 0 else out


def empirical_quantile(sample, tau: float) -> float:
    """Left-continuous sample quantile ``inf{y : F_n(y) >= tau}``.

    Returns the order statistic ``y_(j)`` with ``j = ceil(n * tau)``, so the
    result is always an element of the sample.
    """
    tau = as_tau(tau)
    arr = as_series(sample, "sample")
    n = arr.size
    # guard against n*tau landing a hair above an integer through rounding
    j = math.ceil(n * tau - 1e-9)
    j = min(max(j, 1), n)
    return float(np.partition(arr, j - 1)[j - 1])


def moments(sample) -> tuple[float, float]:
    """Mean and variance with divisor ``n``."""
    arr = as_series(sample, "sample")
    mean = float(arr.mean())
    return mean, float(np.mean((arr - mean) ** 2))


def gaussian_kernel(u):
    u = np.asarray(u, dtype=float)
    return np.exp(-0.5 * u * u) / _SQRT_2PI


def nadaraya_watson(conditioning, response_rows, eval_point: float, bandwidth: float,
                    kernel: Kernel = gaussian_kernel) -> np.ndarray:
    """Kernel-weighted average of ``response_rows`` around ``eval_point``.

    Parameters
    ----------
    conditioning : array_like, shape (n,)
        Values of the conditioning variable.
    response_rows : array_like, shape (n,) or (n, ...)
        Responses; trailing dimensions are averaged componentwise.
    eval_point : float
    bandwidth : float
        Smoothing window on the scale of ``conditioning``.
    kernel : callable
        Symmetric density, Gaussian by default.

    Returns
    -------
    numpy.ndarray
        Array with the trailing shape of ``response_rows``.

    Raises
    ------
    DegenerateWindow
        If the kernel weights sum to (numerically) zero.
    """
    c = np.asarray(conditioning, dtype=float)
    rows = np.asarray(response_rows, dtype=float)
    if rows.shape[0] != c.shape[0]:
        raise InvalidSeries("conditioning and response rows differ in length")
    if not bandwidth > 0:
        raise InvalidSeries(f"bandwidth must be positive, got {bandwidth}")
    weights = kernel((c - eval_point) / bandwidth)
    total = float(weights.sum())
    if total < NW_DENOMINATOR_FLOOR:
        raise DegenerateWindow(
            f"no kernel mass at {eval_point:g} with bandwidth {bandwidth:g}")
    return np.tensordot(weights, rows, axes=(0, 0)) / total


def normal_ppf(p):
    return ndtri(p)


def normal_pdf(x):
    x = np.asarray(x, dtype=float)
    out = np.exp(-0.5 * x * x) / _SQRT_2PI
    return float(out) if out.ndim == 0 else out


def normal_sf(x):
    """Upper tail of the standard normal."""
    return 0.5 * math.erfc(x / math.sqrt(2.0))


# Regularized incomplete gamma. Series below a + 1, Lentz continued fraction
# above; both iterate to machine precision.
_GAMMA_EPS = 1e-16
_GAMMA_TINY = 1e-300
_GAMMA_MAXITER = 100_000


def _lower_gamma_series(a: float, x: float) -> float:
    """Regularized lower incomplete gamma P(a, x) by its power series."""
    term = 1.0 / a
    total = term
    ap = a
    for _ in range(_GAMMA_MAXITER):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _GAMMA_EPS:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _upper_gamma_fraction(a: float, x: float) -> float:
    """Regularized upper incomplete gamma Q(a, x) by continued fraction."""
    b = x + 1.0 - a
    c = 1.0 / _GAMMA_TINY
    d = 1.0 / b
    h = d
    for i in range(1, _GAMMA_MAXITER):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _GAMMA_TINY:
            d = _GAMMA_TINY
        c = b + an / c
        if abs(c) < _GAMMA_TINY:
            c = _GAMMA_TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _GAMMA_EPS:
            break
    return math.exp(-x + a * math.log(x) - math.lgamma(a)) * h


def chi_square_sf(x: float, df: int) -> float:
    """Survival function ``P(chi2_df > x)``."""
    if df < 1:
        raise InvalidSeries(f"degrees of freedom must be >= 1, got {df}")
    x = float(x)
    if x < 0 or math.isnan(x):
        raise InvalidSeries(f"chi-square argument must be non-negative, got {x}")
    if x == 0.0:
        return 1.0
    if math.isinf(x):
        return 0.0
    a, z = 0.5 * df, 0.5 * x
    if z < a + 1.0:
        return max(0.0, 1.0 - _lower_gamma_series(a, z))
    return min(1.0, _upper_gamma_fraction(a, z))
