"""Sample quantile correlation and quantile partial correlation.

Both estimators come with plug-in asymptotic variances so that
``value +/- 1.96 * sqrt(variance / n)`` is an approximate 95% interval.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from quantcorr.bandwidth import BandwidthRule, bandwidth
from quantcorr.errors import InvalidSeries, ZeroVariance
from quantcorr.numerics import (
    Kernel,
    as_series,
    as_tau,
    empirical_quantile,
    gaussian_kernel,
    nadaraya_watson,
    psi,
)
from quantcorr.quantreg import fit_least_squares, fit_quantile

# m2(0) in the partial-correlation variance is inverted by pseudo-inverse
# beyond this condition number.
SINGULAR_CONDITION = 1e12
# residual variance below this fraction of the raw second moment counts as zero
RELATIVE_VARIANCE_FLOOR = 1e-12


class SingularSmootherWarning(RuntimeWarning):
    """The smoothed Gram matrix was near singular and pseudo-inverted."""


@dataclass(frozen=True)
class CorrEstimate:
    value: float
    asymptotic_variance: float
    n: int
    tau: float

    @property
    def std_error(self) -> float:
        return math.sqrt(self.asymptotic_variance / self.n)

    @property
    def band(self) -> float:
        return 1.96 * self.std_error


def _pair(y, x):
    y = as_series(y, "y")
    x = as_series(x, "x")
    if y.size != x.size:
        raise InvalidSeries(f"y and x differ in length ({y.size} vs {x.size})")
    if y.size < 2:
        raise InvalidSeries("need at least two observations")
    return y, x


def _controls(z, n):
    if z is None:
        return np.empty((n, 0))
    z = np.asarray(z, dtype=float)
    if z.ndim == 1:
        z = z[:, None]
    if z.shape[0] != n:
        raise InvalidSeries(f"controls have {z.shape[0]} rows, expected {n}")
    if not np.all(np.isfinite(z)):
        raise InvalidSeries("controls contain non-finite values")
    return z


def qcor(y, x, tau: float) -> float:
    """Sample quantile correlation of ``y`` (quantile side) with ``x``."""
    tau = as_tau(tau)
    y, x = _pair(y, x)
    xc = x - x.mean()
    var_x = float(np.mean(xc * xc))
    if var_x <= 0.0:
        raise ZeroVariance("x has zero sample variance")
    score = psi(y - empirical_quantile(y, tau), tau)
    return float(np.mean(score * xc) / math.sqrt((tau - tau * tau) * var_x))


def qcor_variance(y, x, tau: float, rule: BandwidthRule | str = BandwidthRule.HALL_SHEATHER,
                  alpha: float = 0.05, kernel: Kernel = gaussian_kernel) -> float:
    """Plug-in asymptotic variance of :func:`qcor`.

    ``E(X | Y = Q_tau)`` is estimated by Nadaraya-Watson smoothing of ``x``
    on ``y`` at the sample quantile.  The bandwidth rule gives a window on
    the probability scale, which is converted to the scale of ``y`` by its
    standard deviation.
    """
    tau = as_tau(tau)
    y, x = _pair(y, x)
    n = y.size
    c = tau - tau * tau
    q_hat = empirical_quantile(y, tau)
    score = psi(y - q_hat, tau)
    xc = x - x.mean()
    var_x = float(np.mean(xc * xc))
    if var_x <= 0.0:
        raise ZeroVariance("x has zero sample variance")
    qcov = float(np.mean(score * xc))
    h = bandwidth(rule, n, tau, alpha) * math.sqrt(float(np.var(y)))
    if h <= 0.0:
        raise ZeroVariance("y has zero sample variance")
    mu_xy = float(nadaraya_watson(y, x, q_hat, h, kernel))

    xs = x - mu_xy
    s11 = float(np.mean(xc ** 4)) - var_x ** 2
    s12 = float(np.mean((score * xs) ** 2)) - qcov ** 2
    s13 = float(np.mean(score * xs * xc * xc)) - var_x * qcov
    omega = (s11 * qcov ** 2 / (4.0 * var_x ** 3)
             - s13 * qcov / var_x ** 2
             + s12 / var_x) / c
    return max(omega, 0.0)


def qcor_estimate(y, x, tau: float, rule: BandwidthRule | str = BandwidthRule.HALL_SHEATHER,
                  alpha: float = 0.05) -> CorrEstimate:
    y, x = _pair(y, x)
    return CorrEstimate(qcor(y, x, tau), qcor_variance(y, x, tau, rule, alpha), y.size, as_tau(tau))


@dataclass(frozen=True)
class _PartialFit:
    tau: float
    x: np.ndarray
    design: np.ndarray
    x_resid: np.ndarray
    var_xz: float
    y_resid: np.ndarray
    score: np.ndarray


def _partial_fit(y, x, z, tau) -> _PartialFit:
    tau = as_tau(tau)
    y, x = _pair(y, x)
    z = _controls(z, y.size)
    design = np.column_stack([np.ones(y.size), z])
    ls = fit_least_squares(design, x)
    if ls.mean_squared_residual <= RELATIVE_VARIANCE_FLOOR * float(np.mean(x * x)):
        raise ZeroVariance("x is an exact linear function of the controls")
    qf = fit_quantile(design, y, tau)
    return _PartialFit(tau, x, design, ls.residuals, ls.mean_squared_residual,
                       qf.residuals, psi(qf.residuals, tau))


def _qpcor_value(fit: _PartialFit) -> float:
    c = fit.tau - fit.tau ** 2
    return float(np.mean(fit.score * fit.x) / math.sqrt(c * fit.var_xz))


def qpcor(y, x, z, tau: float) -> float:
    """Sample quantile partial correlation of ``y`` and ``x`` given ``z``.

    ``z`` holds the control variables without an intercept column; pass
    ``None`` or a zero-width array for no controls.  The numerator uses
    ``x`` itself rather than its residual from the controls.
    """
    return _qpcor_value(_partial_fit(y, x, z, tau))


def _qpcor_variance(fit: _PartialFit, rule, alpha, kernel) -> float:
    tau = fit.tau
    c = tau - tau * tau
    n = fit.x.size
    x, design, score = fit.x, fit.design, fit.score
    ystar = fit.y_resid
    h = bandwidth(rule, n, tau, alpha) * math.sqrt(float(np.var(ystar)))
    if h <= 0.0:
        raise ZeroVariance("quantile residuals have zero variance")
    m1 = nadaraya_watson(ystar, x[:, None] * design, 0.0, h, kernel)
    m2 = nadaraya_watson(ystar, design[:, :, None] * design[:, None, :], 0.0, h, kernel)
    if np.linalg.cond(m2) > SINGULAR_CONDITION:
        warnings.warn("smoothed Gram matrix is near singular; using pseudo-inverse",
                      SingularSmootherWarning, stacklevel=3)
        m2_inv = np.linalg.pinv(m2)
    else:
        m2_inv = np.linalg.inv(m2)
    sigma20 = m1 @ m2_inv

    var_xz = fit.var_xz
    xr = fit.x_resid
    qcov = float(np.mean(score * x))
    xs = x - design @ sigma20
    s23 = float(np.mean(xr ** 4)) - var_xz ** 2
    s24 = float(np.mean((score * xs) ** 2)) - qcov ** 2
    s25 = float(np.mean(score * xs * xr * xr)) - var_xz * qcov
    omega = (s23 * qcov ** 2 / (4.0 * var_xz ** 3)
             - s25 * qcov / var_xz ** 2
             + s24 / var_xz) / c
    return max(omega, 0.0)


def qpcor_variance(y, x, z, tau: float, rule: BandwidthRule | str = BandwidthRule.HALL_SHEATHER,
                   alpha: float = 0.05, kernel: Kernel = gaussian_kernel) -> float:
    """Plug-in asymptotic variance of :func:`qpcor`.

    The smoothing step conditions on the quantile-regression residual
    ``Y - theta' Z*`` at zero, with the window scaled by that residual's
    standard deviation.  Emits :class:`SingularSmootherWarning` when the
    smoothed Gram matrix has to be pseudo-inverted.
    """
    return _qpcor_variance(_partial_fit(y, x, z, tau), rule, alpha, kernel)


def qpcor_estimate(y, x, z, tau: float, rule: BandwidthRule | str = BandwidthRule.HALL_SHEATHER,
                   alpha: float = 0.05) -> CorrEstimate:
    fit = _partial_fit(y, x, z, tau)
    return CorrEstimate(_qpcor_value(fit), _qpcor_variance(fit, rule, alpha, gaussian_kernel),
                        fit.x.size, fit.tau)


def qpcor_with_variances(y, x, z, tau: float, rules, alpha: float = 0.05):
    """Value and one variance per rule, sharing the two regression fits."""
    fit = _partial_fit(y, x, z, tau)
    return _qpcor_value(fit), [_qpcor_variance(fit, r, alpha, gaussian_kernel) for r in rules]
