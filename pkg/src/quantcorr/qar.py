"""Quantile autoregression: identification, estimation, lag selection.

Time indices are 0-based internally.  A model whose sample starts at
``start`` uses responses ``y[start:]`` and regressors ``y[t - lag]``; every
sample average is divided by the full series length ``n``, matching the
normalisation of the correlation estimators.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from quantcorr.bandwidth import BandwidthRule, bandwidth
from quantcorr.errors import BandwidthTooLarge, InvalidSeries, RankDeficient, ValidationError
from quantcorr.numerics import as_series, as_tau, normal_sf, psi
from quantcorr.quantreg import fit_least_squares, fit_quantile

# Bandwidths reaching past 0 or 1 are shrunk to this fraction of min(tau, 1 - tau).
CLAMP_FRACTION = 0.9
BAND_Z = 1.96


@dataclass(frozen=True)
class Correlogram:
    tau: float
    lags: np.ndarray
    values: np.ndarray
    variances: np.ndarray
    n: int
    covariance: np.ndarray | None = None

    @property
    def band(self) -> np.ndarray:
        return BAND_Z * np.sqrt(self.variances / self.n)

    @property
    def significant(self) -> np.ndarray:
        return np.abs(self.values) > self.band

    def __len__(self) -> int:
        return len(self.lags)


@dataclass(frozen=True)
class SparsityEstimates:
    values: np.ndarray
    bandwidth: float
    truncated: np.ndarray
    rule: BandwidthRule


@dataclass(frozen=True)
class QarFit:
    """Fitted quantile autoregression.

    ``coefficients`` holds the intercept followed by one slope per entry of
    ``lags``.  ``start`` is the first modelled time index, so ``residuals``
    has zeros in its first ``start`` slots.
    """

    tau: float
    start: int
    lags: tuple[int, ...]
    coefficients: np.ndarray
    covariance: np.ndarray
    residuals: np.ndarray
    sparsity: SparsityEstimates
    design: np.ndarray
    response: np.ndarray

    @property
    def order(self) -> int:
        return max(self.lags, default=0)

    @property
    def n(self) -> int:
        return self.residuals.size

    @property
    def std_errors(self) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.covariance), 0.0, None))

    @property
    def included_lags(self) -> tuple[int, ...]:
        return self.lags

    def p_values(self) -> np.ndarray:
        se = self.std_errors
        with np.errstate(divide="ignore", invalid="ignore"):
            stat = np.where(se > 0, np.abs(self.coefficients) / se, np.inf)
        return np.array([2.0 * normal_sf(s) for s in stat])


def lag_design(series: np.ndarray, lags: Sequence[int], start: int) -> np.ndarray:
    """Rows ``t = start..n-1`` of ``[1, y[t - l] for l in lags]``."""
    n = series.size
    t = np.arange(start, n)
    cols = [np.ones(t.size)] + [series[t - lag] for lag in lags]
    return np.column_stack(cols)


def _clamped_bandwidth(rule, n, tau, alpha, clamp=True) -> float:
    h = bandwidth(rule, n, tau, alpha)
    if tau + h >= 1.0 or tau - h <= 0.0:
        if not clamp:
            raise BandwidthTooLarge(f"tau +/- h leaves (0, 1): tau={tau}, h={h:.4g}")
        h = CLAMP_FRACTION * min(tau, 1.0 - tau)
    return h


def _sparsity_on(design, response, tau, rule, alpha, clamp=True) -> SparsityEstimates:
    rule = BandwidthRule.coerce(rule)
    h = _clamped_bandwidth(rule, design.shape[0], tau, alpha, clamp)
    upper = fit_quantile(design, response, tau + h).coefficients
    lower = fit_quantile(design, response, tau - h).coefficients
    spread = design @ (upper - lower)
    # crossed fits carry no density information; weight them by zero
    truncated = spread <= 0.0
    values = np.zeros(spread.size)
    values[~truncated] = 2.0 * h / spread[~truncated]
    return SparsityEstimates(values, h, truncated, rule)


def sparsity(series, tau: float, order: int, rule: BandwidthRule | str = BandwidthRule.HALL_SHEATHER,
             alpha: float = 0.05, clamp: bool = True) -> SparsityEstimates:
    """Hendricks-Koenker estimates of the conditional density at the quantile.

    Fits QAR(``order``) at ``tau - h`` and ``tau + h`` and returns
    ``2h / (Q_{tau+h} - Q_{tau-h})`` for each modelled time point
    ``t = order..n-1``.  Where the two fits cross (non-positive spread) the
    estimate is set to zero and flagged in ``truncated``.
    """
    tau = as_tau(tau)
    y = as_series(series)
    if order < 0 or y.size <= order + 1:
        raise ValidationError(f"order {order} is not usable with {y.size} observations")
    lags = tuple(range(1, order + 1))
    return _sparsity_on(lag_design(y, lags, order), y[order:], tau, rule, alpha, clamp)


def qpacf(series, tau: float, max_lag: int, rule: BandwidthRule | str = BandwidthRule.HALL_SHEATHER,
          alpha: float = 0.05) -> Correlogram:
    """Sample quantile partial autocorrelations at lags ``1..max_lag``.

    Each lag ``k`` regresses ``y[t-k]`` (least squares) and ``y[t]``
    (quantile regression) on the ``k - 1`` intermediate lags.  Variances are
    the plug-in limits under the hypothesis that the lag-``k`` coefficient
    vanishes, with conditional densities from QAR(``k``) fits.
    """
    tau = as_tau(tau)
    y = as_series(series)
    if max_lag < 1:
        raise ValidationError("max_lag must be at least 1")
    if y.size <= max_lag + 2:
        raise ValidationError(f"series of length {y.size} is too short for {max_lag} lags")
    lags = range(1, max_lag + 1)
    values, variances = qpacf_at(y, tau, lags, [rule], alpha)
    return Correlogram(tau, np.arange(1, max_lag + 1), values, variances[0], y.size)


def qpacf_at(series, tau: float, lags: Sequence[int], rules: Sequence[BandwidthRule | str],
             alpha: float = 0.05) -> tuple[np.ndarray, list[np.ndarray]]:
    """QPACF values at selected lags with one variance vector per rule.

    The value regressions are shared across rules; only the density fits
    are repeated.
    """
    tau = as_tau(tau)
    y = as_series(series)
    values = np.empty(len(lags))
    variances = [np.empty(len(lags)) for _ in rules]
    for i, k in enumerate(lags):
        if k < 1 or y.size <= k + 2:
            raise ValidationError(f"lag {k} is not usable with {y.size} observations")
        part = _qpacf_value(y, tau, k)
        values[i] = part[0]
        for j, rule in enumerate(rules):
            variances[j][i] = _omega3(y, tau, k, part, rule, alpha)
    return values, variances


def _qpacf_value(y, tau, k):
    n = y.size
    inner = lag_design(y, range(1, k), k)
    lagged = y[:n - k]
    ls = fit_least_squares(inner, lagged)
    var_yz = float(np.sum(ls.residuals ** 2)) / n
    if var_yz <= 1e-12 * float(np.mean(lagged * lagged)):
        raise RankDeficient(f"lag {k} is an exact linear function of the intermediate lags")
    score = psi(fit_quantile(inner, y[k:], tau).residuals, tau)
    value = float(np.sum(score * lagged)) / n / math.sqrt((tau - tau * tau) * var_yz)
    return value, inner, lagged, var_yz


def _omega3(y, tau, k, part, rule, alpha):
    n = y.size
    _, inner, lagged, var_yz = part
    dens = _sparsity_on(lag_design(y, range(1, k + 1), k), y[k:], tau, rule, alpha).values
    a0 = inner.T @ lagged / n
    a1 = inner.T @ (dens * lagged) / n
    s30 = inner.T @ inner / n
    s31 = (inner * dens[:, None]).T @ inner / n
    try:
        g = np.linalg.solve(s31, a1)
    except np.linalg.LinAlgError:
        raise RankDeficient(f"density-weighted Gram matrix is singular at lag {k}") from None
    # raw second moment of the lagged regressor over the same rows
    second = float(lagged @ lagged) / n
    numer = second - 2.0 * g @ a0 + g @ s30 @ g
    return max(float(numer) / var_yz, 0.0)


def _covariance(design, dens, tau, n):
    s40 = design.T @ design / n
    s41 = (design * dens[:, None]).T @ design / n
    try:
        s41_inv = np.linalg.inv(s41)
    except np.linalg.LinAlgError:
        raise RankDeficient("density-weighted Gram matrix is singular") from None
    cov = (tau - tau * tau) * s41_inv @ s40 @ s41_inv / n
    return 0.5 * (cov + cov.T)


def fit_qar(series, tau: float, p: int, rule: BandwidthRule | str = BandwidthRule.HALL_SHEATHER,
            alpha: float = 0.05, lags: Sequence[int] | None = None,
            start: int | None = None) -> QarFit:
    """Fit a QAR(p) model by quantile regression on lagged values.

    Parameters
    ----------
    series : array_like
    tau : float
    p : int
        Autoregressive order.
    rule : BandwidthRule or str
        Bandwidth for the sparsity estimates behind the covariance.
    alpha : float
        Hall-Sheather level.
    lags : sequence of int, optional
        Subset of ``1..p`` to include; all of them by default.
    start : int, optional
        First modelled index, ``p`` by default.  Backward elimination keeps
        this fixed while dropping lags.

    Returns
    -------
    QarFit
    """
    tau = as_tau(tau)
    y = as_series(series)
    if p < 0:
        raise ValidationError("order must be non-negative")
    lags = tuple(range(1, p + 1)) if lags is None else tuple(sorted(int(l) for l in lags))
    if any(l < 1 or l > p for l in lags):
        raise ValidationError(f"lags {lags} must lie in 1..{p}")
    start = p if start is None else int(start)
    if start < max(lags, default=0):
        raise ValidationError("start must be at least the largest lag")
    n = y.size
    if n <= 3 * (p + 1):
        raise ValidationError(f"need more than {3 * (p + 1)} observations for order {p}, got {n}")
    design = lag_design(y, lags, start)
    response = y[start:]
    qf = fit_quantile(design, response, tau)
    resid = np.zeros(n)
    resid[start:] = qf.residuals
    sp = _sparsity_on(design, response, tau, rule, alpha)
    cov = _covariance(design, sp.values, tau, n)
    return QarFit(tau, start, lags, qf.coefficients, cov, resid, sp, design, response)


def with_rule(fit: QarFit, rule: BandwidthRule | str, alpha: float = 0.05) -> QarFit:
    """Re-estimate sparsity and covariance under another bandwidth rule."""
    sp = _sparsity_on(fit.design, fit.response, fit.tau, rule, alpha)
    return replace(fit, sparsity=sp, covariance=_covariance(fit.design, sp.values, fit.tau, fit.n))


def backward_eliminate(series, tau: float, p_max: int,
                       rule: BandwidthRule | str = BandwidthRule.HALL_SHEATHER,
                       level: float = 0.05, alpha: float = 0.05) -> QarFit:
    """Drop insignificant lags one at a time, starting from QAR(p_max).

    Each round removes the lag with the largest two-sided normal p-value if
    it exceeds ``level`` (ties go to the larger lag) and refits on the same
    sample.  The intercept is always kept.
    """
    if p_max < 1:
        raise ValidationError("p_max must be at least 1")
    if not 0.0 < level < 1.0:
        raise ValidationError("level must lie in (0, 1)")
    lags = list(range(1, p_max + 1))
    while True:
        fit = fit_qar(series, tau, p_max, rule, alpha, lags=lags, start=p_max)
        if not lags:
            return fit
        pvals = fit.p_values()[1:]
        worst = float(pvals.max())
        if worst <= level:
            return fit
        drop = max(i for i, pv in enumerate(pvals) if pv == worst)
        del lags[drop]


def identify_order(correlogram: Correlogram) -> int:
    """Largest lag whose partial autocorrelation falls outside its band."""
    hits = np.flatnonzero(correlogram.significant)
    return int(correlogram.lags[hits[-1]]) if hits.size else 0


def check_series_length(series, needed: int) -> np.ndarray:
    y = as_series(series)
    if y.size < needed:
        raise InvalidSeries(f"series has {y.size} observations, need at least {needed}")
    return y
