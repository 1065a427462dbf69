"""Residual quantile autocorrelations and the Box-Pierce portmanteau test."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from quantcorr.bandwidth import BandwidthRule
from quantcorr.errors import DegreesOfFreedom, RankDeficient, ValidationError, ZeroVariance
from quantcorr.numerics import chi_square_sf, psi
from quantcorr.qar import Correlogram, QarFit, with_rule


@dataclass(frozen=True)
class PortmanteauResult:
    statistic: float
    K: int
    df: int
    p_value: float

    def rejects(self, level: float = 0.05) -> bool:
        return self.p_value < level


def _lagged_residuals(resid, max_lag, start):
    """Matrix with rows ``t = start..n-1`` and columns ``e[t - j]``, zero before the sample."""
    n = resid.size
    t = np.arange(start, n)
    out = np.zeros((t.size, max_lag))
    for j in range(1, max_lag + 1):
        ok = t - j >= 0
        out[ok, j - 1] = resid[t[ok] - j]
    return out


def qacf_residuals(fit: QarFit, max_lag: int, rule: BandwidthRule | str | None = None,
                   alpha: float = 0.05) -> Correlogram:
    """Quantile autocorrelations of QAR residuals at lags ``1..max_lag``.

    Parameters
    ----------
    fit : QarFit
    max_lag : int
        Largest lag ``K``; must be below ``n - start``.
    rule : BandwidthRule or str, optional
        Bandwidth for the density weights.  By default the sparsity
        estimates stored in ``fit`` are reused; another rule triggers a
        re-estimate on the same design.
    alpha : float

    Returns
    -------
    Correlogram
        ``covariance`` holds the full ``K x K`` asymptotic covariance, whose
        diagonal fills ``variances``.
    """
    n = fit.n
    if max_lag < 1 or max_lag >= n - fit.start:
        raise ValidationError(f"max_lag must lie in 1..{n - fit.start - 1}, got {max_lag}")
    if rule is not None and BandwidthRule.coerce(rule) is not fit.sparsity.rule:
        fit = with_rule(fit, rule, alpha)
    tau = fit.tau
    c = tau - tau * tau
    e = fit.residuals

    values = np.empty(max_lag)
    var_e = np.empty(max_lag)
    for k in range(1, max_lag + 1):
        current = e[k:]
        mu = float(np.sum(current)) / n
        var = float(np.sum((current - mu) ** 2)) / n
        if var <= 0.0:
            raise ZeroVariance(f"residuals have zero variance over lag {k}")
        var_e[k - 1] = var
        values[k - 1] = float(np.sum(psi(current, tau) * (e[:n - k] - mu))) / n / math.sqrt(c * var)

    z = fit.design
    dens = fit.sparsity.values
    lagged = _lagged_residuals(e, max_lag, fit.start)
    s40 = z.T @ z / n
    s41 = (z * dens[:, None]).T @ z / n
    s50 = lagged.T @ z / n
    s51 = (lagged * dens[:, None]).T @ z / n
    eet = lagged.T @ lagged / n
    try:
        g = np.linalg.solve(s41.T, s51.T).T
    except np.linalg.LinAlgError:
        raise RankDeficient("density-weighted Gram matrix is singular") from None
    cross = g @ s50.T
    m = eet + g @ s40 @ g.T - cross - cross.T
    scale = 1.0 / np.sqrt(var_e)
    omega = m * scale[:, None] * scale[None, :]
    omega = 0.5 * (omega + omega.T)
    variances = np.clip(np.diag(omega), 0.0, None)
    return Correlogram(tau, np.arange(1, max_lag + 1), values, variances, n, omega)


def box_pierce(correlogram: Correlogram, n: int | None = None, p: int = 0) -> PortmanteauResult:
    """Box-Pierce statistic ``n * sum(r_k^2)`` against chi-square with ``K - p`` df.

    ``p`` counts the estimated autoregressive slopes; for a subset model
    pass the number of retained lags.
    """
    n = correlogram.n if n is None else int(n)
    K = len(correlogram)
    df = K - int(p)
    if df < 1:
        raise DegreesOfFreedom(f"need K > p, got K={K}, p={p}")
    stat = float(n * np.sum(np.asarray(correlogram.values) ** 2))
    return PortmanteauResult(stat, K, df, chi_square_sf(stat, df))
