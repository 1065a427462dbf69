"""Linear quantile regression and ordinary least squares.

The quantile fit solves the dual of the check-loss linear program

    max  y'a   subject to  X'a = (1 - tau) X'1,  0 <= a <= 1

with a primal-dual interior-point method (Frisch-Newton with a Mehrotra
predictor-corrector step).  The approximate interior solution is then
rounded to a basic solution: the ``d`` observations with the smallest
residuals are interpolated and the resulting vertex is certified optimal by
the subgradient condition.  When the certificate fails (typically a
non-unique optimum) the vertex is recovered with the HiGHS dual simplex.

References
----------
.. [1] Portnoy, S. and Koenker, R. (1997). "The Gaussian hare and the
       Laplacian tortoise." *Statistical Science* 12: 279-300.
.. [2] Koenker, R. (2005). *Quantile Regression*. Cambridge University Press.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np
from scipy import optimize, sparse

from quantcorr.errors import InvalidSeries, NonConvergence, RankDeficient
from quantcorr.numerics import as_tau, empirical_quantile, rho

MAX_ITER = 200
GAP_TOL = 1e-9
_STEP_FRACTION = 0.99995
_CERT_TOL = 1e-9


@dataclass(frozen=True)
class QuantileFit:
    tau: float
    coefficients: np.ndarray
    residuals: np.ndarray
    objective: float
    iterations: int = 0
    method: str = "interior-point"


@dataclass(frozen=True)
class LeastSquaresFit:
    coefficients: np.ndarray
    residuals: np.ndarray
    mean_squared_residual: float


def _check_design(design, response):
    X = np.asarray(design, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    y = np.asarray(response, dtype=float).reshape(-1)
    n, d = X.shape
    if y.size != n:
        raise InvalidSeries(f"response has {y.size} rows, design has {n}")
    if n < d:
        raise RankDeficient(f"design has fewer rows ({n}) than columns ({d})")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise InvalidSeries("design or response contains non-finite values")
    if np.linalg.matrix_rank(X) < d:
        raise RankDeficient("design columns are linearly dependent")
    return X, y


@numba.njit(cache=True)
def _step(v, dv):
    best = 1e20
    for i in range(v.size):
        if dv[i] < 0.0:
            ratio = -v[i] / dv[i]
            if ratio < best:
                best = ratio
    return best


@numba.njit(cache=True)
def _interior_point_kernel(X, y, tau, max_iter, tol):
    n, d = X.shape
    A = X.T.copy()
    c = -y
    b = (1.0 - tau) * A.sum(axis=1)
    x = np.full(n, 1.0 - tau)
    s = np.full(n, tau)
    lam = -np.linalg.solve(A @ X, A @ y)
    r = c - X @ lam
    # strictly interior dual start, keeping z - w = r
    offset = max(np.mean(np.abs(r)), 1.0) * 0.5
    z = np.maximum(r, 0.0) + offset
    w = z - r
    gap = c @ x - b @ lam + w.sum()
    it = 0
    status = 0
    while gap > tol * n and it < max_iter:
        it += 1
        q = 1.0 / (z / x + w / s)
        r = z - w
        Q = (A * q) @ X
        rhs = A @ (q * r)
        dlam = np.linalg.solve(Q, rhs)
        dx = q * (X @ dlam - r)
        ds = -dx
        dz = -z * (dx / x + 1.0)
        dw = -w * (ds / s + 1.0)
        fp = min(_STEP_FRACTION * min(_step(x, dx), _step(s, ds)), 1.0)
        fd = min(_STEP_FRACTION * min(_step(w, dw), _step(z, dz)), 1.0)
        if min(fp, fd) < 1.0:
            mu = z @ x + w @ s
            g = (z + fd * dz) @ (x + fp * dx) + (w + fd * dw) @ (s + fp * ds)
            mu = mu * (g / mu) ** 3 / (2.0 * n)
            xinv = 1.0 / x
            sinv = 1.0 / s
            dxdz = dx * dz * xinv
            dsdw = ds * dw * sinv
            xi = mu * (xinv - sinv)
            rhs = rhs + A @ (q * (dxdz - dsdw - xi))
            dlam = np.linalg.solve(Q, rhs)
            dx = q * (X @ dlam + xi - r - dxdz + dsdw)
            ds = -dx
            dz = mu * xinv - z - xinv * z * dx - dxdz
            dw = mu * sinv - w - sinv * w * ds - dsdw
            fp = min(_STEP_FRACTION * min(_step(x, dx), _step(s, ds)), 1.0)
            fd = min(_STEP_FRACTION * min(_step(w, dw), _step(z, dz)), 1.0)
        x = x + fp * dx
        s = s + fp * ds
        lam = lam + fd * dlam
        z = z + fd * dz
        w = w + fd * dw
        gap = c @ x - b @ lam + w.sum()
        if not np.isfinite(gap):
            status = 2
            break
    if status == 0 and gap > tol * n:
        status = 1
    return -lam, it, gap / n, status


def _interior_point(X, y, tau, max_iter=MAX_ITER, tol=GAP_TOL):
    """Return (beta, iterations) for the scaled problem."""
    beta, it, gap, status = _interior_point_kernel(
        np.ascontiguousarray(X), np.ascontiguousarray(y), float(tau), int(max_iter), float(tol))
    if status:
        raise NonConvergence(
            f"interior point stopped after {it} iterations with normalized gap {gap:.3g} "
            f"(budget {max_iter}, tolerance {tol:g})", iterations=int(it), gap=float(gap))
    return beta, int(it)


def _basis_from(X, order):
    """First ``d`` rows in ``order`` that form a nonsingular square system."""
    d = X.shape[1]
    head = order[:d]
    if np.linalg.cond(X[head]) < 1e12:
        return head
    chosen: list[int] = []
    for i in order:
        trial = chosen + [int(i)]
        if np.linalg.matrix_rank(X[trial], tol=1e-10) == len(trial):
            chosen = trial
            if len(chosen) == d:
                break
    return np.asarray(chosen)


def _certify(X, y, tau, basis):
    """Solve the basic system and test the subgradient optimality condition."""
    Xh = X[basis]
    beta = np.linalg.solve(Xh, y[basis])
    resid = y - X @ beta
    resid[basis] = 0.0
    nonbasic = np.ones(y.size, dtype=bool)
    nonbasic[basis] = False
    psi = tau - (resid[nonbasic] < 0.0)
    xi = np.linalg.solve(Xh.T, X[nonbasic].T @ psi)
    ok = bool(np.all(xi >= -tau - _CERT_TOL) and np.all(xi <= 1.0 - tau + _CERT_TOL))
    return beta, ok


def _simplex(X, y, tau):
    n, d = X.shape
    cost = np.concatenate([np.zeros(d), np.full(n, tau), np.full(n, 1.0 - tau)])
    eye = sparse.identity(n, format="csr")
    a_eq = sparse.hstack([sparse.csr_matrix(X), eye, -eye], format="csr")
    bounds = [(None, None)] * d + [(0, None)] * (2 * n)
    res = optimize.linprog(cost, A_eq=a_eq, b_eq=y, bounds=bounds, method="highs-ds")
    if not res.success:
        raise NonConvergence(f"simplex fallback failed: {res.message}")
    return res.x[:d]


def _snap(resid, scale):
    out = resid.copy()
    out[np.abs(out) <= 1e-10 * scale] = 0.0
    return out


def fit_quantile(design, response, tau: float) -> QuantileFit:
    """Minimize ``sum(rho_tau(y - X b))`` over ``b``.

    Parameters
    ----------
    design : array_like, shape (n, d)
        Regressors; include a column of ones for an intercept.
    response : array_like, shape (n,)
    tau : float
        Quantile level in (0, 1).

    Returns
    -------
    QuantileFit
        A basic optimal solution.  Residuals of interpolated observations
        are exactly zero, so ``#{r < 0} <= n tau <= #{r <= 0}`` holds.

    Raises
    ------
    RankDeficient
        If the design columns are linearly dependent.
    NonConvergence
        If the interior-point iteration exhausts its budget.
    """
    tau = as_tau(tau)
    X, y = _check_design(design, response)
    n, d = X.shape
    scale = float(np.mean(np.abs(y - np.median(y))))
    if not scale > 0:
        scale = max(float(np.max(np.abs(y))), 1.0)

    if d == 1 and np.all(X[:, 0] == 1.0):
        beta = np.array([empirical_quantile(y, tau)])
        resid = y - beta[0]
        return QuantileFit(tau, beta, resid, float(np.sum(rho(resid, tau))), 0, "order-statistic")

    beta_ip, it = _interior_point(X, y / scale, tau)
    order = np.argsort(np.abs(y / scale - X @ beta_ip), kind="stable")
    basis = _basis_from(X, order)
    method = "interior-point"
    if basis.size == d:
        beta, ok = _certify(X, y, tau, basis)
    else:
        ok = False
    if not ok:
        beta = _simplex(X, y, tau)
        method = "simplex"
    resid = _snap(y - X @ beta, scale)
    if method == "interior-point":
        resid[basis] = 0.0
    return QuantileFit(tau, beta, resid, float(np.sum(rho(resid, tau))), it, method)


def fit_least_squares(design, response) -> LeastSquaresFit:
    """Ordinary least squares with an explicit rank check."""
    X, y = _check_design(design, response)
    beta, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ beta
    return LeastSquaresFit(beta, resid, float(np.mean(resid ** 2)))
