from __future__ import annotations

import itertools

import numpy as np
import pytest
from scipy import optimize

from quantcorr.errors import InvalidSeries, NonConvergence, RankDeficient
from quantcorr.numerics import empirical_quantile, rho
from quantcorr.quantreg import _interior_point, fit_least_squares, fit_quantile


def brute_force_line(x, y, tau):
    """Minimum check loss over all lines through two observations."""
    best = np.inf
    for i, j in itertools.combinations(range(x.size), 2):
        if x[i] == x[j]:
            continue
        slope = (y[j] - y[i]) / (x[j] - x[i])
        icpt = y[i] - slope * x[i]
        best = min(best, float(np.sum(rho(y - icpt - slope * x, tau))))
    return best


def lp_objective(X, y, tau):
    n, d = X.shape
    cost = np.concatenate([np.zeros(d), np.full(n, tau), np.full(n, 1 - tau)])
    a_eq = np.hstack([X, np.eye(n), -np.eye(n)])
    res = optimize.linprog(cost, A_eq=a_eq, b_eq=y, bounds=[(None, None)] * d + [(0, None)] * (2 * n),
                           method="highs")
    return res.fun


@pytest.fixture
def design(rng):
    n = 80
    X = np.column_stack([np.ones(n), rng.standard_normal((n, 2))])
    y = X @ np.array([1.0, 2.0, -0.5]) + rng.standard_t(4, n)
    return X, y


class TestOptimality:
    def test_matches_brute_force_line(self, rng):
        for _ in range(25):
            n = int(rng.integers(5, 25))
            x = rng.standard_normal(n)
            y = 1.0 + x + rng.standard_normal(n)
            tau = float(rng.uniform(0.1, 0.9))
            fit = fit_quantile(np.column_stack([np.ones(n), x]), y, tau)
            assert fit.objective == pytest.approx(brute_force_line(x, y, tau), rel=1e-9, abs=1e-12)

    def test_matches_linear_program(self, rng):
        for _ in range(30):
            n = int(rng.integers(10, 120))
            d = int(rng.integers(2, 6))
            X = np.column_stack([np.ones(n), rng.standard_normal((n, d - 1))])
            y = X @ rng.standard_normal(d) + rng.standard_cauchy(n)
            tau = float(rng.uniform(0.05, 0.95))
            assert fit_quantile(X, y, tau).objective == pytest.approx(lp_objective(X, y, tau), rel=1e-9)

    def test_sign_counts(self, rng):
        for _ in range(300):
            n = int(rng.integers(6, 60))
            d = int(rng.integers(1, 4))
            X = np.column_stack([np.ones(n), rng.standard_normal((n, d - 1))])
            y = rng.standard_normal(n)
            tau = float(rng.uniform(0.02, 0.98))
            r = fit_quantile(X, y, tau).residuals
            assert np.sum(r < 0) <= n * tau + 1e-9 <= np.sum(r <= 0) + 2e-9
            # a basic solution interpolates at least d observations
            assert np.sum(r == 0) >= d

    def test_tied_responses(self):
        X = np.column_stack([np.ones(12), np.repeat([0.0, 1.0, 2.0], 4)])
        y = np.repeat([1.0, 2.0, 3.0], 4)
        fit = fit_quantile(X, y, 0.5)
        np.testing.assert_allclose(fit.coefficients, [1.0, 1.0], atol=1e-9)
        assert fit.objective == pytest.approx(0.0, abs=1e-12)


class TestStructure:
    def test_intercept_only_is_empirical_quantile(self, rng):
        y = rng.standard_normal(41)
        for tau in (0.1, 0.5, 0.77):
            fit = fit_quantile(np.ones((41, 1)), y, tau)
            assert fit.coefficients[0] == empirical_quantile(y, tau)
            assert fit.method == "order-statistic"

    def test_residuals_consistent(self, design):
        X, y = design
        fit = fit_quantile(X, y, 0.3)
        np.testing.assert_allclose(fit.residuals, y - X @ fit.coefficients, atol=1e-9)

    def test_equivariance(self, design):
        X, y = design
        base = fit_quantile(X, y, 0.4).coefficients
        gamma = np.array([0.5, -1.0, 2.0])
        shifted = fit_quantile(X, 3.0 * y + X @ gamma, 0.4).coefficients
        np.testing.assert_allclose(shifted, 3.0 * base + gamma, atol=1e-8)
        flipped = fit_quantile(X, -y, 0.6).coefficients
        np.testing.assert_allclose(flipped, -base, atol=1e-8)

    def test_monotone_in_tau_at_design_mean(self, design):
        X, y = design
        xbar = X.mean(axis=0)
        fitted = [xbar @ fit_quantile(X, y, t).coefficients for t in (0.1, 0.3, 0.5, 0.7, 0.9)]
        assert all(a <= b for a, b in zip(fitted, fitted[1:]))


class TestErrors:
    def test_rank_deficient(self, rng):
        x = rng.standard_normal(20)
        X = np.column_stack([np.ones(20), x, 2.0 * x])
        with pytest.raises(RankDeficient):
            fit_quantile(X, rng.standard_normal(20), 0.5)
        with pytest.raises(RankDeficient):
            fit_least_squares(X, rng.standard_normal(20))

    def test_too_few_rows(self):
        with pytest.raises(RankDeficient):
            fit_quantile(np.ones((1, 2)), np.ones(1), 0.5)

    def test_nonfinite(self):
        with pytest.raises(InvalidSeries):
            fit_quantile(np.ones((3, 1)), np.array([1.0, np.inf, 2.0]), 0.5)

    def test_budget_exhaustion_reports_gap(self, design):
        X, y = design
        with pytest.raises(NonConvergence) as info:
            _interior_point(X, y, 0.5, max_iter=1)
        assert info.value.iterations == 1
        assert info.value.gap > 0


class TestLeastSquares:
    def test_normal_equations(self, design):
        X, y = design
        fit = fit_least_squares(X, y)
        np.testing.assert_allclose(fit.coefficients, np.linalg.solve(X.T @ X, X.T @ y), rtol=1e-10)
        assert fit.mean_squared_residual == pytest.approx(np.mean(fit.residuals ** 2))
        np.testing.assert_allclose(X.T @ fit.residuals, 0.0, atol=1e-9)
