"""Seeded data generators and Monte Carlo experiment drivers.

Every replication draws from its own stream, keyed by ``(seed, n, rep)``,
so results do not depend on how replications are scheduled across
workers.  Within a replication the same data serve every quantile level
and bandwidth rule.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from typing import Sequence

import numpy as np
from scipy.signal import lfilter

from quantcorr.bandwidth import ALL_RULES, BandwidthRule
from quantcorr.correlation import qcor, qcor_variance, qpcor_with_variances
from quantcorr.diagnostics import box_pierce, qacf_residuals
from quantcorr.errors import NonStationary, ValidationError
from quantcorr.numerics import normal_pdf, normal_ppf
from quantcorr.qar import BAND_Z, fit_qar, qpacf_at, with_rule

BURN_IN = 200
RNG_NAME = "numpy PCG64 via SeedSequence(seed, spawn_key=(n, rep[, phi index]))"
TRIVARIATE_COV = np.array([[1.0, 0.5, 0.5], [0.5, 1.0, 0.5], [0.5, 0.5, 1.0]])
EXPERIMENTS = ("1", "2", "3", "4", "5", "figure1")

_DEFAULT_TAUS = (0.25, 0.5, 0.75)
_FIGURE1_TAUS = (0.2, 0.4, 0.6, 0.8)
AR_INTERCEPT = 0.1
AR_SLOPE = 0.5


def rng_stream(seed: int, *stream_id: int) -> np.random.Generator:
    """Independent generator for ``(seed, stream_id)``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(s) for s in stream_id))
    return np.random.Generator(np.random.PCG64(ss))


def gen_trivariate_normal(n: int, rng: np.random.Generator):
    """Draw ``(X, Y, Z)`` with unit variances and pairwise correlation 0.5."""
    if n < 1:
        raise ValidationError("n must be at least 1")
    draws = rng.standard_normal((n, 3)) @ np.linalg.cholesky(TRIVARIATE_COV).T
    return draws[:, 0], draws[:, 1], draws[:, 2]


def random_coefficient(u):
    """``a(u) = max(0.8 - 1.6 u, 0)``."""
    return np.maximum(0.8 - 1.6 * np.asarray(u, dtype=float), 0.0)


def gen_random_coef_qar1(n: int, rng: np.random.Generator, burn_in: int = BURN_IN) -> np.ndarray:
    """Simulate ``y_t = Phi^{-1}(u_t) + a(u_t) y_{t-1}`` with uniform ``u_t``."""
    if n < 1:
        raise ValidationError("n must be at least 1")
    u = rng.random(n + burn_in)
    shock = normal_ppf(u)
    coef = random_coefficient(u)
    y = np.empty(u.size)
    prev = 0.0
    for t in range(u.size):
        prev = shock[t] + coef[t] * prev
        y[t] = prev
    return y[burn_in:]


def check_stationary(coefficients: Sequence[float]) -> None:
    """Raise :class:`NonStationary` unless all AR roots lie outside the unit circle."""
    phi = np.asarray(coefficients, dtype=float)
    if phi.size == 0:
        return
    # roots of z^p - phi_1 z^(p-1) - ... - phi_p are inverse AR roots
    inverse_roots = np.roots(np.concatenate([[1.0], -phi]))
    if np.any(np.abs(inverse_roots) >= 1.0):
        raise NonStationary(f"AR coefficients {phi.tolist()} are not stationary")


def gen_ar(n: int, intercept: float, coefficients: Sequence[float], rng: np.random.Generator,
           burn_in: int = BURN_IN) -> np.ndarray:
    """Gaussian AR(p) path ``y_t = c + sum(phi_i y_{t-i}) + e_t`` after a burn-in."""
    if n < 1:
        raise ValidationError("n must be at least 1")
    check_stationary(coefficients)
    e = rng.standard_normal(n + burn_in)
    a = np.concatenate([[1.0], -np.asarray(coefficients, dtype=float)])
    return lfilter([1.0], a, intercept + e)[burn_in:]


@dataclass(frozen=True)
class Cell:
    n: int
    tau: float
    setting: str
    statistic: str
    measure: str
    value: float
    mc_se: float


@dataclass(frozen=True)
class ExperimentReport:
    experiment: str
    reps: int
    seed: int
    cells: tuple[Cell, ...]
    metadata: dict = field(default_factory=dict)

    COLUMNS = ("n", "tau", "setting", "statistic", "measure", "value", "mc_se")

    def get(self, n: int, tau: float, statistic: str, measure: str, setting: str = "") -> Cell:
        for c in self.cells:
            if (c.n == n and math.isclose(c.tau, tau) and c.statistic == statistic
                    and c.measure == measure and c.setting == setting):
                return c
        raise KeyError((n, tau, setting, statistic, measure))

    def rows(self) -> list[tuple]:
        return [(c.n, c.tau, c.setting, c.statistic, c.measure, c.value, c.mc_se) for c in self.cells]

    def header_lines(self) -> list[str]:
        meta = {"experiment": self.experiment, "reps": self.reps, "seed": self.seed, **self.metadata}
        return [f"{k}: {v}" for k, v in meta.items()]

    def to_text(self) -> str:
        """Aligned table with one row per (n, tau, setting, statistic)."""
        measures: list[str] = []
        for c in self.cells:
            if c.measure not in measures:
                measures.append(c.measure)
        groups: dict[tuple, dict[str, Cell]] = {}
        for c in self.cells:
            groups.setdefault((c.n, c.tau, c.setting, c.statistic), {})[c.measure] = c
        head = ["n", "tau", "setting", "statistic"] + measures
        body = []
        for (n, tau, setting, stat), cells in groups.items():
            row = [str(n), f"{tau:g}", setting or "-", stat]
            row += [f"{cells[m].value:.4f}" if m in cells else "" for m in measures]
            body.append(row)
        widths = [max(len(r[i]) for r in [head] + body) for i in range(len(head))]
        lines = ["# " + h for h in self.header_lines()]
        lines.append("  ".join(h.rjust(w) for h, w in zip(head, widths)))
        lines += ["  ".join(v.rjust(w) for v, w in zip(r, widths)) for r in body]
        return "\n".join(lines) + "\n"


def _truth(experiment, tau, statistic):
    if experiment == "1":
        qc = 0.5 * normal_pdf(normal_ppf(tau)) / math.sqrt(tau - tau * tau)
        return qc if statistic == "qcor" else 2.0 * qc / 3.0
    if experiment == "3":
        return AR_INTERCEPT + normal_ppf(tau) if statistic == "phi0" else AR_SLOPE
    return 0.0


def _replicate(experiment, n, rep, seed, taus, rules, options):
    """All per-replication quantities, keyed by (tau, setting, statistic, quantity)."""
    out: dict[tuple, float] = {}
    rng = rng_stream(seed, n, rep)
    if experiment == "1":
        x, y, z = gen_trivariate_normal(n, rng)
        for tau in taus:
            out[(tau, "", "qcor", "est")] = qcor(y, x, tau)
            for r in rules:
                out[(tau, "", "qcor", "asd:" + r.value)] = math.sqrt(qcor_variance(y, x, tau, r) / n)
            value, variances = qpcor_with_variances(y, x, z, tau, rules)
            out[(tau, "", "qpcor", "est")] = value
            for r, v in zip(rules, variances):
                out[(tau, "", "qpcor", "asd:" + r.value)] = math.sqrt(v / n)
        return out
    if experiment in ("2", "3", "4"):
        y = gen_ar(n, AR_INTERCEPT, [AR_SLOPE], rng)
        for tau in taus:
            if experiment == "2":
                lags = options["lags"]
                values, variances = qpacf_at(y, tau, lags, rules)
                for i, k in enumerate(lags):
                    stat = f"phi_{k}{k}"
                    out[(tau, "", stat, "est")] = values[i]
                    for r, v in zip(rules, variances):
                        out[(tau, "", stat, "asd:" + r.value)] = math.sqrt(v[i] / n)
                continue
            fit = fit_qar(y, tau, 1, rules[0])
            if experiment == "3":
                for j, stat in enumerate(("phi0", "phi1")):
                    out[(tau, "", stat, "est")] = fit.coefficients[j]
                for r in rules:
                    se = fit.std_errors if r is rules[0] else with_rule(fit, r).std_errors
                    for j, stat in enumerate(("phi0", "phi1")):
                        out[(tau, "", stat, "asd:" + r.value)] = se[j]
                continue
            lags = options["lags"]
            for r in rules:
                cg = qacf_residuals(fit, max(lags), r)
                for k in lags:
                    stat = f"r_{k}"
                    out[(tau, "", stat, "est")] = cg.values[k - 1]
                    out[(tau, "", stat, "asd:" + r.value)] = math.sqrt(cg.variances[k - 1] / n)
        return out
    if experiment == "5":
        K = options["K"]
        for i, phi in enumerate(options["phis"]):
            y = gen_ar(n, 0.0, [AR_SLOPE, phi], rng_stream(seed, n, rep, i))
            for tau in taus:
                fit = fit_qar(y, tau, 1, rules[0])
                test = box_pierce(qacf_residuals(fit, K), n, 1)
                out[(tau, f"phi={phi:g}", f"Q_BP({K})", "reject")] = float(test.p_value < options["level"])
        return out
    y = gen_random_coef_qar1(n, rng)
    max_lag = options["max_lag"]
    for tau in taus:
        values, variances = qpacf_at(y, tau, range(1, max_lag + 1), rules[:1])
        band = BAND_Z * np.sqrt(variances[0] / n)
        for k in range(1, max_lag + 1):
            stat = f"phi_{k}{k}"
            out[(tau, "", stat, "est")] = values[k - 1]
            out[(tau, "", stat, "flag")] = float(abs(values[k - 1]) > band[k - 1])
    return out


def _esd_se(x):
    """Large-sample standard error of the sample standard deviation."""
    r = x.size
    if r < 2:
        return float("nan")
    s2 = float(np.var(x, ddof=1))
    if s2 <= 0.0:
        return 0.0
    m4 = float(np.mean((x - x.mean()) ** 4))
    return math.sqrt(max(m4 - s2 * s2, 0.0) / (4.0 * s2 * r))


def _summarize(experiment, n, key, x):
    tau, setting, stat, quantity = key
    r = x.size
    sd = float(np.std(x, ddof=1)) if r > 1 else 0.0
    se_mean = sd / math.sqrt(r) if r > 1 else float("nan")
    mean = float(np.mean(x))
    if quantity == "est":
        if experiment == "figure1":
            return [Cell(n, tau, setting, stat, "MEAN", mean, se_mean)]
        return [Cell(n, tau, setting, stat, "BIAS", mean - _truth(experiment, tau, stat), se_mean),
                Cell(n, tau, setting, stat, "ESD", sd, _esd_se(x))]
    if quantity.startswith("asd:"):
        return [Cell(n, tau, setting, stat, "ASD_" + quantity[4:], mean, se_mean)]
    rate_se = math.sqrt(mean * (1.0 - mean) / r)
    name = "REJECT" if quantity == "reject" else "FLAG_RATE"
    return [Cell(n, tau, setting, stat, name, mean, rate_se)]


def run_experiment(experiment, n_list: Sequence[int] = (50, 100, 200),
                   tau_list: Sequence[float] | None = None, reps: int = 1000,
                   rules: Sequence[BandwidthRule | str] = ALL_RULES, seed: int = 0,
                   workers: int = 1, **options) -> ExperimentReport:
    """Run one simulation experiment and tabulate it.

    Parameters
    ----------
    experiment : {1, 2, 3, 4, 5, "figure1"}
        1: quantile correlation and partial correlation on trivariate normal
        data.  2: QPACF of an AR(1).  3: QAR(1) coefficient estimates.
        4: residual QACF after a QAR(1) fit.  5: size and power of the
        Box-Pierce test on AR(2) data fitted by QAR(1).  figure1: QPACF of
        the random-coefficient process.
    n_list, tau_list : sequences
        Grid of sample sizes and quantile levels.
    reps : int
        Replications per sample size.
    rules : sequence of BandwidthRule
        Bandwidth rules for the ASD columns; the first also drives the tests
        in experiment 5 and the bands in figure1.
    seed : int
    workers : int
        Processes used to run replications; results do not depend on it.
    **options
        ``lags`` (experiments 2 and 4), ``K``, ``phis``, ``level``
        (experiment 5), ``max_lag`` (figure1).

    Returns
    -------
    ExperimentReport
        Cells carry BIAS, ESD and ASD per rule, rejection rates, or (for
        figure1) mean values and flag rates, each with its Monte Carlo
        standard error.
    """
    experiment = str(experiment)
    if experiment not in EXPERIMENTS:
        raise ValidationError(f"unknown experiment {experiment!r}; choose from {', '.join(EXPERIMENTS)}")
    if reps < 1:
        raise ValidationError("reps must be at least 1")
    if workers < 1:
        raise ValidationError("workers must be at least 1")
    rules = tuple(BandwidthRule.coerce(r) for r in rules)
    if not rules:
        raise ValidationError("at least one bandwidth rule is required")
    if tau_list is None:
        tau_list = _FIGURE1_TAUS if experiment == "figure1" else _DEFAULT_TAUS
    taus = tuple(float(t) for t in tau_list)
    opts = {"lags": (2, 4, 6) if experiment == "2" else (1, 3, 5), "K": 6,
            "phis": (0.0, 0.2, 0.4), "level": 0.05, "max_lag": 10}
    unknown = set(options) - set(opts)
    if unknown:
        raise ValidationError(f"unknown options {sorted(unknown)}")
    opts.update(options)

    units = [(int(n), rep) for n in n_list for rep in range(reps)]
    job = partial(_run_unit, experiment, seed=int(seed), taus=taus, rules=rules, options=opts)
    if workers == 1:
        results = [job(u) for u in units]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(job, units, chunksize=max(1, len(units) // (4 * workers))))

    cells: list[Cell] = []
    for n in n_list:
        block = results[:reps]
        results = results[reps:]
        for key in block[0]:
            x = np.array([res[key] for res in block])
            cells += _summarize(experiment, int(n), key, x)
    meta = {"burn_in": BURN_IN, "rng": RNG_NAME, "rules": ",".join(r.value for r in rules)}
    return ExperimentReport(experiment, int(reps), int(seed), tuple(cells), meta)


def _run_unit(experiment, unit, seed, taus, rules, options):
    n, rep = unit
    return _replicate(experiment, n, rep, seed, taus, rules, options)
