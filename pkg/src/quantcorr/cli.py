"""Command-line front end.

Exit codes: 0 success, 2 invalid input or usage, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import sys
from typing import Sequence

import numpy as np

from quantcorr.bandwidth import ALL_RULES, BandwidthRule
from quantcorr.correlation import qcor_estimate, qpcor_estimate
from quantcorr.csvio import TRANSFORMS, ColumnSpec, read_columns, read_series, write_table
from quantcorr.diagnostics import box_pierce, qacf_residuals
from quantcorr.errors import NumericalError, ValidationError
from quantcorr.qar import QarFit, backward_eliminate, fit_qar, identify_order, qpacf
from quantcorr.simulation import EXPERIMENTS, ExperimentReport, run_experiment

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NUMERICAL = 3


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "yes" if value else "no"
    if isinstance(value, (float, np.floating)):
        return f"{value:.4f}"
    return str(value)


def render_table(header: Sequence[str], rows: Sequence[Sequence]) -> str:
    """Right-aligned text table with four-decimal floats."""
    text = [[_fmt(v) for v in row] for row in rows]
    widths = [max([len(h)] + [len(r[i]) for r in text]) for i, h in enumerate(header)]
    lines = ["  ".join(h.rjust(w) for h, w in zip(header, widths))]
    lines += ["  ".join(v.rjust(w) for v, w in zip(r, widths)) for r in text]
    return "\n".join(lines) + "\n"


def _emit(args, header, rows, comments=()):
    sys.stdout.write(render_table(header, rows))
    if args.out:
        write_table(args.out, header, rows, comments)


def _series(args) -> np.ndarray:
    return read_series(ColumnSpec(args.file, args.column, args.transform))


def cmd_qcor(args) -> int:
    y, x = read_columns(args.file, [args.y, args.x])
    rows = []
    for tau in args.tau:
        est = qcor_estimate(y, x, tau, args.bandwidth, args.alpha)
        rows.append((tau, est.value, est.asymptotic_variance, est.std_error, est.band, est.n))
    _emit(args, ["tau", "qcor", "variance", "std_error", "band", "n"], rows)
    return EXIT_OK


def cmd_qpcor(args) -> int:
    cols = read_columns(args.file, [args.y, args.x] + list(args.z))
    y, x = cols[0], cols[1]
    z = np.column_stack(cols[2:]) if len(cols) > 2 else None
    rows = []
    for tau in args.tau:
        est = qpcor_estimate(y, x, z, tau, args.bandwidth, args.alpha)
        rows.append((tau, est.value, est.asymptotic_variance, est.std_error, est.band, est.n))
    _emit(args, ["tau", "qpcor", "variance", "std_error", "band", "n"], rows)
    return EXIT_OK


def _correlogram_rows(cg):
    return [(cg.tau, int(k), v, var, b, bool(abs(v) > b))
            for k, v, var, b in zip(cg.lags, cg.values, cg.variances, cg.band)]


CORRELOGRAM_HEADER = ["tau", "lag", "value", "variance", "band", "significant"]


def cmd_qpacf(args) -> int:
    y = _series(args)
    rows = []
    for tau in args.tau:
        rows += _correlogram_rows(qpacf(y, tau, args.max_lag, args.bandwidth, args.alpha))
    _emit(args, CORRELOGRAM_HEADER, rows)
    return EXIT_OK


def _coefficient_rows(fit: QarFit):
    names = ["intercept"] + [f"lag{l}" for l in fit.lags]
    pvals = fit.p_values()
    return [(fit.tau, name, c, se, pv)
            for name, c, se, pv in zip(names, fit.coefficients, fit.std_errors, pvals)]


COEFFICIENT_HEADER = ["tau", "term", "coefficient", "std_error", "p_value"]


def cmd_fit(args) -> int:
    y = _series(args)
    rows = []
    for tau in args.tau:
        if args.eliminate:
            fit = backward_eliminate(y, tau, args.p, args.bandwidth, args.level, args.alpha)
        else:
            fit = fit_qar(y, tau, args.p, args.bandwidth, args.alpha)
        rows += _coefficient_rows(fit)
    _emit(args, COEFFICIENT_HEADER, rows)
    return EXIT_OK


def format_model(fit: QarFit) -> str:
    """Fitted quantile equation with standard errors as parenthesised subscripts."""
    se = fit.std_errors
    parts = [f"{fit.coefficients[0]:.4f}_({se[0]:.4f})"]
    for j, lag in enumerate(fit.lags, start=1):
        c = fit.coefficients[j]
        sign = "-" if c < 0 else "+"
        parts.append(f"{sign} {abs(c):.4f}_({se[j]:.4f}) y[t-{lag}]")
    return f"Q_{fit.tau:g}(y[t] | past) = " + " ".join(parts)


def cmd_diagnose(args) -> int:
    """Identify, fit, refine and check a QAR model at each quantile level."""
    y = _series(args)
    out = sys.stdout
    rows = []
    for tau in args.tau:
        cg = qpacf(y, tau, args.max_lag, args.bandwidth, args.alpha)
        p = identify_order(cg) if args.p is None else args.p
        if p >= 1:
            fit = backward_eliminate(y, tau, p, args.bandwidth, args.level, args.alpha)
        else:
            fit = fit_qar(y, tau, 0, args.bandwidth, args.alpha)
        resid = qacf_residuals(fit, args.K)
        test = box_pierce(resid, fit.n, len(fit.lags))

        out.write(f"tau = {tau:g}\n")
        out.write(f"sample QPACF (order used: {p})\n")
        out.write(render_table(CORRELOGRAM_HEADER[1:], [r[1:] for r in _correlogram_rows(cg)]))
        out.write(format_model(fit) + "\n")
        out.write("sample QACF of residuals\n")
        out.write(render_table(CORRELOGRAM_HEADER[1:], [r[1:] for r in _correlogram_rows(resid)]))
        out.write(f"Q_BP({test.K}) = {test.statistic:.4f}, df = {test.df}, p-value = {test.p_value:.4f}\n\n")

        for r in _correlogram_rows(cg):
            rows.append(("qpacf", tau, f"lag{r[1]}", r[2], "", r[4], r[5], ""))
        for r in _coefficient_rows(fit):
            rows.append(("coefficient", tau, r[1], r[2], r[3], "", "", r[4]))
        for r in _correlogram_rows(resid):
            rows.append(("residual_qacf", tau, f"lag{r[1]}", r[2], "", r[4], r[5], ""))
        rows.append(("portmanteau", tau, f"Q_BP({test.K})", test.statistic, "", "", "", test.p_value))
    if args.out:
        write_table(args.out, ["section", "tau", "term", "value", "std_error", "band",
                               "significant", "p_value"], rows)
    return EXIT_OK


def cmd_simulate(args) -> int:
    rules = args.rule or list(ALL_RULES)
    n_list = args.n or [50, 100, 200]
    report: ExperimentReport = run_experiment(
        args.experiment, n_list=n_list, tau_list=args.tau or None, reps=args.reps,
        rules=rules, seed=args.seed, workers=args.workers)
    sys.stdout.write(report.to_text())
    if args.out:
        write_table(args.out, list(ExperimentReport.COLUMNS), report.rows(), report.header_lines())
    return EXIT_OK


def _tau(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not 0.0 < value < 1.0:
        raise argparse.ArgumentTypeError(f"quantile level must lie in (0, 1): {text}")
    return value


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be at least 1: {text}")
    return value


def _nonnegative_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be non-negative: {text}")
    return value


def _level(text: str) -> float:
    value = float(text)
    if not 0.0 < value < 1.0:
        raise argparse.ArgumentTypeError(f"must lie in (0, 1): {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="quantcorr",
        description="Quantile correlations and quantile autoregression.",
        epilog="Exit codes: 0 success, 2 invalid input, 3 numerical failure.")
    sub = parser.add_subparsers(dest="command", required=True)
    rules = [r.value for r in BandwidthRule]

    def common(p, taus_default=(0.5,)):
        p.add_argument("--tau", type=_tau, action="append",
                       help=f"quantile level, repeatable (default {', '.join(map(str, taus_default))})")
        p.add_argument("--bandwidth", choices=rules, default="hs")
        p.add_argument("--alpha", type=_level, default=0.05, help="Hall-Sheather level")
        p.add_argument("--out", help="also write the table to this CSV file")
        p.set_defaults(tau_default=list(taus_default))

    def series_input(p):
        p.add_argument("file", help="CSV file")
        p.add_argument("--column", default="0", help="column name or 0-based index")
        p.add_argument("--transform", choices=TRANSFORMS, default="none")

    p = sub.add_parser("qcor", help="quantile correlation with its standard error")
    p.add_argument("file")
    p.add_argument("--y", required=True, help="quantile-side column")
    p.add_argument("--x", required=True)
    common(p)
    p.set_defaults(func=cmd_qcor)

    p = sub.add_parser("qpcor", help="quantile partial correlation given controls")
    p.add_argument("file")
    p.add_argument("--y", required=True)
    p.add_argument("--x", required=True)
    p.add_argument("--z", action="append", default=[], help="control column, repeatable")
    common(p)
    p.set_defaults(func=cmd_qpcor)

    p = sub.add_parser("qpacf", help="sample quantile partial autocorrelations")
    series_input(p)
    p.add_argument("--max-lag", type=_positive_int, default=18)
    common(p)
    p.set_defaults(func=cmd_qpacf)

    p = sub.add_parser("fit", help="fit a QAR(p) model")
    series_input(p)
    p.add_argument("--p", type=_nonnegative_int, required=True, help="autoregressive order")
    p.add_argument("--eliminate", action="store_true", help="backward lag elimination from order p")
    p.add_argument("--level", type=_level, default=0.05)
    common(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("diagnose", help="identify, fit, refine and check a QAR model")
    series_input(p)
    p.add_argument("--max-lag", type=_positive_int, default=18, help="QPACF lags for identification")
    p.add_argument("--p", type=_nonnegative_int, default=None,
                   help="starting order (default: largest significant QPACF lag)")
    p.add_argument("--K", type=_positive_int, default=18, help="portmanteau lags")
    p.add_argument("--level", type=_level, default=0.05)
    common(p)
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("simulate", help="run a Monte Carlo experiment")
    p.add_argument("--experiment", choices=EXPERIMENTS, required=True)
    p.add_argument("--n", type=_positive_int, action="append", help="sample size, repeatable")
    p.add_argument("--tau", type=_tau, action="append")
    p.add_argument("--reps", type=_positive_int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--rule", choices=rules, action="append",
                   help="bandwidth rule for ASD columns, repeatable (default all)")
    p.add_argument("--workers", type=_positive_int, default=1)
    p.add_argument("--out")
    p.set_defaults(func=cmd_simulate, tau_default=None)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.tau is None and args.tau_default is not None:
        args.tau = args.tau_default
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
