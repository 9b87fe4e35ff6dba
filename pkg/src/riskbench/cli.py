"""Command-line front-end.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric/calibration
error. Results go to stdout, diagnostics to stderr. The environment variable
``RISKBENCH_TABLE`` supplies the default calibration-table path.
"""
from __future__ import annotations

import argparse
import os
import sys

from . import estimators
from .backtest import BacktestConfig, ReplicationSummary, replication_study, rolling_backtest
from .calibration import (
    DEFAULT_MC_SAMPLES,
    DEFAULT_TOLERANCE,
    CalibrationTable,
    solve_unbiased_es_constant,
)
from .data_io import SCALES, SimulationSpec, load_returns_csv, simulate_series, write_report
from .errors import (
    CalibrationError,
    ConfigError,
    DataError,
    DomainError,
    EstimationError,
    IngestionError,
    OutputError,
    RiskbenchError,
    SizeError,
    TailError,
)
from .estimators import GaussianParams, canonical_method

TABLE_ENV_VAR = "RISKBENCH_TABLE"

_USAGE_ERRORS = (ConfigError,)
_DATA_ERRORS = (IngestionError, DataError, SizeError, OutputError)
_NUMERIC_ERRORS = (CalibrationError, TailError, EstimationError, DomainError)


def _default_table() -> str | None:
    return os.environ.get(TABLE_ENV_VAR) or None


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="riskbench",
        description="Value-at-Risk / Expected Shortfall estimation, calibration and backtesting",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    fmt = argparse.ArgumentDefaultsHelpFormatter

    cal = sub.add_parser("calibrate", formatter_class=fmt, help="solve the unbiased ES constant")
    cal.add_argument("--n", type=int, required=True, help="estimation window length")
    cal.add_argument("--alpha", type=float, required=True, help="risk level in (0,1)")
    cal.add_argument("--samples", type=int, default=DEFAULT_MC_SAMPLES, help="Monte Carlo sample size")
    cal.add_argument("--seed", type=int, default=0, help="random seed")
    cal.add_argument("--tol", type=float, default=DEFAULT_TOLERANCE, help="residual tolerance")
    cal.add_argument("--table", default=_default_table(), help="calibration table path to update")

    est = sub.add_parser("estimate", formatter_class=fmt, help="estimate VaR/ES on a CSV column")
    est.add_argument("--input", required=True, help="CSV file with a header row")
    est.add_argument("--column", required=True, help="column to read")
    est.add_argument("--scale", choices=SCALES, required=True, help="unit of the input returns")
    est.add_argument("--method", required=True, help="comma-separated method tags")
    est.add_argument("--measure", choices=("var", "es"), required=True, help="risk measure")
    est.add_argument("--alpha", type=float, required=True, help="risk level in (0,1)")
    est.add_argument("--table", default=_default_table(), help="calibration table path")
    est.add_argument("--gpd-q", type=float, default=0.3, help="GPD threshold quantile on returns")

    bt = sub.add_parser("backtest", formatter_class=fmt, help="rolling-window backtest")
    src = bt.add_mutually_exclusive_group(required=True)
    src.add_argument("--input", help="CSV file with a header row")
    src.add_argument("--simulate", action="store_true", help="backtest a simulated Gaussian series")
    bt.add_argument("--column", help="column to read (with --input)")
    bt.add_argument("--scale", choices=SCALES, help="unit of the input returns (with --input)")
    bt.add_argument("--mu", type=float, default=0.0, help="simulation mean (with --simulate)")
    bt.add_argument("--sigma", type=float, default=1.0, help="simulation sd (with --simulate)")
    bt.add_argument("--length", type=int, default=4000, help="simulated series length")
    bt.add_argument("--seed", type=int, default=0, help="simulation seed")
    bt.add_argument("--window", type=int, default=50, help="window length")
    bt.add_argument("--alpha", type=float, required=True, help="risk level in (0,1)")
    bt.add_argument("--methods", required=True, help="comma-separated method tags")
    bt.add_argument("--measure", choices=("var", "es", "both"), default="var", help="risk measure")
    bt.add_argument("--gpd-q", type=float, default=0.3, help="GPD threshold quantile on returns")
    bt.add_argument("--table", default=_default_table(), help="calibration table path")
    bt.add_argument("--auto-calibrate", action="store_true",
                    help="solve missing unbiased-ES entries on demand")
    bt.add_argument("--auto-samples", type=int, default=1_000_000,
                    help="Monte Carlo sample size for on-demand calibration")
    bt.add_argument("--out", help="write the report to this path")
    bt.add_argument("--format", choices=("json", "csv", "csv-long", "table"), default="table",
                    help="output format")

    sim = sub.add_parser("simulate", formatter_class=fmt, help="write a simulated Gaussian series")
    sim.add_argument("--mu", type=float, required=True, help="mean")
    sim.add_argument("--sigma", type=float, required=True, help="standard deviation")
    sim.add_argument("--length", type=int, required=True, help="series length")
    sim.add_argument("--seed", type=int, default=0, help="random seed")
    sim.add_argument("--out", help="CSV output path (stdout when omitted)")

    rep = sub.add_parser("replicate", formatter_class=fmt, help="replicated simulated backtests")
    rep.add_argument("--reps", type=int, required=True, help="number of replications")
    rep.add_argument("--length", type=int, required=True, help="series length per replication")
    rep.add_argument("--window", type=int, default=50, help="window length")
    rep.add_argument("--alpha", type=float, required=True, help="risk level in (0,1)")
    rep.add_argument("--mu", type=float, default=0.0, help="simulation mean")
    rep.add_argument("--sigma", type=float, default=1.0, help="simulation sd")
    rep.add_argument("--seed", type=int, default=0, help="base seed; replication i uses stream i")
    rep.add_argument("--methods", required=True, help="comma-separated method tags")
    rep.add_argument("--measure", choices=("var", "es", "both"), default="var", help="risk measure")
    rep.add_argument("--reference", default="gaussian_unbiased", help="RD/OR reference method")
    rep.add_argument("--gpd-q", type=float, default=0.3, help="GPD threshold quantile on returns")
    rep.add_argument("--table", default=_default_table(), help="calibration table path")
    rep.add_argument("--auto-calibrate", action="store_true",
                    help="solve missing unbiased-ES entries on demand")
    rep.add_argument("--auto-samples", type=int, default=1_000_000,
                    help="Monte Carlo sample size for on-demand calibration")
    rep.add_argument("--workers", type=int, default=1, help="parallel worker processes")
    rep.add_argument("--out", help="write the summary to this path")
    rep.add_argument("--format", choices=("json", "csv", "csv-long", "table"), default="table",
                    help="output format")
    return parser


def _split_methods(raw: str) -> tuple:
    tags = [t for t in (part.strip() for part in raw.split(",")) if t]
    if not tags:
        raise ConfigError("at least one method tag is required")
    return tuple(canonical_method(t) for t in tags)


def _maybe_autocalibrate(table, path, args, window, alpha, methods, measure):
    if measure not in ("es", "both") or "gaussian_unbiased" not in methods:
        return table
    if table is None:
        table = CalibrationTable()
    key = CalibrationTable.key(window, alpha)
    if key not in table.entries:
        if not args.auto_calibrate:
            # leave the lookup to fail with a calibration-missing error
            return table
        table.ensure(window, alpha, mc_samples=args.auto_samples, seed=args.seed)
        if path:
            table.save(path)
    return table


def _cmd_calibrate(args) -> int:
    entry = solve_unbiased_es_constant(args.n, args.alpha, args.samples, args.seed, args.tol)
    if args.table:
        table = CalibrationTable.load_or_new(args.table)
        table.add(entry)
        table.save(args.table)
        print(f"saved entry to {args.table}", file=sys.stderr)
    print(
        f"n={entry.n} alpha={entry.alpha:g} a_n={entry.a_n!r} b_n={entry.b_n!r} "
        f"residual={entry.residual:.3e} samples={entry.mc_samples} seed={entry.seed}"
    )
    return 0


def _cmd_estimate(args) -> int:
    methods = _split_methods(args.method)
    series = load_returns_csv(args.input, args.column, args.scale)
    table = CalibrationTable.load_or_new(args.table) if args.table else None
    print(f"series={series.name} n={len(series)} measure={args.measure} alpha={args.alpha:g}")
    for method in methods:
        if args.measure == "var":
            fn = estimators.VAR_FUNCTIONS[method]
            if method == "gpd":
                est = estimators.var_gpd(series.values, args.alpha, threshold_quantile=args.gpd_q)
            else:
                est = fn(series.values, args.alpha)
        else:
            if method not in estimators.ES_METHODS:
                raise ConfigError(
                    f"method {method!r} has no Expected Shortfall form; "
                    f"ES-capable methods: {', '.join(estimators.ES_METHODS)}"
                )
            if method == "gaussian_unbiased":
                est = estimators.es_gaussian_unbiased(series.values, args.alpha, table)
            elif method == "empirical":
                est = estimators.es_empirical(series.values, args.alpha)
            elif method == "gaussian":
                est = estimators.es_gaussian(series.values, args.alpha)
            elif method == "cornish_fisher":
                est = estimators.es_cornish_fisher(series.values, args.alpha)
            elif method == "gpd":
                est = estimators.es_gpd(series.values, args.alpha, threshold_quantile=args.gpd_q)
            else:  # mean
                est = estimators.mean_estimator(series.values)
        print(f"{method:18s} {est.measure:3s} capital={est.capital!r}")
    return 0


def _print_backtest_table(report) -> None:
    print(
        f"series={report.series_name} window={report.config.window} "
        f"alpha={report.config.alpha:g} windows={report.window_count} "
        f"evaluated={report.evaluated_points}"
    )
    header = f"{'method':18s} {'exceed':>7s} {'rate':>8s} {'bias':>10s} {'es_z':>10s} {'var_score':>12s} {'joint_score':>12s}"
    print(header)
    for tag in report.config.methods:
        r = report.methods[tag]
        if r.failed:
            print(f"{tag:18s} FAILED: {r.failure}")
            continue

        def cell(v, width, digits):
            return ("{:>" + str(width) + "." + str(digits) + "f}").format(v) if v is not None else " " * (width - 1) + "-"

        print(
            f"{tag:18s} {r.exceedance_count:>7d} {r.exceedance_rate:>8.4f} "
            f"{cell(r.bias_statistic, 10, 5)} {cell(r.es_z_statistic, 10, 4)} "
            f"{cell(r.var_mean_score, 12, 6)} {cell(r.joint_mean_score, 12, 6)}"
        )


def _print_replication_table(summary: ReplicationSummary) -> None:
    cfg = summary.config
    print(
        f"replications={summary.replications} length={summary.series_length} "
        f"window={cfg.window} alpha={cfg.alpha:g} mu={summary.generator.mu:g} "
        f"sigma={summary.generator.sigma:g} reference={summary.reference}"
    )
    header = f"{'method':18s} {'er_mean':>8s} {'er_sd':>8s} {'rd_mean':>9s} {'rd_sd':>8s} {'or':>7s} {'z_mean':>8s} {'z_or':>7s}"
    print(header)
    for tag in cfg.methods:
        s = summary.methods[tag]

        def cell(v, width, digits, percent=False):
            if v is None:
                return " " * (width - 1) + "-"
            return ("{:>" + str(width) + "." + str(digits) + ("%" if percent else "f") + "}").format(v)

        print(
            f"{tag:18s} {cell(s.er_mean, 8, 4)} {cell(s.er_sd, 8, 4)} "
            f"{cell(s.rd_mean, 9, 1, True)} {cell(s.rd_sd, 8, 1, True)} {cell(s.or_rate, 7, 1, True)} "
            f"{cell(s.es_z_mean, 8, 4)} {cell(s.es_z_or_rate, 7, 1, True)}"
        )


def _emit(obj, args) -> None:
    if args.out:
        write_report(obj, args.out, "json" if args.format == "table" else args.format)
        print(f"wrote {args.out}", file=sys.stderr)
        return
    if args.format == "json":
        print(obj.to_json())
    elif args.format == "csv":
        sys.stdout.write(obj.to_csv())
    elif args.format == "csv-long":
        sys.stdout.write(obj.to_csv_long())
    else:
        if isinstance(obj, ReplicationSummary):
            _print_replication_table(obj)
        else:
            _print_backtest_table(obj)


def _cmd_backtest(args) -> int:
    methods = _split_methods(args.methods)
    if args.input:
        if not args.column or not args.scale:
            raise ConfigError("--input requires --column and --scale")
        series = load_returns_csv(args.input, args.column, args.scale)
    else:
        spec = SimulationSpec(GaussianParams(args.mu, args.sigma), args.length, args.seed)
        series = simulate_series(spec)
    config = BacktestConfig(
        alpha=args.alpha,
        methods=methods,
        window=args.window,
        measure=args.measure,
        gpd_threshold_quantile=args.gpd_q,
    )
    table = CalibrationTable.load_or_new(args.table) if args.table else None
    table = _maybe_autocalibrate(table, args.table, args, config.window, config.alpha,
                                 config.methods, config.measure)
    report = rolling_backtest(series, config, table)
    _emit(report, args)
    return 0


def _cmd_simulate(args) -> int:
    spec = SimulationSpec(GaussianParams(args.mu, args.sigma), args.length, args.seed)
    series = simulate_series(spec)
    lines = ["ret"] + [repr(float(v)) for v in series.values]
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        print(f"wrote {args.out} ({series.name})", file=sys.stderr)
    else:
        sys.stdout.write(text)
    return 0


def _cmd_replicate(args) -> int:
    methods = _split_methods(args.methods)
    config = BacktestConfig(
        alpha=args.alpha,
        methods=methods,
        window=args.window,
        measure=args.measure,
        gpd_threshold_quantile=args.gpd_q,
    )
    table = CalibrationTable.load_or_new(args.table) if args.table else None
    table = _maybe_autocalibrate(table, args.table, args, config.window, config.alpha,
                                 config.methods, config.measure)
    reference = canonical_method(args.reference) if args.reference else None
    summary = replication_study(
        config,
        GaussianParams(args.mu, args.sigma),
        args.length,
        args.reps,
        args.seed,
        reference=reference,
        table=table,
        workers=args.workers,
    )
    _emit(summary, args)
    return 0


_COMMANDS = {
    "calibrate": _cmd_calibrate,
    "estimate": _cmd_estimate,
    "backtest": _cmd_backtest,
    "simulate": _cmd_simulate,
    "replicate": _cmd_replicate,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage problems and 0 for --help
        return 0 if not exc.code else 1
    try:
        return _COMMANDS[args.command](args)
    except _USAGE_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except _DATA_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except _NUMERIC_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except RiskbenchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
