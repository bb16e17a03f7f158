"""Command-line interface.

Subcommands::

    queryreg simulate adaptive    --config FILE [--out DIR] [--no-plots] [--audit]
    queryreg simulate nonadaptive --config FILE [--out DIR] [--no-plots] [--plugin]
    queryreg gap    --dims 8,16,32 --config FILE --out DIR [--no-plots]
    queryreg verify moments|recursion|querydist|all [--config FILE] [--out DIR]
    queryreg rates  --in CSV --xcol k --ycol mean_risk [--out DIR]

Every command writes UTF-8 CSV with a header row; report paths also render
PNG figures next to the CSV unless ``--no-plots`` is given.  Replaying a
command with the same config and seed reproduces the CSV byte for byte.
The exit code is zero iff every requested check passed.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

from . import harness, plots, verification
from .config import load_config
from .harness import (
    NONADAPTIVE_HEADER,
    SUMMARY_HEADER,
    SWEEP_HEADER,
    TRAJECTORY_HEADER,
    write_csv,
)
from .oracle import write_audit_csv

__all__ = ["main", "build_parser"]


def build_parser():
    parser = argparse.ArgumentParser(prog="queryreg", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run an estimation experiment")
    sim_sub = sim.add_subparsers(dest="strategy", required=True)
    for strategy in ("adaptive", "nonadaptive"):
        sp = sim_sub.add_parser(strategy)
        sp.add_argument("--config", required=True, help="flat key = value config file")
        sp.add_argument("--out", default="out", help="output directory (default: out)")
        sp.add_argument("--no-plots", action="store_true", help="skip figure rendering")
        if strategy == "adaptive":
            sp.add_argument("--audit", action="store_true",
                            help="also write the replicate-0 query audit log")
        else:
            sp.add_argument("--plugin", action="store_true",
                            help="estimate the squared parameter norm from a pilot phase "
                                 "instead of consuming the true value (no guarantee)")

    gap = sub.add_parser("gap", help="adaptive vs non-adaptive dimension sweep")
    gap.add_argument("--dims", default="8,16,32", help="comma-separated dimensions")
    gap.add_argument("--config", required=True)
    gap.add_argument("--out", default="out")
    gap.add_argument("--no-plots", action="store_true")

    ver = sub.add_parser("verify", help="run a verification suite")
    ver.add_argument("suite", choices=["moments", "recursion", "querydist", "all"])
    ver.add_argument("--config", default=None,
                     help="optional config; only the seed is consumed")
    ver.add_argument("--out", default=None, help="optional directory for the report CSV")

    rates = sub.add_parser("rates", help="fit a power law to two CSV columns")
    rates.add_argument("--in", dest="infile", required=True)
    rates.add_argument("--xcol", default="k")
    rates.add_argument("--ycol", default="mean_risk")
    rates.add_argument("--out", default=None, help="optional directory for the fit figure")
    rates.add_argument("--no-plots", action="store_true")
    return parser


def _cmd_simulate_adaptive(args):
    config = load_config(args.config)
    out = Path(args.out)
    result = harness.run_adaptive(config)
    write_csv(out / "trajectories.csv", TRAJECTORY_HEADER, result.trajectory_rows())
    summary = result.summary_rows()
    write_csv(out / "trajectory_summary.csv", SUMMARY_HEADER, summary)
    print(f"adaptive: {config.replicates} replicates, k = {config.k}, "
          f"diverged = {result.n_diverged}")
    final = summary[-1]
    print(f"final logged round {final[0]}: mean sq_error = {final[1]:.6g} "
          f"(stderr {final[2]:.2g}, n = {final[3]}, {final[4]})")
    if args.audit:
        _, session, _ = harness.replay_adaptive_replicate(config, 0, audit=True)
        write_audit_csv(session, out / "audit_replicate0.csv")
    if not args.no_plots:
        plots.plot_trajectory_summary(summary, out / "trajectory_summary.png")
    return 0


def _cmd_simulate_nonadaptive(args):
    config = load_config(args.config)
    out = Path(args.out)
    mode = "plugin" if getattr(args, "plugin", False) else "oracle"
    result = harness.run_nonadaptive(config, mode=mode)
    write_csv(out / "nonadaptive.csv", NONADAPTIVE_HEADER, result.rows)
    mean, stderr, n = result.mean_risk()
    print(f"nonadaptive ({result.rows[0][1]}): mean sq_error = {mean:.6g} "
          f"(stderr {stderr:.2g}, n = {n}), bound = {result.bound:.6g}")
    if not args.no_plots:
        plots.plot_nonadaptive_risk(result.rows, result.bound, out / "nonadaptive.png")
    return 0


def _cmd_gap(args):
    config = load_config(args.config)
    dims = tuple(int(v) for v in args.dims.split(","))
    out = Path(args.out)
    result = harness.run_gap_experiment(config, dims=dims)
    write_csv(out / "gap_sweep.csv", SWEEP_HEADER, result.sweep_rows)
    ad, na = result.adaptive_exponent, result.nonadaptive_exponent
    print(f"matched round budgets: {result.k_levels}")
    print(f"adaptive d-exponent    = {ad.slope:.3f} +- {ad.stderr:.3f}")
    print(f"nonadaptive d-exponent = {na.slope:.3f} +- {na.stderr:.3f}")
    print(f"separation             = {result.separation:.3f}")
    print(f"diverged replicates    = {result.n_diverged}/{result.n_replicates}")
    if not args.no_plots:
        plots.plot_gap_sweep(result.sweep_rows, ad, na, out / "gap_sweep.png")
    return 0


def _cmd_verify(args):
    seed = 0
    if args.config:
        seed = load_config(args.config).seed
    suites = {
        "moments": verification.moments_suite,
        "recursion": verification.recursion_suite,
        "querydist": verification.querydist_suite,
        "all": verification.all_suites,
    }
    results = suites[args.suite](seed)
    rows = [r.row() for r in results]
    if args.out:
        write_csv(Path(args.out) / f"verify_{args.suite}.csv", verification.REPORT_HEADER, rows)
    failed = 0
    for r in results:
        mark = "PASS" if r.passed else "FAIL"
        print(f"{mark} {r.name}: statistic={r.statistic:.6g} threshold={r.threshold:.6g}")
        failed += not r.passed
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return 0 if failed == 0 else 1


def _cmd_rates(args):
    with open(args.infile, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if args.xcol not in reader.fieldnames or args.ycol not in reader.fieldnames:
            print(f"columns {args.xcol!r}/{args.ycol!r} not found in {args.infile}",
                  file=sys.stderr)
            return 2
        points = []
        for row in reader:
            try:
                x, y = float(row[args.xcol]), float(row[args.ycol])
            except ValueError:
                continue
            if x > 0 and y > 0:
                points.append((x, y))
    fit = harness.fit_rate(points)
    print(f"slope     = {fit.slope:.6g} +- {fit.stderr:.6g}")
    print(f"intercept = {fit.intercept:.6g}")
    print(f"R^2       = {fit.r_squared:.6g}  (n = {fit.n})")
    if args.out and not args.no_plots:
        plots.plot_rate_fit(points, fit, Path(args.out) / "rate_fit.png",
                            xlabel=args.xcol, ylabel=args.ycol)
    return 0


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.command == "simulate":
        if args.strategy == "adaptive":
            return _cmd_simulate_adaptive(args)
        return _cmd_simulate_nonadaptive(args)
    if args.command == "gap":
        return _cmd_gap(args)
    if args.command == "verify":
        return _cmd_verify(args)
    if args.command == "rates":
        return _cmd_rates(args)
    raise AssertionError(f"unhandled command {args.command!r}")


if __name__ == "__main__":
    sys.exit(main())
