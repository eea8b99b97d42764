"""Command-line driver: ``dgint integrate | order-study | compare | check``.

Every run subcommand accepts ``--config FILE``, a flat ``key = value`` file
(one key per line, ``#`` comments). Flags given on the command line override
the file. Keys: problem, e, method, tableau, dgrad, invariants (comma list,
1-based), h, steps, out, tol_solver, check.

``--tableau`` takes a builtin name (euler, rk2_midpoint_explicit, heun,
rk4_classical, rk5, rk7, implicit_midpoint, or the aliases rk1, rk2, rk4,
midpoint) or a path to a tableau file. A tableau file lists the s rows of
the a matrix, then the b row, then the c row, then the declared order, one
row per line, whitespace separated; entries may be fractions such as 1/6
and ``#`` starts a comment. Classical RK4 looks like::

    0   0   0 0
    1/2 0   0 0
    0   1/2 0 0
    0   0   1 0
    1/6 1/3 1/3 1/6
    0 1/2 1/2 1
    4

Exit codes: 0 success, 1 solver failure (a partial CSV is written and its
metadata marked incomplete), 2 configuration error, 3 property-check failure.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from . import checks
from .experiments import (
    CONSERVATION_TOL,
    PROJECTED,
    ConfigError,
    RunFailed,
    comparison_csv,
    compare_standard,
    make_config,
    order_study,
    run,
)
from .projection import ConfigurationError
from .rk import UnsupportedTableauError

EXIT_OK, EXIT_SOLVER, EXIT_CONFIG, EXIT_CHECK = 0, 1, 2, 3


def _add_run_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value configuration file")
    p.add_argument("--problem", choices=("kepler", "harmonic"))
    p.add_argument("--e", type=float, help="Kepler eccentricity")
    p.add_argument("--method", help="rk | scheme_a | scheme_b | standard | local, or a preset like RK4Proj13")
    p.add_argument("--tableau", help="builtin tableau name or tableau file")
    p.add_argument("--dgrad", choices=("avf", "ci", "sci"))
    p.add_argument("--invariants", help="comma list of 1-based invariant numbers")
    p.add_argument("--h", type=float, help="step size")
    p.add_argument("--steps", type=int)
    p.add_argument("--out", help="output CSV path (default: stdout)")
    p.add_argument("--tol-solver", dest="tol_solver", type=float)


def _config(args, **extra):
    keys = ("problem", "e", "method", "tableau", "dgrad", "invariants", "h", "steps", "out", "tol_solver")
    overrides = {k: getattr(args, k, None) for k in keys}
    overrides.update({k: v for k, v in extra.items() if v is not None})
    try:
        return make_config(args.config, **overrides)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _emit(text: str, path: str | None) -> None:
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_integrate(args) -> int:
    cfg = _config(args, check=True if args.check else None)
    traj = run(cfg)
    if cfg.out:
        traj.write(cfg.out)
    else:
        sys.stdout.write(traj.to_csv())
    dev = traj.max_deviation()
    for name, d in zip(traj.invariant_names, dev):
        print(f"max |dev_{name}| = {d:.3e}", file=sys.stderr)
    if not traj.complete:
        print(f"run incomplete: {traj.error}", file=sys.stderr)
        return EXIT_SOLVER
    if cfg.check and cfg.method in PROJECTED:
        worst = float(dev.max()) if dev.size else 0.0
        ok = worst <= CONSERVATION_TOL
        print(f"[{'PASS' if ok else 'FAIL'}] conservation: max drift {worst:.3e} (<= {CONSERVATION_TOL:g})", file=sys.stderr)
        if not ok:
            return EXIT_CHECK
    return EXIT_OK


def cmd_order_study(args) -> int:
    cfg = _config(args)
    h_list = [float(t) for t in args.h_list.split(",") if t.strip()]
    study = order_study(cfg, h_list, final_time=args.final_time, jobs=args.jobs)
    _emit(study.to_csv(), args.table or cfg.out)
    if not study.fitted:
        print("all errors at or below the roundoff floor; slope not fitted", file=sys.stderr)
    else:
        print(f"slope = {study.slope:.3f}", file=sys.stderr)
    if args.expect_order is not None:
        ok = study.fitted and abs(study.slope - args.expect_order) <= args.slope_tol
        print(f"[{'PASS' if ok else 'FAIL'}] order {args.expect_order:g} +/- {args.slope_tol:g}", file=sys.stderr)
        if not ok:
            return EXIT_CHECK
    return EXIT_OK


def cmd_compare(args) -> int:
    cfg_a = _config(args)
    if args.tableau is None and not args.config:
        cfg_a = replace(cfg_a, tableau="implicit_midpoint")
    cfg_std = replace(cfg_a, method=args.against, tableau=args.against_tableau or cfg_a.tableau)
    report = compare_standard(cfg_a, cfg_std)
    _emit(comparison_csv(report), cfg_a.out)
    for flag in report["flags"]:
        print(f"note: {flag}", file=sys.stderr)
    if not all(r["complete"] for r in report["rows"]):
        return EXIT_SOLVER
    if args.check:
        worst = max(max(r["max_dev"].values()) for r in report["rows"])
        ok = worst <= CONSERVATION_TOL
        print(f"[{'PASS' if ok else 'FAIL'}] conservation in both slots: {worst:.3e}", file=sys.stderr)
        if not ok:
            return EXIT_CHECK
    return EXIT_OK


def cmd_check(args) -> int:
    results = checks.run_checks(quick=args.quick)
    if args.json:
        Path(args.json).write_text(json.dumps([r.__dict__ for r in results], indent=2) + "\n")
    return EXIT_OK if all(r.passed for r in results) else EXIT_CHECK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dgint", description="Invariant-preserving projection integrators.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("integrate", help="integrate one configuration and write a trajectory CSV")
    _add_run_options(p)
    p.add_argument("--check", action="store_true", help="exit 3 unless drift of the selected invariants is <= 1e-10")
    p.set_defaults(func=cmd_integrate)

    p = sub.add_parser("order-study", help="global error at T against h, with a fitted slope")
    _add_run_options(p)
    p.add_argument("--h-list", dest="h_list", default="0.02,0.01,0.005,0.0025")
    p.add_argument("--final-time", dest="final_time", type=float, default=1.0)
    p.add_argument("--jobs", type=int, default=1, help="parallel runs across the sweep")
    p.add_argument("--table", help="output path for the h,error table (default: --out or stdout)")
    p.add_argument("--expect-order", dest="expect_order", type=float)
    p.add_argument("--slope-tol", dest="slope_tol", type=float, default=0.3)
    p.set_defaults(func=cmd_order_study)

    p = sub.add_parser("compare", help="discrete-gradient projection against standard orthogonal projection")
    _add_run_options(p)
    p.add_argument("--against", default="standard", help="method for the second slot (default: standard)")
    p.add_argument("--against-tableau", dest="against_tableau")
    p.add_argument("--check", action="store_true")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("check", help="run the full property suite")
    p.add_argument("--quick", action="store_true", help="smaller sweeps for a fast smoke run")
    p.add_argument("--json", help="also write results as JSON")
    p.set_defaults(func=cmd_check)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ConfigurationError, UnsupportedTableauError, FileNotFoundError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except RunFailed as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
