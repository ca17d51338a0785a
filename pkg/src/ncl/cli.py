"""Command-line entry point.

Subcommands:
  ncl solve   --problem NAME | --model FILE  [--solver ip|ncl|ncl-nls] ...
  ncl suite   --tag TAG | --problems N1,N2  --solvers s1,s2  --csv OUT
  ncl profile --csv IN --metric time|n_cons|n_jac --out FILE.svg
  ncl tax     --na .. --nb .. --nc .. --nd .. --ne .. [--seed S] [--emit FILE]

Exit codes: 0 success / first-order, 2 unknown problem or model syntax error,
3 solver failure.  NCL_SEED overrides the default seed 0.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict

import numpy as np

from . import bench, problems as problib
from .driver import NclOptions, ncl_solve
from .dsl import load_model
from .errors import NclError, ParseError, UnknownProblem
from .interior import IpOptions, solve_subproblem
from .model import Point
from .nls import ncl_nls_solve
from .tax import TaxConfig, build_tax_problem, dims, emit_manifest

_FAIL_STATUSES = ("max_iter", "max_outer", "max_time", "infeasible_regularization",
                  "subsolver_failure", "failed", "singular", "reg_failed",
                  "diverged", "error", "infeasible")


def _default_seed():
    try:
        return int(os.environ.get("NCL_SEED", "0"))
    except ValueError:
        return 0


def _build_parser():
    ap = argparse.ArgumentParser(prog="ncl", description=__doc__,
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("solve", help="solve one problem")
    src = sp.add_mutually_exclusive_group(required=True)
    src.add_argument("--problem", help="registry problem name")
    src.add_argument("--model", help="path to a .ncl-mod model file")
    sp.add_argument("--solver", choices=bench.SOLVERS, default="ncl")
    sp.add_argument("--eta-star", type=float, default=1e-6)
    sp.add_argument("--omega-star", type=float, default=1e-6)
    sp.add_argument("--rho0", type=float, default=100.0)
    sp.add_argument("--max-outer", type=int, default=20)
    sp.add_argument("--max-iter", type=int, default=500)
    sp.add_argument("--max-time", type=float, default=1800.0)
    sp.add_argument("--json", dest="json_out", help="write a run record as JSON")
    sp.add_argument("--quiet", action="store_true")

    sp = sub.add_parser("suite", help="run a problem suite")
    sp.add_argument("--tag", action="append", default=[],
                    help="registry tag filter (repeatable, conjunctive)")
    sp.add_argument("--problems", help="comma-separated problem names")
    sp.add_argument("--solvers", default="ip,ncl",
                    help="comma-separated solvers from: " + ",".join(bench.SOLVERS))
    sp.add_argument("--csv", required=True, help="output CSV path")
    sp.add_argument("--max-iter", type=int, default=500)
    sp.add_argument("--max-outer", type=int, default=20)
    sp.add_argument("--max-time", type=float, default=1800.0)

    sp = sub.add_parser("profile", help="performance profile from a suite CSV")
    sp.add_argument("--csv", required=True, help="input CSV of run records")
    sp.add_argument("--metric", choices=("time", "n_cons", "n_jac"), default="n_cons")
    sp.add_argument("--out", required=True, help="SVG output path")

    sp = sub.add_parser("tax", help="generate a tax-policy instance")
    sp.add_argument("--na", type=int, default=1)
    sp.add_argument("--nb", type=int, default=1)
    sp.add_argument("--nc", type=int, default=1)
    sp.add_argument("--nd", type=int, default=1)
    sp.add_argument("--ne", type=int, default=1)
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--emit", help="write a regeneration manifest (JSON)")
    sp.add_argument("--solve", action="store_true", help="also run the outer loop")
    return ap


def _cmd_solve(args):
    try:
        if args.problem:
            p = problib.get(args.problem)
            name = args.problem
        else:
            p = load_model(args.model)
            name = p.name
    except (UnknownProblem, ParseError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    emit = None if args.quiet else print
    try:
        if args.solver == "ncl":
            opts = NclOptions(eta_star=args.eta_star, omega_star=args.omega_star,
                              rho0=args.rho0, max_outer=args.max_outer,
                              max_inner=args.max_iter, max_time=args.max_time)
            point, st = ncl_solve(p, opts, log=emit)
            status = st.status
        elif args.solver == "ncl-nls":
            opts = NclOptions(eta_star=args.eta_star, omega_star=args.omega_star,
                              max_inner=args.max_iter, max_time=args.max_time)
            point, st = ncl_nls_solve(p, opts, log=emit)
            status = st.status
        else:
            sub = solve_subproblem(p, opts=IpOptions(
                tol_dual=args.omega_star, tol_primal=args.eta_star,
                tol_comp=args.omega_star, max_iter=args.max_iter,
                max_time=args.max_time))
            point = Point(x=sub.x[:p.n], y=sub.y, z=sub.z)
            status = sub.stats.status
            if not args.quiet:
                s = sub.stats
                print(f"iterations {s.iterations}  dual {s.dual_inf:.2e}  "
                      f"primal {s.primal_inf:.2e}  comp {s.comp:.2e}  "
                      f"time {s.time:.2f}s")
    except NclError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3

    f_native, gl, cv = bench._kkt_norms(p, point)
    if not args.quiet:
        print(f"status {status}  objective {f_native:.8e}  "
              f"dual {gl:.2e}  violation {cv:.2e}")
    if args.json_out:
        rec = bench.RunRecord(problem=name, solver=args.solver,
                              status=bench._STATUS_MAP.get(status, status),
                              f=f_native, grad_lag=gl, cons_viol=cv, time=0.0,
                              iter=0, n_obj=0, n_grad=0, n_cons=0, n_jac=0, n_hess=0)
        base = p
        while getattr(base, "base", None) is not None or getattr(base, "inner", None) is not None:
            base = getattr(base, "base", None) or getattr(base, "inner", None)
        c = base.counters
        rec.n_obj, rec.n_grad, rec.n_cons = c.n_obj, c.n_grad, c.n_cons
        rec.n_jac, rec.n_hess = c.n_jac, c.n_hess
        with open(args.json_out, "w", encoding="utf-8") as fh:
            json.dump(asdict(rec), fh, indent=1, sort_keys=True)
            fh.write("\n")
    return 0 if status in ("first_order", "solved") else 3


def _cmd_suite(args):
    if args.problems:
        names = [s.strip() for s in args.problems.split(",") if s.strip()]
    else:
        names = problib.list_problems(tuple(args.tag) if args.tag else None)
    if not names:
        print("error: empty problem set", file=sys.stderr)
        return 2
    for name in names:
        if name not in problib.list_problems():
            print(f"error: unknown problem {name!r}", file=sys.stderr)
            return 2
    solvers = [s.strip() for s in args.solvers.split(",") if s.strip()]
    for s in solvers:
        if s not in bench.SOLVERS:
            print(f"error: unknown solver {s!r}", file=sys.stderr)
            return 2
    records = bench.run_suite(names, solvers, csv_path=args.csv,
                              max_iter=args.max_iter, max_outer=args.max_outer,
                              max_time=args.max_time)
    solved = sum(r.status == "first_order" for r in records)
    print(f"{len(records)} runs, {solved} first-order; records in {args.csv}")
    return 0


def _cmd_profile(args):
    try:
        records = bench.read_records_csv(args.csv)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        curves = bench.performance_profile(records, metric=args.metric)
        bench.emit_profile_plot(curves, args.out,
                                title=f"performance profile ({args.metric})")
    except NclError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    for c in curves:
        print(f"{c.solver}: solved {c.solved_fraction:.2f}")
    print(f"plot in {args.out}, breakpoints in {args.out}.csv")
    return 0


def _cmd_tax(args):
    seed = args.seed if args.seed is not None else _default_seed()
    cfg = TaxConfig(na=args.na, nb=args.nb, nc=args.nc, nd=args.nd, ne=args.ne,
                    seed=seed)
    d = dims(cfg)
    print(f"T={d.T} types: n={d.n} variables, {d.m_ic} incentive rows "
          f"+ 1 budget row = {d.m} constraints")
    if args.emit:
        emit_manifest(cfg, args.emit)
        print(f"manifest in {args.emit}")
    if args.solve:
        p = build_tax_problem(cfg)
        point, st = ncl_solve(p, NclOptions(), log=print)
        print(f"status {st.status}  objective {p.obj(point.x):.6e}")
        return 0 if st.status == "first_order" else 3
    return 0


def main(argv=None):
    args = _build_parser().parse_args(argv)
    np.set_printoptions(precision=8, suppress=False)
    if args.command == "solve":
        return _cmd_solve(args)
    if args.command == "suite":
        return _cmd_suite(args)
    if args.command == "profile":
        return _cmd_profile(args)
    if args.command == "tax":
        return _cmd_tax(args)
    return 2


if __name__ == "__main__":
    sys.exit(main())
