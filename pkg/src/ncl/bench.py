"""Benchmark harness: run (problem, solver) pairs, persist CSV records, and
build performance profiles (cumulative distribution of per-problem metric
ratios against the best solver).

The plot emitter writes plain SVG text with fixed formatting and no
timestamps, so regenerating from the same curves is byte-identical.
"""

from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import dataclass, fields

import numpy as np

from . import problems as problib
from .driver import NclOptions, ncl_solve
from .errors import DegenerateMetric
from .interior import IpOptions, solve_subproblem
from .model import Point, as_minimization, root_problem
from .nls import ncl_nls_solve

SOLVERS = ("ip", "ncl", "ncl-nls")

_STATUS_MAP = {
    "solved": "first_order",
    "first_order": "first_order",
    "max_iter": "max_iter",
    "max_outer": "max_iter",
    "max_time": "max_time",
    "infeasible_regularization": "infeasible",
    "subsolver_failure": "failed",
    "singular": "failed",
    "reg_failed": "failed",
    "diverged": "failed",
    "error": "failed",
}


@dataclass
class RunRecord:
    """One (problem, solver) outcome; column order is the CSV schema."""

    problem: str
    solver: str
    status: str
    f: float
    grad_lag: float     # ||g - J^T y - z||_2 at the returned point
    cons_viol: float    # 2-norm of the distance of c(x) to its bound interval
    time: float
    iter: int
    n_obj: int
    n_grad: int
    n_cons: int
    n_jac: int
    n_hess: int


CSV_FIELDS = [f.name for f in fields(RunRecord)]


def _kkt_norms(p, point):
    """(objective value native sign, ||grad L||_2, ||violation||_2) at a point."""
    pmin = as_minimization(p)
    x = point.x[:p.n]
    f_native = p.obj(x)
    g = pmin.grad(x)
    if p.m:
        resid = g - pmin.jac(x).T @ point.y[:p.m]
    else:
        resid = g.copy()
    z = point.z[:p.n] if point.z.size >= p.n else np.zeros(p.n)
    resid -= z
    viol = p.violation(x)
    return f_native, float(np.linalg.norm(resid)), float(np.linalg.norm(viol))


def run_one(name, solver, *, max_iter=500, max_outer=20, max_time=1800.0,
            eta_star=1e-6, omega_star=1e-6, rho0=100.0, log=None):
    """Solve one problem (registry name or Problem instance) and build its RunRecord."""
    if isinstance(name, str):
        p = problib.get(name)
    else:
        p, name = name, name.name
    base = root_problem(p)
    t0 = time.perf_counter()
    try:
        if solver == "ip":
            sub = solve_subproblem(p, opts=IpOptions(
                tol_dual=omega_star, tol_primal=eta_star, tol_comp=omega_star,
                max_iter=max_iter, max_time=max_time))
            point = Point(x=sub.x[:p.n], y=sub.y, z=sub.z)
            status = _STATUS_MAP[sub.stats.status]
            iters = sub.stats.iterations
        elif solver == "ncl":
            opts = NclOptions(eta_star=eta_star, omega_star=omega_star, rho0=rho0,
                              max_outer=max_outer, max_inner=max_iter,
                              max_time=max_time)
            point, st = ncl_solve(p, opts, log=log)
            status = _STATUS_MAP[st.status]
            iters = st.total_inner
        elif solver == "ncl-nls":
            opts = NclOptions(eta_star=eta_star, omega_star=omega_star,
                              max_inner=max_iter, max_time=max_time)
            point, st = ncl_nls_solve(p, opts, log=log)
            status = _STATUS_MAP[st.status]
            iters = st.total_inner
        else:
            raise ValueError(f"unknown solver {solver!r}")
        f, gl, cv = _kkt_norms(p, point)
    except Exception:
        status, f, gl, cv, iters = "failed", math.nan, math.nan, math.nan, 0
    elapsed = time.perf_counter() - t0
    c = base.counters
    return RunRecord(problem=name, solver=solver, status=status, f=f,
                     grad_lag=gl, cons_viol=cv, time=elapsed, iter=iters,
                     n_obj=c.n_obj, n_grad=c.n_grad, n_cons=c.n_cons,
                     n_jac=c.n_jac, n_hess=c.n_hess)


def run_suite(names, solvers, *, csv_path=None, **limits):
    """One RunRecord per (problem, solver) in deterministic order; failures never abort."""
    records = [run_one(name, solver, **limits)
               for name in names for solver in solvers]
    if csv_path:
        write_records_csv(records, csv_path)
    return records


def write_records_csv(records, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_FIELDS)
        for r in records:
            writer.writerow([getattr(r, f) for f in CSV_FIELDS])


def read_records_csv(path):
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            out.append(RunRecord(
                problem=row["problem"], solver=row["solver"], status=row["status"],
                f=float(row["f"]), grad_lag=float(row["grad_lag"]),
                cons_viol=float(row["cons_viol"]), time=float(row["time"]),
                iter=int(row["iter"]), n_obj=int(row["n_obj"]),
                n_grad=int(row["n_grad"]), n_cons=int(row["n_cons"]),
                n_jac=int(row["n_jac"]), n_hess=int(row["n_hess"])))
    return out


@dataclass
class ProfileCurve:
    """Step function of solved fraction against the metric ratio."""

    solver: str
    ratios: np.ndarray   # sorted finite breakpoints (>= 1)
    values: np.ndarray   # cumulative fraction after each breakpoint

    def value_at(self, x):
        """Fraction of problems with ratio <= x."""
        idx = np.searchsorted(self.ratios, x, side="right")
        return 0.0 if idx == 0 else float(self.values[idx - 1])

    @property
    def solved_fraction(self):
        return float(self.values[-1]) if self.values.size else 0.0


_METRICS = ("time", "n_cons", "n_jac")


def performance_profile(records, metric="n_cons"):
    """Dolan-More curves: for each solver the distribution of metric ratios.

    Failed runs carry an infinite metric.  Ties at the per-problem minimum
    give ratio 1 to every tied solver.  A zero minimum for any problem is an
    error rather than a silent shift.
    """
    if metric not in _METRICS:
        raise ValueError(f"metric must be one of {_METRICS}")
    solvers = sorted({r.solver for r in records})
    if len(solvers) < 2:
        raise ValueError("need at least two solvers to profile")
    names = sorted({r.problem for r in records})
    table = {}
    for r in records:
        val = getattr(r, "time" if metric == "time" else metric)
        if r.status != "first_order" or not math.isfinite(val):
            val = math.inf
        table[(r.problem, r.solver)] = val
    nprob = len(names)
    ratios = {s: [] for s in solvers}
    for name in names:
        best = min(table.get((name, s), math.inf) for s in solvers)
        if best == 0.0:
            raise DegenerateMetric(f"{metric} minimum is zero on {name!r}")
        for s in solvers:
            val = table.get((name, s), math.inf)
            finite = math.isfinite(val) and math.isfinite(best)
            ratios[s].append(val / best if finite else math.inf)
    curves = []
    for s in solvers:
        finite = np.sort([r for r in ratios[s] if math.isfinite(r)])
        values = np.arange(1, finite.size + 1) / nprob
        curves.append(ProfileCurve(solver=s, ratios=finite, values=values))
    return curves


def profile_table(curves):
    """Breakpoint rows (solver, ratio, fraction), one per curve breakpoint."""
    rows = []
    for c in curves:
        for r, v in zip(c.ratios, c.values):
            rows.append((c.solver, float(r), float(v)))
    return rows


_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def emit_profile_plot(curves, out_path, csv_path=None, title="performance profile"):
    """Static SVG with a log2 ratio axis plus the breakpoint CSV next to it.

    Output is deterministic: fixed float formatting, no timestamps.
    """
    if csv_path is None:
        csv_path = str(out_path) + ".csv"
    rows = profile_table(curves)
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["solver", "ratio", "fraction"])
        for solver, ratio, frac in rows:
            writer.writerow([solver, f"{ratio:.12g}", f"{frac:.12g}"])

    width, height = 640.0, 440.0
    left, right, top, bottom = 60.0, 150.0, 40.0, 50.0
    px = width - left - right
    py = height - top - bottom
    tmax = 1.0
    for c in curves:
        if c.ratios.size:
            tmax = max(tmax, math.log2(float(c.ratios[-1])))
    tmax = max(1.0, math.ceil(tmax))

    def X(t):
        return left + px * t / tmax

    def Y(v):
        return top + py * (1.0 - v)

    buf = io.StringIO()
    buf.write(f'<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0f}" '
              f'height="{height:.0f}" viewBox="0 0 {width:.0f} {height:.0f}">\n')
    buf.write('<rect width="100%" height="100%" fill="white"/>\n')
    buf.write(f'<text x="{left:.1f}" y="24" font-family="sans-serif" '
              f'font-size="14">{title}</text>\n')
    # axes
    buf.write(f'<line x1="{X(0):.2f}" y1="{Y(0):.2f}" x2="{X(tmax):.2f}" '
              f'y2="{Y(0):.2f}" stroke="black"/>\n')
    buf.write(f'<line x1="{X(0):.2f}" y1="{Y(0):.2f}" x2="{X(0):.2f}" '
              f'y2="{Y(1):.2f}" stroke="black"/>\n')
    for k in range(int(tmax) + 1):
        buf.write(f'<line x1="{X(k):.2f}" y1="{Y(0):.2f}" x2="{X(k):.2f}" '
                  f'y2="{Y(0) + 4:.2f}" stroke="black"/>\n')
        buf.write(f'<text x="{X(k):.2f}" y="{Y(0) + 18:.2f}" font-family="sans-serif" '
                  f'font-size="11" text-anchor="middle">{2 ** k}</text>\n')
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        buf.write(f'<line x1="{X(0) - 4:.2f}" y1="{Y(frac):.2f}" x2="{X(0):.2f}" '
                  f'y2="{Y(frac):.2f}" stroke="black"/>\n')
        buf.write(f'<text x="{X(0) - 8:.2f}" y="{Y(frac) + 4:.2f}" font-family="sans-serif" '
                  f'font-size="11" text-anchor="end">{frac:.2f}</text>\n')
    buf.write(f'<text x="{X(tmax / 2):.2f}" y="{height - 10:.2f}" font-family="sans-serif" '
              f'font-size="12" text-anchor="middle">ratio to best (log scale)</text>\n')

    for i, c in enumerate(curves):
        color = _PALETTE[i % len(_PALETTE)]
        pts = [(0.0, 0.0)]
        prev = 0.0
        for r, v in zip(c.ratios, c.values):
            t = math.log2(max(float(r), 1.0))
            pts.append((t, prev))
            pts.append((t, float(v)))
            prev = float(v)
        pts.append((tmax, prev))
        path = " ".join(f"{X(t):.2f},{Y(v):.2f}" for t, v in pts)
        buf.write(f'<polyline fill="none" stroke="{color}" stroke-width="1.6" '
                  f'points="{path}"/>\n')
        ly = top + 16.0 * i
        buf.write(f'<line x1="{width - right + 10:.2f}" y1="{ly:.2f}" '
                  f'x2="{width - right + 34:.2f}" y2="{ly:.2f}" stroke="{color}" '
                  f'stroke-width="1.6"/>\n')
        buf.write(f'<text x="{width - right + 40:.2f}" y="{ly + 4:.2f}" '
                  f'font-family="sans-serif" font-size="11">{c.solver} '
                  f'({c.solved_fraction:.2f} solved)</text>\n')
    buf.write("</svg>\n")
    with open(out_path, "w", encoding="utf-8") as fh:
        fh.write(buf.getvalue())
    return out_path
