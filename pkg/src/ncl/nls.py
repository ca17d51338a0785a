"""Least-squares pathway: treat an (often infeasible) equality system as
``min 0.5 ||c(x)||^2 s.t. lb <= x <= ub`` and solve it through a single
residual-augmented subproblem with y = 0 and rho = 1.

With the equality rows forcing c(x) + r = 0, eliminating r at y = 0 makes the
subproblem objective exactly ``(rho/2) ||c(x)||^2``, so one accurate
subproblem solve at the final tolerances is the whole algorithm.
"""

from __future__ import annotations

import time
import warnings

import numpy as np

from .errors import NoConstraints
from .interior import IpOptions, solve_subproblem
from .model import Point, Problem, as_minimization
from .subproblem import NclProblem


def _check_equality_system(p):
    if p.m == 0:
        raise NoConstraints(f"{p.name}: needs at least one constraint row")
    if not np.all(p.equality_mask):
        raise ValueError(f"{p.name}: expected an all-equality system")


def feasibility_residual(p, name=None):
    """Bound-constrained least-squares problem 0.5 ||c(x) - cl||^2 built from an equality system.

    Gradient is J^T c and the Hessian is the Gauss-Newton term J^T J plus the
    exact curvature sum of the residuals.  Any nonzero objective on p is
    discarded with a warning.
    """
    _check_equality_system(p)
    p = as_minimization(p)
    if abs(p.obj(p.x0)) > 0.0:
        warnings.warn(f"{p.name}: objective is discarded by the least-squares view",
                      stacklevel=2)
    shift = p.cl.copy()

    def obj(x):
        c = p.cons(x) - shift
        return 0.5 * float(c @ c)

    def grad(x):
        c = p.cons(x) - shift
        return p.jac(x).T @ c

    def hess(x, y, obj_weight):
        c = p.cons(x) - shift
        J = p.jac(x)
        # sigma * (J^T J + sum_i c_i Hi): constraint curvature enters through
        # the inner problem's Lagrangian Hessian with zero objective weight
        return obj_weight * (J.T @ J) + p.hess(x, -obj_weight * c, 0.0)

    return Problem(name or p.name + "+lsq", p.n, obj=obj, grad=grad, hess=hess,
                   m=0, x0=p.x0, lb=p.lb, ub=p.ub, sense="minimize")


def make_nc0(p):
    """First residual-augmented subproblem of the least-squares pathway (y=0, rho=1)."""
    _check_equality_system(p)
    return NclProblem(p, y=np.zeros(p.m), rho=1.0)


def ncl_nls_solve(p, opts=None, log=None):
    """One-shot solve of the least-squares interpretation of an equality system.

    Returns (Point, OuterState) like the general driver; the reported
    objective is 0.5 ||r*||^2 = 0.5 ||c(x*)||^2 at the solution.
    """
    from .driver import LOG_HEADER, LogRow, NclOptions, OuterState, format_log_row

    opts = opts or NclOptions()
    ncl = p if isinstance(p, NclProblem) else make_nc0(p)
    state = OuterState(eta=opts.eta_star, omega=opts.omega_star, rho=ncl.rho,
                       y=ncl.y.copy())
    state.k = 1
    if log:
        log(LOG_HEADER)
    ip = IpOptions(mu_init=opts.mu0, tol_dual=opts.omega_star,
                   tol_primal=opts.eta_star, tol_comp=opts.omega_star,
                   max_iter=opts.max_inner, max_time=opts.max_time)
    t0 = time.perf_counter()
    sub = solve_subproblem(ncl, opts=ip)
    x_star, r_star = ncl.split(sub.x)
    state.status = "first_order" if sub.stats.status == "solved" else sub.stats.status
    half_rr = 0.5 * float(r_star @ r_star)
    row = LogRow(outer=1, inner=sub.stats.iterations, obj=half_rr,
                 rnorm=float(np.linalg.norm(r_star, np.inf)) if r_star.size else 0.0,
                 eta=opts.eta_star,
                 grad_lag=float(np.linalg.norm(
                     ncl.inner.grad(x_star) - ncl.inner.jac(x_star).T @ sub.y, np.inf)),
                 omega=opts.omega_star, rho=ncl.rho, mu_init=opts.mu0,
                 ynorm=float(np.linalg.norm(sub.y, np.inf)),
                 xnorm=float(np.linalg.norm(x_star, np.inf)),
                 time=time.perf_counter() - t0)
    state.rows.append(row)
    state.total_inner = sub.stats.iterations
    if log:
        log(format_log_row(row))
    state.y = sub.y.copy()
    return Point(x=x_star.copy(), y=sub.y.copy(), z=sub.z[:ncl.nx].copy()), state
