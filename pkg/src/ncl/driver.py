"""Outer augmented-Lagrangian loop around the interior-point subsolver.

Each major iteration solves the residual-augmented subproblem at tolerances
(eta_k, omega_k) with a warm start and a scheduled initial barrier parameter,
then either accepts progress toward feasibility (first-order multiplier
update, tolerances tightened by 10) or raises the penalty by 10.  The run
stops at the feasibility floor, at the penalty ceiling (possible
infeasibility), on an outer-iteration cap, or after three consecutive hard
subsolver failures.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .errors import EvaluationError
from .interior import IpOptions, solve_subproblem
from .model import Point
from .subproblem import NclProblem, make_ncl

_HARD_FAIL = ("singular", "reg_failed", "diverged", "error")

LOG_HEADER = ("outer inner   NCL obj     ‖r‖       η    ‖∇L‖"
              "       ω       ρ  μ init     ‖y‖     ‖x‖ time")


@dataclass
class NclOptions:
    """Outer-loop parameters (tolerance schedule, penalty schedule, limits)."""

    eta0: float = 10.0
    omega0: float = 10.0
    rho0: float = 100.0
    mu0: float = 0.1
    eta_star: float = 1e-6
    omega_star: float = 1e-6
    rho_star: float = 1e12
    max_outer: int = 20
    shrink: float = 10.0       # division factor for eta, omega on success
    grow: float = 10.0         # growth factor for rho on failure
    max_inner: int = 500
    max_time: float = 1800.0
    nls_mode: bool = False


@dataclass
class LogRow:
    outer: int
    inner: int
    obj: float
    rnorm: float
    eta: float
    grad_lag: float
    omega: float
    rho: float
    mu_init: float
    ynorm: float
    xnorm: float
    time: float


def format_log_row(row):
    return (f"{row.outer:5d} {row.inner:5d} {row.obj:9.2e} {row.rnorm:7.1e} "
            f"{row.eta:7.1e} {row.grad_lag:7.1e} {row.omega:7.1e} {row.rho:7.1e} "
            f"{row.mu_init:7.1e} {row.ynorm:7.1e} {row.xnorm:7.1e} {row.time:5.2f}")


@dataclass
class OuterState:
    """Mutable driver state plus the per-iteration log."""

    k: int = 0
    eta: float = 10.0
    omega: float = 10.0
    rho: float = 100.0
    y: np.ndarray = field(default_factory=lambda: np.zeros(0))
    status: str = "running"
    rows: list = field(default_factory=list)
    fails_in_row: int = 0
    at_rho_ceiling_failure: bool = False
    total_inner: int = 0
    best: Point | None = None   # stacked (x, r) primal with multipliers


def mu_init_schedule(k, opts=None):
    """Scheduled initial barrier parameter for major iteration k (k >= 1)."""
    mu0 = opts.mu0 if opts is not None else 0.1
    if k <= 1:
        return mu0
    if k >= 10:
        return 1e-8
    return 10.0 ** -(4 + (k - 2) // 2)


def warm_start_payload(state, sub_prev):
    """Restart data for the next subproblem: previous primal-dual iterate."""
    return None if sub_prev is None else sub_prev.warm


def update_outer(state, sub, opts, ncl):
    """Apply the multiplier / tolerance / penalty update after one subproblem solve.

    Success test: ||r*||_inf <= max(eta_k, eta_star).  On success the
    first-order update y <- y + rho r* is applied (this equals the
    subproblem's own constraint multiplier when the solve is accurate, and
    equals the classical update y - rho c(x*) for equality rows); eta and
    omega shrink by the schedule factor.  On failure y, eta, omega are kept
    and rho grows, flagging possible infeasibility at the ceiling.
    """
    r_star = sub.x[ncl.r_slice]
    rnorm = float(np.linalg.norm(r_star, np.inf)) if r_star.size else 0.0
    if rnorm <= max(state.eta, opts.eta_star):
        state.y = state.y + state.rho * r_star
        state.eta = max(state.eta / opts.shrink, opts.eta_star)
        state.omega = max(state.omega / opts.shrink, opts.omega_star)
    else:
        if state.rho >= opts.rho_star:
            state.at_rho_ceiling_failure = True
        else:
            state.rho = min(state.rho * opts.grow, opts.rho_star)
    ncl.update_params(y=state.y, rho=state.rho)
    return state


def check_termination(state, sub, opts, omega_used):
    """Post-update status: first_order, infeasible_regularization, or None (keep going)."""
    if state.at_rho_ceiling_failure:
        return "infeasible_regularization"
    r_star = sub.x[sub.x.size - state.y.size:] if state.y.size else np.zeros(0)
    rnorm = float(np.linalg.norm(r_star, np.inf)) if r_star.size else 0.0
    if (rnorm <= opts.eta_star and omega_used <= opts.omega_star
            and sub.stats.status == "solved"):
        return "first_order"
    return None


def _log_row(state, ncl, sub, eta_used, omega_used, rho_used, mu, emit):
    x_star, r_star = ncl.split(sub.x)
    obj = ncl.obj(sub.x)
    g = ncl.inner.grad(x_star)
    if ncl.m:
        grad_lag = float(np.linalg.norm(g - ncl.inner.jac(x_star).T @ state.y, np.inf))
        rnorm = float(np.linalg.norm(r_star, np.inf))
        ynorm = float(np.linalg.norm(state.y, np.inf))
    else:
        grad_lag = float(np.linalg.norm(g, np.inf))
        rnorm = 0.0
        ynorm = 0.0
    row = LogRow(outer=state.k, inner=sub.stats.iterations, obj=obj, rnorm=rnorm,
                 eta=eta_used, grad_lag=grad_lag, omega=omega_used, rho=rho_used,
                 mu_init=mu, ynorm=ynorm,
                 xnorm=float(np.linalg.norm(x_star, np.inf)), time=sub.stats.time)
    state.rows.append(row)
    state.total_inner += sub.stats.iterations
    if emit:
        emit(format_log_row(row))
    return row


def ncl_solve(p, opts=None, log=None):
    """Run the full outer loop on problem p; returns (Point, OuterState).

    p may already be a residual-augmented subproblem, in which case its
    current (y, rho) seed the loop; otherwise it is wrapped with y = ones and
    rho = rho0.  ``log`` is an optional callable receiving formatted rows.
    """
    opts = opts or NclOptions()
    if opts.nls_mode:
        from .nls import ncl_nls_solve
        return ncl_nls_solve(p, opts, log=log)

    if isinstance(p, NclProblem):
        ncl = p
    else:
        ncl = make_ncl(p, y=np.ones(p.m), rho=opts.rho0)
    state = OuterState(eta=opts.eta0, omega=opts.omega0, rho=ncl.rho,
                       y=ncl.y.copy())
    if log:
        log(LOG_HEADER)
    t0 = time.perf_counter()

    if ncl.m == 0:
        # no constraints: the subproblem is the problem itself, solve once at the floors
        state.k = 1
        ip = IpOptions(mu_init=opts.mu0, tol_dual=opts.omega_star,
                       tol_primal=opts.eta_star, tol_comp=opts.omega_star,
                       max_iter=opts.max_inner, max_time=opts.max_time)
        sub = solve_subproblem(ncl, opts=ip)
        state.status = "first_order" if sub.stats.status == "solved" else sub.stats.status
        _log_row(state, ncl, sub, opts.eta_star, opts.omega_star, state.rho,
                 opts.mu0, log)
        return Point(x=sub.x.copy(), y=sub.y.copy(), z=sub.z.copy()), state

    warm = None
    sub = None
    last_good = None
    for k in range(1, opts.max_outer + 1):
        state.k = k
        eta_used, omega_used, rho_used = state.eta, state.omega, state.rho
        mu = mu_init_schedule(k, opts)
        remaining = opts.max_time - (time.perf_counter() - t0)
        if remaining <= 0:
            state.status = "max_time"
            break
        ip = IpOptions(mu_init=mu, tol_dual=omega_used, tol_primal=eta_used,
                       tol_comp=omega_used, max_iter=opts.max_inner,
                       max_time=remaining, warm_start=(k > 1))
        try:
            sub = solve_subproblem(ncl, warm=warm, opts=ip)
        except EvaluationError:
            sub = None
            hard_fail = True
        else:
            hard_fail = sub.stats.status in _HARD_FAIL

        if hard_fail:
            state.fails_in_row += 1
            if sub is not None:
                _log_row(state, ncl, sub, eta_used, omega_used, rho_used, mu, log)
            if state.fails_in_row >= 3:
                state.status = "subsolver_failure"
                break
            # perturb the subproblem before retrying
            state.rho = min(state.rho * opts.grow, opts.rho_star)
            ncl.update_params(rho=state.rho)
            warm = None
            continue

        state.fails_in_row = 0
        last_good = sub
        state.best = Point(x=sub.x.copy(), y=sub.y.copy(), z=sub.z.copy())
        update_outer(state, sub, opts, ncl)
        _log_row(state, ncl, sub, eta_used, omega_used, rho_used, mu, log)
        term = check_termination(state, sub, opts, omega_used)
        if term:
            state.status = term
            break
        warm = warm_start_payload(state, sub)
    else:
        state.status = "max_outer"

    final = last_good if last_good is not None else sub
    if final is None:
        return Point(x=ncl.inner.x0.copy(), y=state.y.copy(),
                     z=np.zeros(ncl.nx)), state
    x_star, _ = ncl.split(final.x)
    # multipliers from the last subproblem equal the first-order update at accurate solves
    return Point(x=x_star.copy(), y=final.y.copy(), z=final.z[:ncl.nx].copy()), state
