"""Primal-dual interior-point solver for smooth problems in equality form.

Solves ``min f(v) s.t. C(v) = 0, lb <= v <= ub`` with log barriers on the
finite bounds and Newton steps on the perturbed KKT system.  Inequality and
range constraints are converted up front by the slack transform, so one KKT
shape covers everything.

When the incoming problem carries a residual block (an augmented-Lagrangian
subproblem), the Newton system has the 3x3 structure

    [ H+D       J^T ] [dx ]     [ rd_x ]
    [      rho*I  I ] [dr ]  = -[ rd_r ]
    [ J      I      ] [dlam]    [ rp   ]

which is reduced by eliminating dr to the symmetric quasi-definite 2x2 system

    [ H+D   J^T      ] [dx  ]   [ -rd_x            ]
    [ J    -(1/rho)I ] [dlam] = [ -rp + rd_r / rho ]

that factors for any J, rank-deficient or not.  Without a residual block the
(2,2) block is zero and a rank-deficient Jacobian makes the system singular.

Internal multipliers lam follow the convention grad f + J^T lam - z = 0;
results are reported with the opposite (conventional) sign, g - J^T y - z = 0.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import (DomainError, EvaluationError, NonInterior,
                     RegularizationFailed, SingularSystem)
from .model import Point, SlackProblem, as_minimization, to_slack_form


@dataclass
class IpOptions:
    """Tolerances and controls for one subproblem solve."""

    mu_init: float = 0.1
    tol_dual: float = 1e-6          # omega: unscaled inf-norm dual residual
    tol_primal: float = 1e-6        # eta: inf-norm constraint residual
    tol_comp: float | None = None   # defaults to tol_dual
    max_iter: int = 500
    max_time: float = 1800.0
    warm_start: bool = False
    delta_min: float = 1e-8
    delta_growth: float = 10.0

    def comp_tol(self):
        return self.tol_dual if self.tol_comp is None else self.tol_comp


@dataclass
class SubStats:
    status: str = "running"
    iterations: int = 0
    time: float = 0.0
    dual_inf: float = np.inf
    primal_inf: float = np.inf
    comp: float = np.inf
    mu_final: float = np.nan
    deltas: list = field(default_factory=list)     # inertia shift used at each iteration
    mu_trace: list = field(default_factory=list)   # barrier value at each iteration


@dataclass
class SubResult:
    """Solution of one subproblem in the coordinates of the problem passed in."""

    x: np.ndarray          # primal (includes the residual block, excludes slacks)
    y: np.ndarray          # constraint multipliers, convention g - J^T y - z = 0
    z: np.ndarray          # net bound multipliers on x
    stats: SubStats
    warm: dict             # full equality-form iterate for restarting


@dataclass
class IpState:
    """Current interior iterate plus the fixed structural data of the solve."""

    v: np.ndarray
    lam: np.ndarray
    zl: np.ndarray
    zu: np.ndarray
    mu: float
    lb: np.ndarray
    ub: np.ndarray
    low: np.ndarray      # finite lower bound, not fixed
    upp: np.ndarray      # finite upper bound, not fixed
    fixed: np.ndarray    # lb == ub
    r_slice: slice | None = None
    rho: float | None = None

    @property
    def n(self):
        return self.v.size

    @property
    def m(self):
        return self.lam.size

    def has_r_block(self):
        return (self.r_slice is not None and self.rho is not None
                and self.r_slice.stop > self.r_slice.start)

    def gen_indices(self):
        """Indices of the non-residual (general) variables."""
        if not self.has_r_block():
            return np.arange(self.n)
        r = self.r_slice
        return np.concatenate([np.arange(0, r.start), np.arange(r.stop, self.n)])

    def check_interior(self):
        dl = self.v - self.lb
        du = self.ub - self.v
        if np.any(dl[self.low] <= 0.0) or np.any(du[self.upp] <= 0.0):
            raise NonInterior("iterate touches a bound")

    def barrier_diag(self):
        """Primal-dual barrier diagonal D = Zl/(v-lb) + Zu/(ub-v) (zero off finite bounds)."""
        D = np.zeros(self.n)
        D[self.low] += self.zl[self.low] / (self.v - self.lb)[self.low]
        D[self.upp] += self.zu[self.upp] / (self.ub - self.v)[self.upp]
        return D

    def barrier_correction(self):
        """w with z - mu/(v-lb) + mu/(ub-v) = -z_correction, so rd = true dual residual."""
        w = np.zeros(self.n)
        w[self.low] += (self.zl - self.mu / (self.v - self.lb))[self.low]
        w[self.upp] -= (self.zu - self.mu / (self.ub - self.v))[self.upp]
        # w = (zl - mu/dl) - (zu - mu/du); condensed residual = rd_true - (zl-zu) + w + (zl-zu)... see assemble
        return w


@dataclass
class KktSystem:
    """Structured Newton system of one interior iteration (general block + optional residual block)."""

    H: np.ndarray                # general-block Lagrangian Hessian (delta shift included once regularized)
    D: np.ndarray                # barrier diagonal over the general block
    J: np.ndarray                # m x n_g Jacobian of the general block
    rd_x: np.ndarray
    rp: np.ndarray
    rho: float | None = None     # residual-block penalty; None -> no residual block
    rd_r: np.ndarray | None = None
    fixed: np.ndarray | None = None   # mask of frozen general variables
    delta: float = 0.0
    _factor: tuple | None = None
    _reduced: np.ndarray | None = None

    @property
    def has_r_block(self):
        return self.rho is not None and self.rd_r is not None and self.rd_r.size > 0

    @property
    def ng(self):
        return self.H.shape[0]

    @property
    def m(self):
        return self.J.shape[0]

    def reduced_matrix(self):
        """Dense [[H+D, J^T], [J, -(1/rho) I or 0]] with frozen rows pinned."""
        ng, m = self.ng, self.m
        K = np.zeros((ng + m, ng + m))
        K[:ng, :ng] = self.H + np.diag(self.D)
        if m:
            K[:ng, ng:] = self.J.T
            K[ng:, :ng] = self.J
            if self.has_r_block:
                K[ng:, ng:] = -np.eye(m) / self.rho
        if self.fixed is not None and self.fixed.any():
            idx = np.flatnonzero(self.fixed)
            K[idx, :] = 0.0
            K[:, idx] = 0.0
            K[idx, idx] = 1.0
        return K

    def full_matrix(self):
        """Dense 3-block matrix over (dx, dr, dlam); for checks and small oracles."""
        ng, m = self.ng, self.m
        if not self.has_r_block:
            return self.reduced_matrix()
        dim = ng + 2 * m
        K = np.zeros((dim, dim))
        K[:ng, :ng] = self.H + np.diag(self.D)
        K[ng:ng + m, ng:ng + m] = self.rho * np.eye(m)
        K[:ng, ng + m:] = self.J.T
        K[ng:ng + m, ng + m:] = np.eye(m)
        K[ng + m:, :ng] = self.J
        K[ng + m:, ng:ng + m] = np.eye(m)
        if self.fixed is not None and self.fixed.any():
            idx = np.flatnonzero(self.fixed)
            K[idx, :] = 0.0
            K[:, idx] = 0.0
            K[idx, idx] = 1.0
        return K

    def full_rhs(self):
        if self.has_r_block:
            return -np.concatenate([self.rd_x, self.rd_r, self.rp])
        return -np.concatenate([self.rd_x, self.rp])


def _inertia(d):
    """(n_pos, n_neg, n_zero) of the block-diagonal LDL factor d."""
    n = d.shape[0]
    pos = neg = zero = 0
    i = 0
    while i < n:
        off = d[i + 1, i] if i + 1 < n else 0.0
        if off != 0.0:
            a, b, c = d[i, i], off, d[i + 1, i + 1]
            det = a * c - b * b
            tr = a + c
            if det < 0.0:
                pos += 1
                neg += 1
            elif det > 0.0:
                if tr > 0.0:
                    pos += 2
                else:
                    neg += 2
            else:
                zero += 1
                if tr > 0.0:
                    pos += 1
                elif tr < 0.0:
                    neg += 1
                else:
                    zero += 1
            i += 2
        else:
            val = d[i, i]
            if not np.isfinite(val) or abs(val) <= 1e-200:
                zero += 1
            elif val > 0.0:
                pos += 1
            else:
                neg += 1
            i += 1
    return pos, neg, zero


def _ldl_factor(K):
    """Bunch-Kaufman factorization plus inertia; returns (factor, inertia)."""
    try:
        lu, d, perm = scipy.linalg.ldl(K, lower=True)
    except Exception:
        return None, (0, 0, K.shape[0])
    if not (np.all(np.isfinite(lu)) and np.all(np.isfinite(d))):
        return None, (0, 0, K.shape[0])
    return (lu, d, perm), _inertia(d)


def _ldl_solve(factor, b):
    lu, d, perm = factor
    L = lu[perm]
    t = scipy.linalg.solve_triangular(L, b[perm], lower=True, unit_diagonal=True)
    # d is block diagonal with 1x1 / 2x2 blocks: solve as a tridiagonal system
    n = d.shape[0]
    ab = np.zeros((3, n))
    ab[1] = np.diag(d)
    if n > 1:
        ab[0, 1:] = np.diag(d, 1)
        ab[2, :-1] = np.diag(d, -1)
    u = scipy.linalg.solve_banded((1, 1), ab, t)
    w = scipy.linalg.solve_triangular(L.T, u, lower=False, unit_diagonal=True)
    x = np.empty_like(b)
    x[perm] = w
    return x


def regularize(sys, delta_min=1e-8, delta_growth=10.0, delta_max=1e40):
    """Smallest shift delta in {0, delta_min, 10 delta_min, ...} giving inertia (n_g, m, 0).

    On success H is replaced by H + delta I and the factorization is cached.
    """
    ng, m = sys.ng, sys.m
    H0 = sys.H.copy()
    delta = 0.0
    while True:
        if delta > 0.0:
            sys.H = H0 + delta * np.eye(ng)
        K = sys.reduced_matrix()
        factor, inertia = _ldl_factor(K)
        if factor is not None and inertia == (ng, m, 0):
            sys.delta = delta
            sys._factor = factor
            sys._reduced = K
            return delta
        delta = delta_min if delta == 0.0 else delta * delta_growth
        if delta > delta_max:
            sys.H = H0
            raise RegularizationFailed(
                f"no shift up to {delta_max:g} gives inertia ({ng}, {m}, 0)")


def solve_kkt(sys):
    """Direction (dx, dr, dlam) from the reduced solve with iterative refinement.

    dr is eliminated through the residual-block row (dr = -(rd_r + dlam)/rho)
    and recovered after the 2x2 solve.  The returned direction satisfies the
    full block system to a small residual; a gross residual without a residual
    block signals a singular saddle system.
    """
    ng, m = sys.ng, sys.m
    if sys._factor is None:
        K = sys.reduced_matrix()
        factor, inertia = _ldl_factor(K)
        if factor is None or inertia[2] > 0:
            raise SingularSystem("reduced KKT matrix is singular")
        sys._factor = factor
        sys._reduced = K

    if sys.has_r_block:
        rhs = np.concatenate([-sys.rd_x, -sys.rp + sys.rd_r / sys.rho])
    else:
        rhs = np.concatenate([-sys.rd_x, -sys.rp])

    K = sys._reduced
    sol = _ldl_solve(sys._factor, rhs)
    for _ in range(2):
        resid = rhs - K @ sol
        if np.linalg.norm(resid, np.inf) <= 1e-14 * (1.0 + np.linalg.norm(rhs, np.inf)):
            break
        sol = sol + _ldl_solve(sys._factor, resid)

    dx = sol[:ng]
    dlam = sol[ng:]
    if sys.has_r_block:
        dr = -(sys.rd_r + dlam) / sys.rho
    else:
        dr = np.zeros(0)

    # residual of the full block system
    full_rhs = sys.full_rhs()
    scale = 1.0 + np.linalg.norm(full_rhs, np.inf)
    r1 = (sys.H + np.diag(sys.D)) @ dx + (sys.J.T @ dlam if m else 0.0) + sys.rd_x
    if sys.fixed is not None and sys.fixed.any():
        r1 = np.where(sys.fixed, 0.0, r1)
    parts = [r1]
    if sys.has_r_block:
        parts.append(sys.rho * dr + dlam + sys.rd_r)
        parts.append(sys.J @ dx + dr + sys.rp)
    elif m:
        parts.append(sys.J @ dx + sys.rp)
    resid = np.linalg.norm(np.concatenate(parts), np.inf)
    if not np.isfinite(resid) or (not sys.has_r_block and resid > 1e-6 * scale):
        raise SingularSystem(f"KKT solve residual {resid:.2e} exceeds tolerance")
    return dx, dr, dlam


def assemble_kkt(state, model, evals=None):
    """Build the structured Newton system at the current iterate.

    ``evals`` may carry precomputed (g, J, c) to avoid duplicate model calls.
    """
    state.check_interior()
    v = state.v
    if evals is None:
        g = model.grad(v)
        J = model.jac(v)
        c = model.cons(v)
    else:
        g, J, c = evals
    W = model.hess(v, -state.lam, 1.0)

    dl = v - state.lb
    du = state.ub - v
    D = state.barrier_diag()
    # condensed dual residual: grad f + J^T lam - mu/(v-lb) + mu/(ub-v)
    rd = g + (J.T @ state.lam if state.m else 0.0)
    rd = rd.astype(float)
    rd[state.low] -= state.mu / dl[state.low]
    rd[state.upp] += state.mu / du[state.upp]

    gen = state.gen_indices()
    fixed_g = state.fixed[gen]
    H = W[np.ix_(gen, gen)]
    Jg = J[:, gen] if state.m else np.zeros((0, gen.size))
    rd_x = rd[gen].copy()
    Dg = D[gen].copy()
    if fixed_g.any():
        idx = np.flatnonzero(fixed_g)
        H[idx, :] = 0.0
        H[:, idx] = 0.0
        Dg[idx] = 0.0
        if state.m:
            Jg[:, idx] = 0.0
        rd_x[idx] = 0.0

    if state.has_r_block():
        rd_r = rd[state.r_slice].copy()
        rho = state.rho
    else:
        rd_r = None
        rho = None
    return KktSystem(H=H, D=Dg, J=Jg, rd_x=rd_x, rp=c.copy(),
                     rho=rho, rd_r=rd_r, fixed=fixed_g)


def step_lengths(state, direction, tau):
    """Fraction-to-boundary step caps (alpha_primal, alpha_dual), each in (0, 1]."""
    dv, _, dzl, dzu = direction
    a_p = 1.0
    low, upp = state.low, state.upp
    dl = (state.v - state.lb)[low]
    du = (state.ub - state.v)[upp]
    neg = dv[low] < 0.0
    if np.any(neg):
        a_p = min(a_p, np.min(tau * dl[neg] / -dv[low][neg]))
    pos = dv[upp] > 0.0
    if np.any(pos):
        a_p = min(a_p, np.min(tau * du[pos] / dv[upp][pos]))
    a_d = 1.0
    for z, dz, mask in ((state.zl, dzl, low), (state.zu, dzu, upp)):
        zi, dzi = z[mask], dz[mask]
        shrink = dzi < 0.0
        if np.any(shrink):
            a_d = min(a_d, np.min(tau * zi[shrink] / -dzi[shrink]))
    return a_p, a_d


def _push_interior(v, lb, ub, kappa):
    """Move v strictly inside its bounds; floor push is 1e-8 * (1 + |bound|)."""
    v = v.copy()
    lo_fin = np.isfinite(lb)
    up_fin = np.isfinite(ub)
    fixed = lb == ub
    both = lo_fin & up_fin & ~fixed
    gap = np.where(both, ub - lb, np.inf)
    pl = np.where(lo_fin, np.minimum(np.maximum(kappa * (1.0 + np.abs(lb)),
                                                1e-8 * (1.0 + np.abs(lb))), 0.25 * gap), 0.0)
    pu = np.where(up_fin, np.minimum(np.maximum(kappa * (1.0 + np.abs(ub)),
                                                1e-8 * (1.0 + np.abs(ub))), 0.25 * gap), 0.0)
    v = np.where(lo_fin & ~fixed, np.maximum(v, lb + pl), v)
    v = np.where(up_fin & ~fixed, np.minimum(v, ub - pu), v)
    v = np.where(fixed, lb, v)
    return v


def _kkt_residual_norm(model, state, v, lam, zl, zu, evals=None):
    """2-norm of the barrier-perturbed primal-dual residual at a candidate point."""
    if evals is None:
        g = model.grad(v)
        J = model.jac(v) if state.m else np.zeros((0, v.size))
        c = model.cons(v) if state.m else np.zeros(0)
    else:
        g, J, c = evals
    rd = g + (J.T @ lam if state.m else 0.0) - zl + zu
    rd = np.where(state.fixed, 0.0, rd)
    parts = [rd, c]
    if state.low.any():
        parts.append((v - state.lb)[state.low] * zl[state.low] - state.mu)
    if state.upp.any():
        parts.append((state.ub - v)[state.upp] * zu[state.upp] - state.mu)
    return float(np.linalg.norm(np.concatenate([np.atleast_1d(p).ravel() for p in parts])))


def _merit(model, v, mu, nu, state):
    f = model.obj(v)
    dl = (v - state.lb)[state.low]
    du = (state.ub - v)[state.upp]
    if np.any(dl <= 0.0) or np.any(du <= 0.0):
        return np.inf, f, None
    bar = f - mu * (np.sum(np.log(dl)) + np.sum(np.log(du)))
    c = model.cons(v) if state.m else np.zeros(0)
    return bar + nu * np.sum(np.abs(c)), f, c


def solve_subproblem(problem, start=None, opts=None, warm=None):
    """Solve one bound/equality-constrained subproblem to the given tolerances.

    ``start`` is a primal vector in the coordinates of ``problem``; ``warm``
    is a payload returned by a previous solve of a structurally identical
    problem and takes precedence.  Returns a SubResult; hard linear-algebra
    failures are reported through ``stats.status`` rather than raised, while
    evaluation failures at an accepted iterate raise EvaluationError.
    """
    opts = opts or IpOptions()
    t0 = time.perf_counter()
    minp = as_minimization(problem)
    eqp = to_slack_form(minp)
    core = eqp.base if isinstance(eqp, SlackProblem) else eqp
    r_slice = getattr(core, "r_slice", None)
    rho = getattr(core, "rho", None)
    n, m = eqp.n, eqp.m

    lb, ub = eqp.lb, eqp.ub
    fixed = lb == ub
    low = np.isfinite(lb) & ~fixed
    upp = np.isfinite(ub) & ~fixed

    mu = float(opts.mu_init)
    if warm is not None:
        v = np.asarray(warm["v"], dtype=float).copy()
        lam = np.asarray(warm["lam"], dtype=float).copy()
        zl = np.asarray(warm["zl"], dtype=float).copy()
        zu = np.asarray(warm["zu"], dtype=float).copy()
        # push warm iterates off their bounds to the barrier-matched distance
        v = _push_interior(v, lb, ub, min(mu, 1e-3))
    else:
        if start is not None:
            s = np.asarray(start, dtype=float).reshape(-1)
            v = np.empty(n)
            v[:problem.n] = s
            if isinstance(eqp, SlackProblem):
                c0 = minp.cons(s)
                src = eqp.slack_src
                v[problem.n:] = np.clip(c0[src], minp.cl[src], minp.cu[src])
        else:
            v = eqp.x0.copy()
        kappa = 1e-8 if opts.warm_start else 1e-2
        v = _push_interior(v, lb, ub, kappa)
        lam = np.zeros(m)
        zl = np.zeros(n)
        zu = np.zeros(n)
        zl[low] = np.clip(mu / (v - lb)[low], 1e-8, 1e10)
        zu[upp] = np.clip(mu / (ub - v)[upp], 1e-8, 1e10)

    state = IpState(v=v, lam=lam, zl=zl, zu=zu, mu=mu, lb=lb, ub=ub,
                    low=low, upp=upp, fixed=fixed, r_slice=r_slice, rho=rho)
    stats = SubStats()
    tol_comp = opts.comp_tol()
    mu_floor = max(1e-16, min(opts.tol_dual, tol_comp) / 100.0)
    nu = 1.0
    stalls = 0
    g = J = c = None

    def fail(status):
        stats.status = status
        stats.time = time.perf_counter() - t0
        stats.mu_final = state.mu
        return _pack_result(problem, eqp, state, stats, g, J)

    while True:
        try:
            g = eqp.grad(state.v)
            J = eqp.jac(state.v) if m else np.zeros((0, n))
            c = eqp.cons(state.v) if m else np.zeros(0)
        except DomainError as exc:
            stats.status = "error"
            stats.time = time.perf_counter() - t0
            raise EvaluationError(str(exc), point=Point(x=state.v[:problem.n].copy(),
                                                        y=-state.lam.copy(),
                                                        z=(state.zl - state.zu)[:problem.n].copy())) from exc

        rd_true = g + (J.T @ state.lam if m else 0.0) - state.zl + state.zu
        stats.dual_inf = float(np.linalg.norm(np.where(fixed, 0.0, rd_true), np.inf)) if n else 0.0
        stats.primal_inf = float(np.linalg.norm(c, np.inf)) if m else 0.0
        comp_parts = []
        if low.any():
            comp_parts.append(np.abs((state.v - lb)[low] * state.zl[low]))
        if upp.any():
            comp_parts.append(np.abs((ub - state.v)[upp] * state.zu[upp]))
        stats.comp = float(max(np.max(p) for p in comp_parts)) if comp_parts else 0.0

        if (stats.dual_inf <= opts.tol_dual and stats.primal_inf <= opts.tol_primal
                and stats.comp <= tol_comp):
            stats.status = "solved"
            break
        if time.perf_counter() - t0 > opts.max_time:
            stats.status = "max_time"
            break
        if stats.iterations >= opts.max_iter:
            stats.status = "max_iter"
            break
        if (np.linalg.norm(state.v, np.inf) > 1e20
                or (m and np.linalg.norm(state.lam, np.inf) > 1e20)):
            stats.status = "diverged"
            break

        # monotone barrier update: shrink while the scaled KKT error permits
        def barrier_error(mu_val):
            e = max(stats.dual_inf, stats.primal_inf)
            if comp_parts:
                cm = max(float(np.max(np.abs(part - mu_val))) for part in comp_parts)
                e = max(e, cm)
            return e

        while state.mu > mu_floor and barrier_error(state.mu) <= 10.0 * state.mu:
            nxt = max(state.mu / 10.0, state.mu ** 1.5)
            if nxt >= state.mu:
                break
            state.mu = max(nxt, mu_floor)

        try:
            sys = assemble_kkt(state, eqp, evals=(g, J, c))
            delta = regularize(sys, opts.delta_min, opts.delta_growth)
            dx, dr, dlam = solve_kkt(sys)
        except RegularizationFailed:
            return fail("reg_failed")
        except SingularSystem:
            return fail("singular")
        stats.deltas.append(delta)
        stats.mu_trace.append(state.mu)

        dv = np.zeros(n)
        gen = state.gen_indices()
        dv[gen] = dx
        if state.has_r_block():
            dv[state.r_slice] = dr
        dv[fixed] = 0.0
        dl = state.v - lb
        du = ub - state.v
        dzl = np.zeros(n)
        dzu = np.zeros(n)
        dzl[low] = (state.mu - dl[low] * state.zl[low] - state.zl[low] * dv[low]) / dl[low]
        dzu[upp] = (state.mu - du[upp] * state.zu[upp] + state.zu[upp] * dv[upp]) / du[upp]

        tau = max(0.99, 1.0 - state.mu)
        a_p, a_d = step_lengths(state, (dv, dlam, dzl, dzu), tau)

        if m:
            nu = max(nu, 1.1 * float(np.linalg.norm(state.lam + dlam, np.inf)))
        try:
            phi0, f0, _ = _merit(eqp, state.v, state.mu, nu, state)
        except DomainError as exc:
            stats.status = "error"
            stats.time = time.perf_counter() - t0
            raise EvaluationError(str(exc), point=Point(x=state.v[:problem.n].copy(),
                                                        y=-state.lam.copy(),
                                                        z=(state.zl - state.zu)[:problem.n].copy())) from exc
        if not np.isfinite(f0) or abs(f0) > 1e30:
            stats.status = "diverged"
            break
        gbar = g.copy()
        gbar[low] -= state.mu / dl[low]
        gbar[upp] += state.mu / du[upp]
        dphi = float(gbar @ dv) - nu * float(np.sum(np.abs(c)))

        alpha = a_p
        accepted = False
        for _ in range(40):
            try:
                phi_t, _, _ = _merit(eqp, state.v + alpha * dv, state.mu, nu, state)
            except DomainError:
                phi_t = np.inf
            if np.isfinite(phi_t) and phi_t <= phi0 + 1e-4 * alpha * min(dphi, 0.0):
                accepted = True
                break
            alpha *= 0.5

        if not accepted or alpha < 0.1 * a_p:
            # merit search truncated a long Newton step; fall back to accepting
            # the fraction-to-boundary step when it contracts the full
            # primal-dual residual (the residual is linear in the dual rows)
            theta0 = _kkt_residual_norm(eqp, state, state.v, state.lam,
                                        state.zl, state.zu, evals=(g, J, c))
            try:
                theta_t = _kkt_residual_norm(eqp, state, state.v + a_p * dv,
                                             state.lam + a_p * dlam,
                                             state.zl + a_d * dzl,
                                             state.zu + a_d * dzu)
            except DomainError:
                theta_t = np.inf
            if theta_t <= (1.0 - 1e-4 * a_p) * theta0:
                alpha = a_p
                accepted = True
        if not accepted:
            stalls += 1
            if stalls >= 8:
                stats.status = "diverged"
                break
        else:
            stalls = 0

        state.v = state.v + alpha * dv
        state.lam = state.lam + alpha * dlam
        state.zl = state.zl + a_d * dzl
        state.zu = state.zu + a_d * dzu
        # keep bound multipliers within a factor kappa_sigma of mu/distance
        ks = 1e10
        dl = state.v - lb
        du = ub - state.v
        state.zl[low] = np.clip(state.zl[low], state.mu / (ks * dl[low]),
                                ks * state.mu / dl[low])
        state.zu[upp] = np.clip(state.zu[upp], state.mu / (ks * du[upp]),
                                ks * state.mu / du[upp])
        stats.iterations += 1

    stats.time = time.perf_counter() - t0
    stats.mu_final = state.mu
    return _pack_result(problem, eqp, state, stats, g, J)


def _pack_result(problem, eqp, state, stats, g, J):
    np_in = problem.n
    y = -state.lam.copy()
    z = (state.zl - state.zu)[:np_in].copy()
    if state.fixed[:np_in].any() and g is not None:
        # frozen variables absorb their dual residual into z
        rd = g + (J.T @ state.lam if state.m else 0.0)
        idx = np.flatnonzero(state.fixed[:np_in])
        z[idx] = rd[idx]
    warm = {"v": state.v.copy(), "lam": state.lam.copy(),
            "zl": state.zl.copy(), "zu": state.zu.copy()}
    return SubResult(x=state.v[:np_in].copy(), y=y, z=z, stats=stats, warm=warm)
