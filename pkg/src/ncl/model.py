"""Uniform smooth-NLP abstraction.

A :class:`Problem` is
``min/max  phi(x)  s.t.  cl <= c(x) <= cu,  lb <= x <= ub``
with exact first and second derivatives.  Infinite bounds use ``numpy.inf``.
Equality rows have ``cl == cu``.  All solvers in this package consume this
interface; problems come from the built-in registry, the tax generator, or
the text modeling language.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import BadDimension, DomainError


@dataclass
class EvalCounters:
    """Evaluation counts, incremented by exactly one per public call."""

    n_obj: int = 0
    n_grad: int = 0
    n_cons: int = 0
    n_jac: int = 0
    n_hess: int = 0

    def snapshot(self):
        return (self.n_obj, self.n_grad, self.n_cons, self.n_jac, self.n_hess)


@dataclass
class Point:
    """Primal-dual point: primal x, constraint multipliers y, bound multipliers z.

    Multipliers follow the convention ``g(x) - J(x)^T y - z = 0`` at a
    first-order point; z entries for unbounded components are zero.
    """

    x: np.ndarray
    y: np.ndarray = field(default_factory=lambda: np.zeros(0))
    z: np.ndarray = field(default_factory=lambda: np.zeros(0))


def _as_vector(v, n, what):
    arr = np.asarray(v, dtype=float).reshape(-1)
    if arr.size != n:
        raise BadDimension(f"{what}: expected length {n}, got {arr.size}")
    return arr


class Problem:
    """Smooth constrained problem with evaluation counters.

    Evaluator callables:
      obj(x) -> float
      grad(x) -> (n,)
      cons(x) -> (m,)
      jac(x) -> (m, n) dense
      hess(x, y, obj_weight) -> (n, n) symmetric, equal to
          obj_weight * H0(x) - sum_i y_i * Hi(x)
    where H0 is the objective Hessian and Hi the constraint Hessians.
    """

    def __init__(self, name, n, *, obj, grad, hess=None, m=0, cons=None, jac=None,
                 x0=None, lb=None, ub=None, cl=None, cu=None, sense="minimize"):
        if sense not in ("minimize", "maximize"):
            raise ValueError(f"bad sense {sense!r}")
        self.name = name
        self.n = int(n)
        self.m = int(m)
        self.sense = sense
        self._fn_obj = obj
        self._fn_grad = grad
        self._fn_hess = hess
        self._fn_cons = cons
        self._fn_jac = jac

        self.lb = np.full(self.n, -np.inf) if lb is None else _as_vector(lb, self.n, "lb")
        self.ub = np.full(self.n, np.inf) if ub is None else _as_vector(ub, self.n, "ub")
        if np.any(self.lb > self.ub):
            raise ValueError(f"{name}: lb > ub on some component")
        self.cl = np.zeros(self.m) if cl is None else _as_vector(cl, self.m, "cl")
        self.cu = np.zeros(self.m) if cu is None else _as_vector(cu, self.m, "cu")
        if np.any(self.cl > self.cu):
            raise ValueError(f"{name}: cl > cu on some row")

        x0 = np.zeros(self.n) if x0 is None else _as_vector(x0, self.n, "x0")
        self.x0 = np.clip(x0, self.lb, self.ub)
        self.counters = EvalCounters()

    # -- evaluation hooks (overridable by wrappers) --

    def _obj_impl(self, x):
        return float(self._fn_obj(x))

    def _grad_impl(self, x):
        return np.asarray(self._fn_grad(x), dtype=float).reshape(-1)

    def _cons_impl(self, x):
        if self._fn_cons is None:
            return np.zeros(0)
        return np.asarray(self._fn_cons(x), dtype=float).reshape(-1)

    def _jac_impl(self, x):
        if self._fn_jac is None:
            return np.zeros((0, self.n))
        return np.asarray(self._fn_jac(x), dtype=float).reshape(self.m, self.n)

    def _hess_impl(self, x, y, obj_weight):
        if self._fn_hess is None:
            raise NotImplementedError(f"{self.name}: no Hessian evaluator")
        return np.asarray(self._fn_hess(x, y, obj_weight), dtype=float)

    # -- public evaluation API (validates, counts) --

    def obj(self, x):
        x = _as_vector(x, self.n, "x")
        self.counters.n_obj += 1
        val = self._obj_impl(x)
        if not np.isfinite(val):
            raise DomainError(f"{self.name}: objective non-finite at x={x!r}")
        return val

    def grad(self, x):
        x = _as_vector(x, self.n, "x")
        self.counters.n_grad += 1
        g = self._grad_impl(x)
        if g.size != self.n:
            raise BadDimension(f"{self.name}: gradient has length {g.size}, expected {self.n}")
        if not np.all(np.isfinite(g)):
            raise DomainError(f"{self.name}: gradient non-finite")
        return g

    def cons(self, x):
        x = _as_vector(x, self.n, "x")
        self.counters.n_cons += 1
        c = self._cons_impl(x)
        if c.size != self.m:
            raise BadDimension(f"{self.name}: constraints have length {c.size}, expected {self.m}")
        if not np.all(np.isfinite(c)):
            raise DomainError(f"{self.name}: constraint value non-finite")
        return c

    def jac(self, x):
        x = _as_vector(x, self.n, "x")
        self.counters.n_jac += 1
        J = self._jac_impl(x)
        if J.shape != (self.m, self.n):
            raise BadDimension(f"{self.name}: Jacobian shape {J.shape}, expected {(self.m, self.n)}")
        if not np.all(np.isfinite(J)):
            raise DomainError(f"{self.name}: Jacobian non-finite")
        return J

    def derivs(self, x):
        """Objective gradient and constraint Jacobian at x."""
        return self.grad(x), self.jac(x)

    def hess(self, x, y=None, obj_weight=1.0):
        """Lagrangian Hessian  obj_weight * H0(x) - sum_i y_i Hi(x)."""
        x = _as_vector(x, self.n, "x")
        y = np.zeros(self.m) if y is None else _as_vector(y, self.m, "y")
        self.counters.n_hess += 1
        H = self._hess_impl(x, y, float(obj_weight))
        if H.shape != (self.n, self.n):
            raise BadDimension(f"{self.name}: Hessian shape {H.shape}, expected {(self.n, self.n)}")
        if not np.all(np.isfinite(H)):
            raise DomainError(f"{self.name}: Hessian non-finite")
        return H

    # -- structural helpers --

    @property
    def equality_mask(self):
        return self.cl == self.cu

    def is_equality_form(self):
        """True when every constraint is an equality pinned at zero."""
        return self.m == 0 or bool(np.all(self.equality_mask & (self.cl == 0.0)))

    def violation(self, x, c=None):
        """Componentwise distance of c(x) to its bound interval."""
        if self.m == 0:
            return np.zeros(0)
        if c is None:
            c = self.cons(x)
        return np.maximum(np.maximum(self.cl - c, c - self.cu), 0.0)

    def __repr__(self):
        return f"<Problem {self.name}: n={self.n}, m={self.m}, {self.sense}>"


class NegatedProblem(Problem):
    """Minimization view of a maximization problem (objective sign flipped)."""

    def __init__(self, base):
        self.base = base
        super().__init__(base.name, base.n, obj=None, grad=None, m=base.m,
                         x0=base.x0, lb=base.lb, ub=base.ub, cl=base.cl, cu=base.cu,
                         sense="minimize")

    def _obj_impl(self, x):
        return -self.base.obj(x)

    def _grad_impl(self, x):
        return -self.base.grad(x)

    def _cons_impl(self, x):
        return self.base.cons(x)

    def _jac_impl(self, x):
        return self.base.jac(x)

    def _hess_impl(self, x, y, obj_weight):
        return self.base.hess(x, y, -obj_weight)


def as_minimization(p):
    """Return p if minimizing, else a sign-flipped minimization view."""
    return p if p.sense == "minimize" else NegatedProblem(p)


class SlackProblem(Problem):
    """Equality-form view of a problem with inequality or range constraints.

    Each non-equality row ``cl_i <= c_i(x) <= cu_i`` becomes
    ``c_i(x) - s_i = 0`` with a new slack variable ``cl_i <= s_i <= cu_i``;
    equality rows are shifted so that every row reads ``C_i(v) = 0``.
    Slack variables are appended after the original ones, so original
    components are ``v[:n_base]``.
    """

    def __init__(self, base):
        self.base = base
        eq = base.equality_mask
        self.n_base = base.n
        self.slack_src = np.flatnonzero(~eq)
        ns = self.slack_src.size
        self._shift = np.where(eq, base.cl, 0.0)

        lb = np.concatenate([base.lb, base.cl[self.slack_src]])
        ub = np.concatenate([base.ub, base.cu[self.slack_src]])
        c0 = base.cons(base.x0)
        s0 = np.clip(c0[self.slack_src], base.cl[self.slack_src], base.cu[self.slack_src])
        x0 = np.concatenate([base.x0, s0])

        super().__init__(base.name + "+slack", base.n + ns, obj=None, grad=None,
                         m=base.m, x0=x0, lb=lb, ub=ub,
                         cl=np.zeros(base.m), cu=np.zeros(base.m), sense=base.sense)

    def split(self, v):
        """Original variables and slack values of a stacked vector."""
        return v[:self.n_base], v[self.n_base:]

    def _obj_impl(self, x):
        return self.base.obj(x[:self.n_base])

    def _grad_impl(self, x):
        g = np.zeros(self.n)
        g[:self.n_base] = self.base.grad(x[:self.n_base])
        return g

    def _cons_impl(self, x):
        c = self.base.cons(x[:self.n_base]) - self._shift
        c[self.slack_src] -= x[self.n_base:]
        return c

    def _jac_impl(self, x):
        J = np.zeros((self.m, self.n))
        J[:, :self.n_base] = self.base.jac(x[:self.n_base])
        J[self.slack_src, self.n_base + np.arange(self.slack_src.size)] = -1.0
        return J

    def _hess_impl(self, x, y, obj_weight):
        H = np.zeros((self.n, self.n))
        H[:self.n_base, :self.n_base] = self.base.hess(x[:self.n_base], y, obj_weight)
        return H


def to_slack_form(p):
    """Equivalent all-equality problem; returns p itself when already in that form."""
    if p.is_equality_form():
        return p
    return SlackProblem(p)


def root_problem(p):
    """Innermost wrapped problem (unwraps slack/negation/residual layers)."""
    while True:
        nxt = getattr(p, "base", None) or getattr(p, "inner", None)
        if nxt is None:
            return p
        p = nxt
