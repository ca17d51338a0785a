"""Augmented-Lagrangian subproblem with explicit residual variables.

For an inner problem ``min phi(x) s.t. cl <= c(x) <= cu, lb <= x <= ub``,
the wrapped subproblem over stacked variables v = (x, r) is

    min  phi(x) + y^T r + (rho/2) ||r||^2
    s.t. cl <= c(x) + r <= cu,   lb <= x <= ub,   r free.

The multiplier estimate y and penalty rho are mutable in place so the same
wrapper serves a whole outer-iteration sequence.  With r = 0 the subproblem
coincides with the inner problem; the stacked Jacobian [J(x) | I] has full
row rank for any J, which is the whole point of carrying r.
"""

from __future__ import annotations

import numpy as np

from .errors import BadDimension, NonPositiveRho
from .model import Problem, as_minimization


class NclProblem(Problem):
    """Problem view of the residual-augmented subproblem over (x, r)."""

    def __init__(self, inner, y, rho, name=None):
        inner = as_minimization(inner)
        self.inner = inner
        m, nx = inner.m, inner.n
        y = np.asarray(y, dtype=float).reshape(-1)
        if y.size != m:
            raise BadDimension(f"y has length {y.size}, expected {m}")
        if not rho > 0:
            raise NonPositiveRho(f"rho must be > 0, got {rho}")
        self.y = y.copy()
        self.rho = float(rho)
        self.nx = nx
        self.r_slice = slice(nx, nx + m)

        super().__init__(name or inner.name + "+resid", nx + m,
                         obj=None, grad=None, m=m,
                         x0=np.concatenate([inner.x0, np.zeros(m)]),
                         lb=np.concatenate([inner.lb, np.full(m, -np.inf)]),
                         ub=np.concatenate([inner.ub, np.full(m, np.inf)]),
                         cl=inner.cl, cu=inner.cu, sense="minimize")

    def split(self, v):
        """x-part and r-part of a stacked vector."""
        v = np.asarray(v, dtype=float).reshape(-1)
        return v[:self.nx], v[self.r_slice]

    def update_params(self, y=None, rho=None):
        """Swap in new (y, rho); the stacked structure is untouched."""
        if y is not None:
            y = np.asarray(y, dtype=float).reshape(-1)
            if y.size != self.m:
                raise BadDimension(f"y has length {y.size}, expected {self.m}")
            self.y[:] = y
        if rho is not None:
            if not rho > 0:
                raise NonPositiveRho(f"rho must be > 0, got {rho}")
            self.rho = float(rho)

    # -- evaluation over stacked (x, r) --

    def _obj_impl(self, v):
        x, r = v[:self.nx], v[self.r_slice]
        return self.inner.obj(x) + float(self.y @ r) + 0.5 * self.rho * float(r @ r)

    def _grad_impl(self, v):
        x, r = v[:self.nx], v[self.r_slice]
        return np.concatenate([self.inner.grad(x), self.y + self.rho * r])

    def _cons_impl(self, v):
        x, r = v[:self.nx], v[self.r_slice]
        return self.inner.cons(x) + r

    def _jac_impl(self, v):
        x = v[:self.nx]
        J = np.zeros((self.m, self.n))
        J[:, :self.nx] = self.inner.jac(x)
        J[:, self.r_slice] = np.eye(self.m)
        return J

    def _hess_impl(self, v, y, obj_weight):
        x = v[:self.nx]
        H = np.zeros((self.n, self.n))
        H[:self.nx, :self.nx] = self.inner.hess(x, y, obj_weight)
        rr = np.arange(self.nx, self.n)
        H[rr, rr] = obj_weight * self.rho
        return H


def make_ncl(p, y=None, rho=100.0):
    """Wrap p as a residual-augmented subproblem (identity pass-through if already one).

    Defaults: y = ones(m), rho = 100, r started at zero.
    """
    if isinstance(p, NclProblem):
        return p
    m = p.m
    if y is None:
        y = np.ones(m)
    return NclProblem(p, y, rho)
