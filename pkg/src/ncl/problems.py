"""Registry of built-in desk-scale test problems.

Groups: convex QPs with analytic optima, classic small NLPs written in the
modeling language, constructions whose constraint Jacobians are
rank-deficient (duplicated, scaled and squared rows), least-squares systems
in zero-objective equality form, and small tax-policy instances.  Documented
solutions carry multipliers in the convention g - J^T y - z = 0.
"""

from __future__ import annotations

import numpy as np

from . import dsl
from .errors import UnknownProblem
from .model import Problem
from .tax import TaxConfig, build_tax_problem

_REGISTRY: dict = {}


def register(name, tags, builder, solution=None):
    if name in _REGISTRY:
        raise ValueError(f"duplicate problem name {name!r}")
    _REGISTRY[name] = (tuple(tags), builder, solution)


def get(name):
    """Fresh Problem instance with its own counters."""
    try:
        _, builder, _ = _REGISTRY[name]
    except KeyError:
        raise UnknownProblem(name) from None
    return builder()


def list_problems(tags=None):
    """Registered names (sorted), filtered by tag conjunction."""
    if tags is None:
        tags = ()
    elif isinstance(tags, str):
        tags = (tags,)
    return sorted(name for name, (t, _, _) in _REGISTRY.items()
                  if all(tag in t for tag in tags))


def tags_of(name):
    if name not in _REGISTRY:
        raise UnknownProblem(name)
    return _REGISTRY[name][0]


def solution_of(name):
    """Documented analytic solution dict (x, y, z, f) or None."""
    if name not in _REGISTRY:
        raise UnknownProblem(name)
    return _REGISTRY[name][2]


def _dsl_builder(name, text):
    def build():
        return dsl.build_problem(dsl.parse_model(text), name=name)
    return build


def _quad(name, Q, b, const=0.0, **kw):
    Q = np.asarray(Q, dtype=float)
    b = np.asarray(b, dtype=float)

    def build():
        return Problem(name, Q.shape[0],
                       obj=lambda x: 0.5 * x @ Q @ x + b @ x + const,
                       grad=lambda x: Q @ x + b,
                       hess=lambda x, y, s: s * Q,
                       **kw)
    return build


def _sol(x, y=(), z=None, f=None):
    x = np.asarray(x, dtype=float)
    return {"x": x, "y": np.asarray(y, dtype=float),
            "z": np.zeros_like(x) if z is None else np.asarray(z, dtype=float),
            "f": f}


# -- convex quadratic programs with analytic optima --

register("qp-bound", ("convex", "qp", "bounds"),
         _quad("qp-bound", [[2.0]], [0.0], lb=[1.0], x0=[3.0]),
         _sol([1.0], z=[2.0], f=1.0))

register("qp2", ("convex", "qp", "equality-only"),
         _quad("qp2", [[2.0, 0.0], [0.0, 2.0]], [-4.0, -2.0], const=5.0,
               m=1, cons=lambda x: np.array([x[0] + x[1]]),
               jac=lambda x: np.array([[1.0, 1.0]]),
               cl=[1.0], cu=[1.0], x0=[0.0, 0.0]),
         _sol([1.0, 0.0], y=[-2.0], f=2.0))

register("qp-eq3", ("convex", "qp", "equality-only"),
         _quad("qp-eq3", np.eye(3), np.zeros(3),
               m=1, cons=lambda x: np.array([x.sum()]),
               jac=lambda x: np.ones((1, 3)),
               cl=[3.0], cu=[3.0], x0=[0.0, 0.0, 0.0]),
         _sol([1.0, 1.0, 1.0], y=[1.0], f=1.5))

register("qp-ineq", ("convex", "qp"),
         _quad("qp-ineq", 2.0 * np.eye(2), np.zeros(2),
               m=1, cons=lambda x: np.array([x[0] + x[1]]),
               jac=lambda x: np.array([[1.0, 1.0]]),
               cl=[1.0], cu=[np.inf], x0=[2.0, -1.0]),
         _sol([0.5, 0.5], y=[1.0], f=0.5))

register("qp-box-eq", ("convex", "qp", "bounds"),
         _quad("qp-box-eq", 2.0 * np.eye(2), [2.0, -6.0], const=10.0,
               m=1, cons=lambda x: np.array([x[0] + x[1]]),
               jac=lambda x: np.array([[1.0, 1.0]]),
               cl=[1.0], cu=[1.0], lb=[0.0, 0.0], x0=[0.5, 0.5]),
         _sol([0.0, 1.0], y=[-4.0], z=[6.0, 0.0], f=5.0))

register("qp-box", ("convex", "qp", "bounds"),
         _quad("qp-box", [[4.0, 1.0], [1.0, 2.0]], [-1.0, -1.0],
               lb=[0.0, 0.0], ub=[1.0, 1.0], x0=[0.9, 0.9]),
         _sol([1.0 / 7.0, 3.0 / 7.0], f=-2.0 / 7.0))

register("hs35", ("convex", "qp", "bounds", "dsl"),
         _dsl_builder("hs35", """
             var x1 in [0, 1e6] start 0.5;
             var x2 in [0, 1e6] start 0.5;
             var x3 in [0, 1e6] start 0.5;
             minimize 9 - 8*x1 - 6*x2 - 4*x3 + 2*x1^2 + 2*x2^2 + x3^2
                      + 2*x1*x2 + 2*x1*x3;
             subject to c1: x1 + x2 + 2*x3 <= 3;
         """),
         _sol([4.0 / 3.0, 7.0 / 9.0, 4.0 / 9.0], y=[-2.0 / 9.0], f=1.0 / 9.0))

register("max-pair", ("convex", "dsl"),
         _dsl_builder("max-pair", """
             var x start 0;
             var y start 0;
             maximize 0 - ((x - 3)^2 + (y + 1)^2);
         """),
         _sol([3.0, -1.0], f=0.0))

register("expline", ("convex", "dsl"),
         _dsl_builder("expline", "var x start 1; minimize exp(x) + x^2;"),
         _sol([-0.35173371124919584], f=0.8271840261275243))

# -- classic small NLPs --

register("rosenbrock", ("classic", "dsl"),
         _dsl_builder("rosenbrock", """
             var x start -1.2;
             var y start 1;
             minimize (1 - x)^2 + 100*(y - x^2)^2;
         """),
         _sol([1.0, 1.0], f=0.0))

register("hs6", ("classic", "dsl", "equality-only"),
         _dsl_builder("hs6", """
             var x start -1.2;
             var y start 1;
             minimize (1 - x)^2;
             subject to c1: 10*(y - x^2) == 0;
         """),
         _sol([1.0, 1.0], y=[0.0], f=0.0))

register("circle", ("classic", "dsl", "equality-only"),
         _dsl_builder("circle", """
             var x start -0.7;
             var y start -0.8;
             minimize x + y;
             subject to ring: x^2 + y^2 == 1;
         """),
         _sol([-0.7071067811865476, -0.7071067811865476],
              y=[-0.7071067811865475], f=-1.4142135623730951))

# -- rank-deficient constraint Jacobians (duplicated / scaled / squared rows) --

def _build_licq_dup():
    return Problem("licq-dup", 2,
                   obj=lambda x: x[0] ** 2 + x[1] ** 2,
                   grad=lambda x: 2.0 * x,
                   hess=lambda x, y, s: s * 2.0 * np.eye(2),
                   m=2,
                   cons=lambda x: np.array([x[0], x[0]]),
                   jac=lambda x: np.array([[1.0, 0.0], [1.0, 0.0]]),
                   cl=[0.0, 0.0], cu=[0.0, 0.0], x0=[1.0, 1.0])


register("licq-dup", ("degenerate", "equality-only"), _build_licq_dup,
         _sol([0.0, 0.0], y=[0.0, 0.0], f=0.0))


def _build_licq_dup3():
    A = np.array([[1.0, 1.0], [2.0, 2.0], [3.0, 3.0]])

    def obj(x):
        return (x[0] - 2.0) ** 2 + (x[1] - 1.0) ** 2

    return Problem("licq-dup3", 2, obj=obj,
                   grad=lambda x: np.array([2.0 * (x[0] - 2.0), 2.0 * (x[1] - 1.0)]),
                   hess=lambda x, y, s: s * 2.0 * np.eye(2),
                   m=3, cons=lambda x: A @ x, jac=lambda x: A,
                   cl=[1.0, 2.0, 3.0], cu=[1.0, 2.0, 3.0], x0=[0.0, 0.0])


register("licq-dup3", ("degenerate", "equality-only"), _build_licq_dup3,
         _sol([1.0, 0.0], y=[-2.0, 0.0, 0.0], f=2.0))


def _build_licq_dupnl():
    def cons(x):
        t = x[1] - x[0] ** 2
        return np.array([t, 2.0 * t])

    def jac(x):
        return np.array([[-2.0 * x[0], 1.0], [-4.0 * x[0], 2.0]])

    def hess(x, y, s):
        H = s * 2.0 * np.eye(2)
        H[0, 0] -= (y[0] + 2.0 * y[1]) * (-2.0)
        return H

    return Problem("licq-dupnl", 2,
                   obj=lambda x: x[0] ** 2 + x[1] ** 2,
                   grad=lambda x: 2.0 * x,
                   hess=hess, m=2, cons=cons, jac=jac,
                   cl=[0.0, 0.0], cu=[0.0, 0.0], x0=[1.0, 1.0])


register("licq-dupnl", ("degenerate", "equality-only"), _build_licq_dupnl,
         _sol([0.0, 0.0], y=[0.0, 0.0], f=0.0))


def _build_licq_sqdup():
    def cons(x):
        t = (x[0] - 1.0) ** 2
        return np.array([t, 2.0 * t])

    def jac(x):
        d = 2.0 * (x[0] - 1.0)
        return np.array([[d, 0.0], [2.0 * d, 0.0]])

    def hess(x, y, s):
        H = s * 2.0 * np.eye(2)
        H[0, 0] -= (y[0] + 2.0 * y[1]) * 2.0
        return H

    return Problem("licq-sqdup", 2,
                   obj=lambda x: (x[0] - 1.0) ** 2 + x[1] ** 2,
                   grad=lambda x: np.array([2.0 * (x[0] - 1.0), 2.0 * x[1]]),
                   hess=hess, m=2, cons=cons, jac=jac,
                   cl=[0.0, 0.0], cu=[0.0, 0.0], x0=[2.0, 1.0])


register("licq-sqdup", ("degenerate", "equality-only"), _build_licq_sqdup,
         _sol([1.0, 0.0], y=[0.0, 0.0], f=0.0))

# -- least-squares systems in zero-objective equality form --

def _linear_system(name, A, b, **kw):
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    m, n = A.shape

    def build():
        p = Problem(name, n,
                    obj=lambda x: 0.0,
                    grad=lambda x: np.zeros(n),
                    hess=lambda x, y, s: np.zeros((n, n)),
                    m=m,
                    cons=lambda x: A @ x - b,
                    jac=lambda x: A.copy(),
                    cl=np.zeros(m), cu=np.zeros(m), **kw)
        p.ls_data = (A, b)
        return p
    return build


register("nls-lin2", ("nls", "equality-only"),
         _linear_system("nls-lin2", [[2.0, 1.0], [1.0, 3.0]], [1.0, 2.0]),
         _sol([0.2, 0.6], y=[0.0, 0.0], f=0.0))

register("nls-incons", ("nls", "equality-only"),
         _linear_system("nls-incons", [[1.0], [1.0]], [0.0, 1.0]),
         _sol([0.5], f=0.25))

_rng_over = np.random.default_rng(7)
register("nls-over", ("nls", "equality-only"),
         _linear_system("nls-over", _rng_over.standard_normal((20, 5)),
                        _rng_over.standard_normal(20)))

_rng_tall = np.random.default_rng(11)
register("nls-tall", ("nls", "equality-only"),
         _linear_system("nls-tall", _rng_tall.standard_normal((8, 3)),
                        _rng_tall.standard_normal(8)))


def _build_nls_rosen():
    def cons(x):
        return np.array([10.0 * (x[1] - x[0] ** 2), 1.0 - x[0]])

    def jac(x):
        return np.array([[-20.0 * x[0], 10.0], [-1.0, 0.0]])

    def hess(x, y, s):
        H = np.zeros((2, 2))
        H[0, 0] = -y[0] * (-20.0)
        return H

    return Problem("nls-rosen", 2,
                   obj=lambda x: 0.0,
                   grad=lambda x: np.zeros(2),
                   hess=hess, m=2, cons=cons, jac=jac,
                   cl=[0.0, 0.0], cu=[0.0, 0.0], x0=[-1.2, 1.0])


register("nls-rosen", ("nls", "equality-only"), _build_nls_rosen,
         _sol([1.0, 1.0], f=0.0))

register("nls-bound", ("nls", "equality-only", "bounds"),
         _linear_system("nls-bound", np.eye(2), [2.0, -1.0],
                        lb=[0.0, 0.0], ub=[1.0, 1.0], x0=[0.5, 0.5]),
         _sol([1.0, 0.0], f=1.0))

# -- tax-policy shortcuts --

register("tax1d", ("tax",), lambda: build_tax_problem(TaxConfig(na=12), name="tax1d"))
register("tax2d", ("tax",), lambda: build_tax_problem(TaxConfig(na=12, nb=5), name="tax2d"))
