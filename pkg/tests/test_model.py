import numpy as np
import pytest

from ncl.errors import BadDimension, DomainError
from ncl.model import (NegatedProblem, Problem, SlackProblem, as_minimization,
                       root_problem, to_slack_form)

from conftest import central_grad, central_jac


def quad2():
    return Problem("quad2", 2,
                   obj=lambda x: x[0] ** 2 + x[1] ** 2,
                   grad=lambda x: 2.0 * x,
                   hess=lambda x, y, s: s * 2.0 * np.eye(2))


def test_obj_examples():
    p = quad2()
    assert p.obj([0.0, 0.0]) == 0.0
    assert p.obj([1.0, 2.0]) == 5.0


def test_obj_domain_error():
    p = Problem("logx", 1, obj=lambda x: np.log(x[0]), grad=lambda x: 1.0 / x,
                hess=lambda x, y, s: np.zeros((1, 1)))
    with pytest.raises(DomainError):
        p.obj([-1.0])


def test_cons_examples():
    p = Problem("lin", 2, obj=lambda x: 0.0, grad=lambda x: np.zeros(2),
                m=1, cons=lambda x: np.array([x[0] + x[1] - 1.0]),
                jac=lambda x: np.array([[1.0, 1.0]]))
    assert p.cons([0.5, 0.5]) == pytest.approx([0.0])

    q = Problem("sq", 2, obj=lambda x: 0.0, grad=lambda x: np.zeros(2),
                m=1, cons=lambda x: np.array([x[0] ** 2 - x[1]]),
                jac=lambda x: np.array([[2.0 * x[0], -1.0]]))
    assert q.cons([2.0, 1.0]) == pytest.approx([3.0])

    assert quad2().cons([1.0, 1.0]).size == 0


def test_derivs_examples():
    p = Problem("sq1", 1, obj=lambda x: x[0] ** 2, grad=lambda x: 2.0 * x,
                hess=lambda x, y, s: s * 2.0 * np.eye(1))
    g, J = p.derivs([3.0])
    assert g == pytest.approx([6.0])
    assert J.shape == (0, 1)

    q = Problem("prod", 2, obj=lambda x: 0.0, grad=lambda x: np.zeros(2),
                m=1, cons=lambda x: np.array([x[0] * x[1]]),
                jac=lambda x: np.array([[x[1], x[0]]]))
    _, J = q.derivs([2.0, 5.0])
    assert np.allclose(J, [[5.0, 2.0]])


def test_hess_lag_examples():
    p = Problem("sq1c", 1, obj=lambda x: x[0] ** 2, grad=lambda x: 2.0 * x,
                hess=lambda x, y, s: np.array([[2.0 * s - 2.0 * y[0]]]),
                m=1, cons=lambda x: np.array([x[0] ** 2]),
                jac=lambda x: np.array([[2.0 * x[0]]]))
    assert np.allclose(p.hess([3.0], None, 1.0), [[2.0]])
    assert np.allclose(p.hess([3.0], [1.0], 1.0), [[0.0]])


def test_hess_lag_fd(rng):
    p = Problem("mix", 2,
                obj=lambda x: x[0] ** 2 * x[1] + np.sin(x[1]),
                grad=lambda x: np.array([2 * x[0] * x[1],
                                         x[0] ** 2 + np.cos(x[1])]),
                hess=lambda x, y, s: s * np.array([[2 * x[1], 2 * x[0]],
                                                   [2 * x[0], -np.sin(x[1])]])
                - y[0] * np.array([[0.0, 1.0], [1.0, 0.0]]),
                m=1, cons=lambda x: np.array([x[0] * x[1]]),
                jac=lambda x: np.array([[x[1], x[0]]]))
    for _ in range(5):
        x = rng.uniform(-1, 1, 2)
        y = rng.uniform(-1, 1, 1)
        lag_grad = lambda z: p.grad(z) - p.jac(z).T @ y
        H_fd = central_jac(lag_grad, x)
        assert np.allclose(p.hess(x, y, 1.0), 0.5 * (H_fd + H_fd.T), atol=1e-5)


def test_bad_dimension():
    p = quad2()
    with pytest.raises(BadDimension):
        p.obj([1.0])
    with pytest.raises(BadDimension):
        p.hess([1.0, 2.0], y=[1.0])


def test_counters_increment_by_one():
    p = quad2()
    before = p.counters.snapshot()
    p.obj([1.0, 1.0])
    p.grad([1.0, 1.0])
    assert p.counters.snapshot() == (before[0] + 1, before[1] + 1, 0, 0, 0)
    p.derivs([1.0, 1.0])
    assert p.counters.n_grad == 2 and p.counters.n_jac == 1


def ineq_problem():
    # 0 <= x1^2 <= inf with a quadratic objective
    return Problem("ineq1", 1, obj=lambda x: (x[0] - 1.0) ** 2,
                   grad=lambda x: np.array([2.0 * (x[0] - 1.0)]),
                   hess=lambda x, y, s: np.array([[2.0 * s - 2.0 * y[0]]]),
                   m=1, cons=lambda x: np.array([x[0] ** 2]),
                   jac=lambda x: np.array([[2.0 * x[0]]]),
                   cl=[0.0], cu=[np.inf], x0=[2.0])


class TestSlackForm:
    def test_all_equality_unchanged(self):
        p = Problem("eq", 2, obj=lambda x: x[0], grad=lambda x: np.array([1.0, 0.0]),
                    hess=lambda x, y, s: np.zeros((2, 2)),
                    m=1, cons=lambda x: np.array([x[0] + x[1]]),
                    jac=lambda x: np.ones((1, 2)), cl=[0.0], cu=[0.0])
        assert to_slack_form(p) is p

    def test_single_inequality(self):
        s = to_slack_form(ineq_problem())
        assert isinstance(s, SlackProblem)
        assert s.n == 2 and s.m == 1
        assert s.lb[1] == 0.0 and s.ub[1] == np.inf
        # slack-form row is c(x) - s
        assert s.cons([2.0, 3.0]) == pytest.approx([1.0])
        assert np.all(s.cl == 0.0) and np.all(s.cu == 0.0)

    def test_feasibility_preserved(self, rng):
        p = ineq_problem()
        s = to_slack_form(p)
        for _ in range(5):
            x = rng.uniform(-2, 2, 1)
            c = p.cons(x)
            v = np.concatenate([x, c])
            assert np.allclose(s.cons(v), 0.0)

    def test_idempotent(self):
        s = to_slack_form(ineq_problem())
        s2 = to_slack_form(s)
        assert s2.n == s.n and s2.m == s.m

    def test_objective_invariant(self, rng):
        p = ineq_problem()
        s = to_slack_form(p)
        for _ in range(5):
            x = rng.uniform(-2, 2, 1)
            v = np.concatenate([x, [0.7]])
            assert s.obj(v) == pytest.approx(p.obj(x))

    def test_jacobian_slack_block(self):
        s = to_slack_form(ineq_problem())
        J = s.jac([2.0, 1.0])
        assert np.allclose(J, [[4.0, -1.0]])

    def test_equality_shift_normalization(self):
        p = Problem("shift", 1, obj=lambda x: 0.0, grad=lambda x: np.zeros(1),
                    hess=lambda x, y, s: np.zeros((1, 1)),
                    m=1, cons=lambda x: np.array([x[0]]),
                    jac=lambda x: np.array([[1.0]]), cl=[2.0], cu=[2.0])
        s = to_slack_form(p)
        assert s.n == 1
        assert s.cons([2.0]) == pytest.approx([0.0])


def test_negation_wrapper():
    p = Problem("maxq", 1, obj=lambda x: -(x[0] - 3.0) ** 2,
                grad=lambda x: np.array([-2.0 * (x[0] - 3.0)]),
                hess=lambda x, y, s: np.array([[-2.0 * s]]),
                sense="maximize")
    q = as_minimization(p)
    assert isinstance(q, NegatedProblem)
    assert q.obj([1.0]) == pytest.approx(4.0)
    assert q.grad([1.0]) == pytest.approx([-4.0])
    assert np.allclose(q.hess([1.0], None, 1.0), [[2.0]])
    assert root_problem(q) is p
    assert as_minimization(q) is q
