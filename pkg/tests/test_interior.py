import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ncl.errors import NonInterior, SingularSystem
from ncl.interior import (IpOptions, IpState, KktSystem, assemble_kkt,
                          regularize, solve_kkt, solve_subproblem, step_lengths)
from ncl.model import Problem
from ncl.problems import get as get_problem
from ncl.subproblem import make_ncl


def dense_lu_oracle(K, b):
    """Independent check: dense LU on the full block matrix, refined to eps."""
    x = np.linalg.solve(K, b)
    for _ in range(3):
        r = b - K @ x
        if np.linalg.norm(r, np.inf) <= 1e-15 * (1.0 + np.linalg.norm(b, np.inf)):
            break
        x = x + np.linalg.solve(K, r)
    return x


def make_state(v, lam, zl, zu, mu, lb, ub, r_slice=None, rho=None):
    v = np.asarray(v, float)
    lb = np.asarray(lb, float)
    ub = np.asarray(ub, float)
    fixed = lb == ub
    return IpState(v=v, lam=np.asarray(lam, float), zl=np.asarray(zl, float),
                   zu=np.asarray(zu, float), mu=mu, lb=lb, ub=ub,
                   low=np.isfinite(lb) & ~fixed, upp=np.isfinite(ub) & ~fixed,
                   fixed=fixed, r_slice=r_slice, rho=rho)


def toy_kkt(rd=(1.0, 1.0, 1.0)):
    """1 general variable, 1 constraint, residual block: H=2, J=1, rho=1."""
    return KktSystem(H=np.array([[2.0]]), D=np.zeros(1), J=np.array([[1.0]]),
                     rd_x=np.array([rd[0]]), rp=np.array([rd[2]]),
                     rho=1.0, rd_r=np.array([rd[1]]), fixed=np.zeros(1, bool))


class TestKktSystem:
    def test_toy_full_matrix(self):
        K = toy_kkt().full_matrix()
        assert np.allclose(K, [[2.0, 0.0, 1.0],
                               [0.0, 1.0, 1.0],
                               [1.0, 1.0, 0.0]])

    def test_zero_rhs_zero_direction(self):
        sys = toy_kkt(rd=(0.0, 0.0, 0.0))
        regularize(sys)
        dx, dr, dlam = solve_kkt(sys)
        assert np.allclose(dx, 0.0) and np.allclose(dr, 0.0) and np.allclose(dlam, 0.0)

    def test_toy_matches_dense_oracle(self):
        sys = toy_kkt(rd=(1.0, 1.0, 1.0))
        regularize(sys)
        dx, dr, dlam = solve_kkt(sys)
        sol = np.linalg.solve(sys.full_matrix(), sys.full_rhs())
        assert abs(dx[0] - sol[0]) < 1e-12
        assert abs(dr[0] - sol[1]) < 1e-12
        assert abs(dlam[0] - sol[2]) < 1e-12

    @pytest.mark.parametrize("rho", [1.0, 1e3, 1e8])
    def test_random_reduced_vs_full(self, rho, rng):
        for trial in range(10):
            n, m = 10, 6
            A = rng.standard_normal((n, n))
            H = 0.5 * (A + A.T)
            D = rng.uniform(0.0, 10.0, n)
            J = rng.standard_normal((m, n))
            if trial % 2 == 0:
                J[1] = J[0]   # rank-deficient
            sys = KktSystem(H=H, D=D, J=J,
                            rd_x=rng.standard_normal(n),
                            rp=rng.standard_normal(m),
                            rho=rho, rd_r=rng.standard_normal(m),
                            fixed=np.zeros(n, bool))
            regularize(sys)
            dx, dr, dlam = solve_kkt(sys)
            full = dense_lu_oracle(sys.full_matrix(), sys.full_rhs())
            got = np.concatenate([dx, dr, dlam])
            assert np.linalg.norm(got - full) <= 1e-8 * (1.0 + np.linalg.norm(full))

    def test_full_residual_bound(self, rng):
        sys = KktSystem(H=np.diag([3.0, 1.0]), D=np.array([0.5, 0.0]),
                        J=np.array([[1.0, 2.0]]), rd_x=np.array([1.0, -2.0]),
                        rp=np.array([0.7]), rho=10.0, rd_r=np.array([0.3]),
                        fixed=np.zeros(2, bool))
        regularize(sys)
        dx, dr, dlam = solve_kkt(sys)
        res = sys.full_matrix() @ np.concatenate([dx, dr, dlam]) - sys.full_rhs()
        assert np.linalg.norm(res) <= 1e-10 * (1.0 + np.linalg.norm(sys.full_rhs()))

    def test_singular_without_r_block(self):
        # duplicated constraint rows, no residual block: the saddle system is
        # exactly singular, so an unshifted factorization must be rejected
        def fresh():
            return KktSystem(H=2.0 * np.eye(2), D=np.zeros(2),
                             J=np.array([[1.0, 0.0], [1.0, 0.0]]),
                             rd_x=np.ones(2), rp=np.ones(2),
                             fixed=np.zeros(2, bool))

        with pytest.raises(SingularSystem):
            solve_kkt(fresh())
        # the shift ladder can only "succeed" through a nonzero shift
        from ncl.errors import RegularizationFailed
        sys = fresh()
        try:
            delta = regularize(sys)
        except RegularizationFailed:
            return
        assert delta > 0.0


class TestRegularize:
    def test_convex_needs_no_shift(self):
        sys = toy_kkt()
        assert regularize(sys) == 0.0

    def test_indefinite_gets_shift(self):
        sys = KktSystem(H=np.diag([-1.0, 1.0]), D=np.zeros(2),
                        J=np.array([[1.0, 0.0]]), rd_x=np.zeros(2),
                        rp=np.zeros(1), rho=1.0, rd_r=np.zeros(1),
                        fixed=np.zeros(2, bool))
        delta = regularize(sys)
        assert delta > 0.0
        eigs = np.linalg.eigvalsh(sys.reduced_matrix())
        assert (eigs > 0).sum() == 2 and (eigs < 0).sum() == 1

    def test_inertia_exact_on_random_indefinite(self, rng):
        for _ in range(20):
            n = int(rng.integers(2, 8))
            m = int(rng.integers(1, n + 1))
            A = rng.standard_normal((n, n))
            H = 0.5 * (A + A.T) - 2.0 * np.eye(n)   # likely indefinite
            J = rng.standard_normal((m, n))
            sys = KktSystem(H=H, D=np.zeros(n), J=J, rd_x=np.zeros(n),
                            rp=np.zeros(m), rho=100.0, rd_r=np.zeros(m),
                            fixed=np.zeros(n, bool))
            regularize(sys)
            eigs = np.linalg.eigvalsh(sys.reduced_matrix())
            tol = 1e-11 * max(1.0, np.abs(eigs).max())
            inertia = ((eigs > tol).sum(), (eigs < -tol).sum(),
                       (np.abs(eigs) <= tol).sum())
            assert inertia == (n, m, 0)

    def test_sqd_never_fails_with_r_block(self, rng):
        for _ in range(10):
            J = rng.standard_normal((4, 6))
            J[2] = 3.0 * J[0]   # rank-deficient
            sys = KktSystem(H=np.eye(6), D=rng.uniform(0, 5, 6), J=J,
                            rd_x=np.zeros(6), rp=np.zeros(4),
                            rho=1e6, rd_r=np.zeros(4), fixed=np.zeros(6, bool))
            regularize(sys)
            solve_kkt(sys)


class TestAssemble:
    def state_for(self, p, v, lam, mu=0.1):
        lb, ub = p.lb, p.ub
        fixed = lb == ub
        low = np.isfinite(lb) & ~fixed
        upp = np.isfinite(ub) & ~fixed
        n = p.n
        zl = np.where(low, mu / np.maximum(v - lb, 1e-12), 0.0)
        zu = np.where(upp, mu / np.maximum(ub - v, 1e-12), 0.0)
        return IpState(v=np.asarray(v, float), lam=np.asarray(lam, float),
                       zl=zl, zu=zu, mu=mu, lb=lb, ub=ub, low=low, upp=upp,
                       fixed=fixed)

    def test_unbounded_rows_have_no_barrier(self):
        p = Problem("ub", 2, obj=lambda x: x[0] ** 2 + x[1] ** 2,
                    grad=lambda x: 2.0 * x,
                    hess=lambda x, y, s: 2.0 * s * np.eye(2),
                    m=1, cons=lambda x: np.array([x[0] - x[1]]),
                    jac=lambda x: np.array([[1.0, -1.0]]))
        st_ = self.state_for(p, [1.0, 2.0], [0.5])
        sys = assemble_kkt(st_, p)
        assert np.allclose(sys.D, 0.0)
        # condensed dual residual equals the plain one when no bounds
        g = p.grad(np.array([1.0, 2.0]))
        J = p.jac(np.array([1.0, 2.0]))
        assert np.allclose(sys.rd_x, g + J.T @ np.array([0.5]))

    def test_rhs_zero_at_stationary_point(self):
        # min x^2 with c(x) = x = 0: at x=0..., use residual-block wrapper at
        # its exact subproblem optimum so all three rhs rows vanish
        p = Problem("st", 1, obj=lambda x: x[0] ** 2, grad=lambda x: 2.0 * x,
                    hess=lambda x, y, s: 2.0 * s * np.eye(1),
                    m=1, cons=lambda x: np.array([x[0]]),
                    jac=lambda x: np.array([[1.0]]))
        ncl = make_ncl(p, y=np.array([0.0]), rho=1.0)
        # subproblem optimum: x=0, r=0, lam=0
        st_ = make_state(v=[0.0, 0.0], lam=[0.0], zl=[0.0, 0.0], zu=[0.0, 0.0],
                         mu=1e-8, lb=ncl.lb, ub=ncl.ub,
                         r_slice=ncl.r_slice, rho=ncl.rho)
        sys = assemble_kkt(st_, ncl)
        assert np.allclose(sys.rd_x, 0.0)
        assert np.allclose(sys.rd_r, 0.0)
        assert np.allclose(sys.rp, 0.0)

    def test_non_interior_rejected(self):
        p = Problem("b", 1, obj=lambda x: x[0], grad=lambda x: np.ones(1),
                    hess=lambda x, y, s: np.zeros((1, 1)), lb=[0.0])
        st_ = self.state_for(p, [0.0], [])
        with pytest.raises(NonInterior):
            assemble_kkt(st_, p)


class TestStepLengths:
    def test_interior_direction_full_step(self):
        st_ = make_state([0.5], [], [1.0], [0.0], 0.1, [0.0], [np.inf])
        a_p, a_d = step_lengths(st_, (np.array([1.0]), np.zeros(0),
                                      np.array([1.0]), np.zeros(1)), 0.99)
        assert a_p == 1.0 and a_d == 1.0

    def test_primal_cap(self):
        st_ = make_state([0.5], [], [1.0], [0.0], 0.1, [0.0], [np.inf])
        a_p, _ = step_lengths(st_, (np.array([-1.0]), np.zeros(0),
                                    np.zeros(1), np.zeros(1)), 0.99)
        assert a_p == pytest.approx(0.495)

    def test_dual_cap(self):
        st_ = make_state([0.5], [], [1.0], [0.0], 0.1, [0.0], [np.inf])
        _, a_d = step_lengths(st_, (np.zeros(1), np.zeros(0),
                                    np.array([-4.0]), np.zeros(1)), 0.99)
        assert a_d == pytest.approx(0.2475)

    @settings(max_examples=100, deadline=None)
    @given(x=st.floats(0.01, 10.0), dx=st.floats(-10.0, 10.0),
           z=st.floats(1e-6, 10.0), dz=st.floats(-10.0, 10.0))
    def test_never_zero_never_exceeds_one(self, x, dx, z, dz):
        st_ = make_state([x], [], [z], [0.0], 0.1, [0.0], [np.inf])
        a_p, a_d = step_lengths(st_, (np.array([dx]), np.zeros(0),
                                      np.array([dz]), np.zeros(1)), 0.99)
        assert 0.0 < a_p <= 1.0 and 0.0 < a_d <= 1.0
        # stepping keeps strict interiority
        assert x + a_p * dx > 0.0
        assert z + a_d * dz > 0.0


class TestSolveSubproblem:
    def test_bound_qp(self):
        p = get_problem("qp-bound")
        res = solve_subproblem(p, opts=IpOptions())
        assert res.stats.status == "solved"
        assert abs(res.x[0] - 1.0) <= 1e-6
        assert abs(res.z[0] - 2.0) <= 1e-4

    def test_equality_qp(self):
        p = get_problem("qp2")
        res = solve_subproblem(p, opts=IpOptions())
        assert res.stats.status == "solved"
        assert np.allclose(res.x, [1.0, 0.0], atol=1e-6)
        assert np.allclose(res.y, [-2.0], atol=1e-5)

    def test_warm_start_at_optimum_is_instant(self):
        p = get_problem("qp-box")
        res = solve_subproblem(p, opts=IpOptions())
        assert res.stats.status == "solved"
        res2 = solve_subproblem(get_problem("qp-box"), warm=res.warm,
                                opts=IpOptions(mu_init=1e-8, warm_start=True))
        assert res2.stats.status == "solved"
        assert res2.stats.iterations <= 3

    def test_mu_monotone(self):
        for name in ("qp-box", "hs35", "qp-ineq"):
            res = solve_subproblem(get_problem(name), opts=IpOptions())
            trace = res.stats.mu_trace
            assert all(b <= a + 1e-15 for a, b in zip(trace, trace[1:]))

    @pytest.mark.parametrize("tol", [1e-4, 1e-6, 1e-8])
    def test_convex_qp_accuracy_scales_with_tolerance(self, tol):
        from ncl.problems import solution_of
        p = get_problem("qp-ineq")
        res = solve_subproblem(p, opts=IpOptions(tol_dual=tol, tol_primal=tol,
                                                 tol_comp=tol))
        assert res.stats.status == "solved"
        x_true = solution_of("qp-ineq")["x"]
        assert np.linalg.norm(res.x - x_true, np.inf) <= 10.0 * tol

    def test_fixed_variable(self):
        p = Problem("fixed", 2, obj=lambda x: (x[0] - 2.0) ** 2 + x[1] ** 2,
                    grad=lambda x: np.array([2.0 * (x[0] - 2.0), 2.0 * x[1]]),
                    hess=lambda x, y, s: 2.0 * s * np.eye(2),
                    lb=[0.0, 3.0], ub=[np.inf, 3.0], x0=[1.0, 3.0])
        res = solve_subproblem(p, opts=IpOptions())
        assert res.stats.status == "solved"
        assert res.x[1] == 3.0
        assert abs(res.x[0] - 2.0) <= 1e-6

    def test_degenerate_direct_fails_or_regularizes(self):
        p = get_problem("licq-dup")
        res = solve_subproblem(p, opts=IpOptions(max_iter=50))
        failed = res.stats.status in ("singular", "reg_failed", "diverged",
                                      "max_iter", "max_time")
        all_shifted = res.stats.deltas and all(d > 0 for d in res.stats.deltas)
        assert failed or all_shifted
