import numpy as np
import pytest

from ncl.tax import (TaxConfig, build_tax_problem, dims, emit_manifest,
                     load_manifest, utility)

from conftest import central_grad, central_jac


class TestUtility:
    def test_hand_value(self):
        u, duc, duy, _, _ = utility(1.0, 1.0, (0.0, 2.0, 1.0, 1.0, 1.0), 0.1)
        assert u == pytest.approx(1.5)        # 2*sqrt(1) - 1/2
        assert duc == pytest.approx(1.0)      # s^(-1/2) at s=1
        assert duy == pytest.approx(-1.0)     # -(y/w)/w at 1

    def test_seam_continuity(self):
        theta = (0.3, 2.5, 1.2, 0.7, 1.4)
        tau = 0.1
        s = 0.3 + tau
        above = utility(s + 1e-9, 1.0, theta, tau)
        below = utility(s - 1e-9, 1.0, theta, tau)
        assert above[0] == pytest.approx(below[0], abs=1e-8)
        assert above[1] == pytest.approx(below[1], abs=1e-6)

    def test_seam_numeric_derivative_jump(self):
        theta = (0.3, 2.5, 1.2, 0.7, 1.4)
        tau = 0.1
        seam = 0.3 + tau
        h = 1e-6
        f = lambda cv: utility(cv, 1.0, theta, tau)[0]
        # second-order one-sided stencils so truncation does not mask a jump
        left = (3 * f(seam) - 4 * f(seam - h) + f(seam - 2 * h)) / (2 * h)
        right = (-3 * f(seam) + 4 * f(seam + h) - f(seam + 2 * h)) / (2 * h)
        assert abs(left - right) <= 1e-6

    def test_negative_consumption_is_defined(self):
        u, duc, _, d2c, _ = utility(-5.0, 0.5, (0.0, 2.0, 1.0, 1.0, 1.0), 0.1)
        assert np.isfinite(u) and np.isfinite(duc) and np.isfinite(d2c)

    def test_zero_income_no_work_term(self):
        theta = (0.0, 2.0, 1.3, 0.5, 2.0)
        u_zero = utility(1.0, 0.0, theta, 0.1)[0]
        u_only_cons = utility(1.0, 0.0, (0.0, 2.0, 0.0, 0.5, 2.0), 0.1)[0]
        assert u_zero == pytest.approx(u_only_cons)


class TestDims:
    @pytest.mark.parametrize("cfg,T,m_ic", [
        ((1, 1, 1, 1, 1), 1, 0),
        ((2, 3, 1, 1, 1), 6, 30),
        ((5, 3, 3, 2, 2), 180, 32220),
        ((12, 1, 1, 1, 1), 12, 132),
        ((12, 5, 1, 1, 1), 60, 3540),
    ])
    def test_formulas(self, cfg, T, m_ic):
        d = dims(TaxConfig(*cfg))
        assert d.T == T
        assert d.n == 2 * T
        assert d.m_ic == m_ic
        assert d.m == m_ic + 1

    def test_grid_of_configurations(self):
        for na in (1, 2, 3):
            for nb in (1, 2):
                for nc in (1, 2):
                    d = dims(TaxConfig(na, nb, nc))
                    T = na * nb * nc
                    assert (d.T, d.n, d.m_ic) == (T, 2 * T, T * (T - 1))


class TestBuildProblem:
    def test_structure(self):
        p = build_tax_problem(TaxConfig(na=3))
        assert p.sense == "maximize"
        assert p.n == 6 and p.m == 7
        assert np.all(p.lb == 0.0) and np.all(np.isinf(p.ub))
        assert np.all(p.cl == 0.0) and np.all(np.isinf(p.cu))

    def test_honest_point(self):
        # equal bundles: every incentive row is exactly zero, budget is zero
        p = build_tax_problem(TaxConfig(na=4, nb=2))
        v = np.ones(p.n)
        c = p.cons(v)
        assert np.allclose(c, 0.0, atol=1e-12)

    def test_budget_row_is_last_and_linear(self):
        p = build_tax_problem(TaxConfig(na=3))
        v = np.array([1.0, 2.0, 3.0, 4.0, 5.0, 6.0])
        c = p.cons(v)
        lam = np.ones(3)
        assert c[-1] == pytest.approx(lam @ (v[3:] - v[:3]))
        J = p.jac(v)
        assert np.allclose(J[-1], np.concatenate([-lam, lam]))

    def test_sparsity_four_entries_per_ic_row(self):
        p = build_tax_problem(TaxConfig(na=3, nb=2))
        d = p.tax_dims
        rows, cols, _ = p.jac_triplets(p.x0 + 0.1)
        for row in range(d.m_ic):
            touched = np.unique(cols[rows == row])
            assert touched.size == 4

    def test_determinism_and_seed_effect(self):
        a = build_tax_problem(TaxConfig(na=3, seed=0))
        b = build_tax_problem(TaxConfig(na=3, seed=0))
        v = np.linspace(0.5, 2.0, a.n)
        assert a.obj(v) == b.obj(v)
        assert np.array_equal(a.cons(v), b.cons(v))
        c = build_tax_problem(TaxConfig(na=3, seed=1))
        assert c.obj(v) != a.obj(v)

    def test_derivatives_match_fd(self, rng):
        p = build_tax_problem(TaxConfig(na=2, nb=2))
        for _ in range(3):
            v = rng.uniform(0.3, 1.8, p.n)
            assert np.allclose(p.grad(v), central_grad(p.obj, v), atol=2e-5)
            assert np.allclose(p.jac(v), central_jac(p.cons, v), atol=2e-5)
            y = rng.uniform(-1, 1, p.m)
            lg = lambda z: p.grad(z) - p.jac(z).T @ y
            Hfd = central_jac(lg, v)
            assert np.allclose(p.hess(v, y, 1.0), 0.5 * (Hfd + Hfd.T), atol=1e-4)

    def test_derivatives_across_seam(self, rng):
        # points with some consumption below basic needs exercise the extension
        cfg = TaxConfig(na=2, nc=2)   # basic needs up to 0.8
        p = build_tax_problem(cfg)
        for _ in range(3):
            v = rng.uniform(0.05, 1.0, p.n)
            assert np.allclose(p.grad(v), central_grad(p.obj, v), atol=1e-4)
            assert np.allclose(p.jac(v), central_jac(p.cons, v), atol=1e-4)

    def test_dense_jac_equals_triplets(self, rng):
        p = build_tax_problem(TaxConfig(na=3))
        v = rng.uniform(0.4, 1.6, p.n)
        J = p.jac(v)
        rows, cols, vals = p.jac_triplets(v)
        J2 = np.zeros_like(J)
        np.add.at(J2, (rows, cols), vals)
        assert np.array_equal(J, J2)


class TestManifest:
    def test_round_trip(self, tmp_path):
        cfg = TaxConfig(na=3, nb=2, seed=5)
        path = tmp_path / "tax.json"
        emit_manifest(cfg, path)
        cfg2 = load_manifest(path)
        p1 = build_tax_problem(cfg)
        p2 = build_tax_problem(cfg2)
        v = np.linspace(0.2, 2.0, p1.n)
        assert p1.obj(v) == p2.obj(v)
        assert np.array_equal(p1.cons(v), p2.cons(v))

    def test_manifest_is_text(self, tmp_path):
        path = tmp_path / "tax.json"
        emit_manifest(TaxConfig(na=2), path)
        text = path.read_text(encoding="utf-8")
        assert "wages" in text and "\x00" not in text


def test_config_validation():
    with pytest.raises(ValueError):
        TaxConfig(na=0)
    with pytest.raises(ValueError):
        TaxConfig(na=1, tau=0.0)
    with pytest.raises(ValueError):
        TaxConfig(na=1, demand_elast=np.array([1.0]))
    with pytest.raises(ValueError):
        TaxConfig(na=1, weights=np.array([-1.0]))
