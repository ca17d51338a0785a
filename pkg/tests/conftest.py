"""Shared finite-difference oracles and sampling helpers for the test suite."""

import numpy as np
import pytest


def central_grad(f, x, h=1e-6):
    """Central-difference gradient of a scalar function."""
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2.0 * h)
    return g


def central_jac(f, x, h=1e-6):
    """Central-difference Jacobian of a vector function."""
    x = np.asarray(x, dtype=float)
    cols = []
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        cols.append((np.asarray(f(x + e)) - np.asarray(f(x - e))) / (2.0 * h))
    return np.array(cols).T


def interior_points(p, count, rng, spread=1.5):
    """Sample points strictly inside the bounds of a problem."""
    lo = np.where(np.isfinite(p.lb), p.lb, -spread)
    hi = np.where(np.isfinite(p.ub), p.ub, spread)
    hi = np.maximum(hi, lo + 1e-3)
    pad = 0.1 * (hi - lo)
    pts = []
    for _ in range(count):
        u = rng.uniform(size=p.n)
        pts.append(lo + pad + u * (hi - lo - 2.0 * pad))
    return pts


@pytest.fixture
def rng():
    return np.random.default_rng(42)
