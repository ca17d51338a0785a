"""Generator for the optimal-tax-policy test family.

Taxpayer types are the product of five small parameter grids (wage, labor
elasticity, basic need, work distaste, consumption-demand elasticity), giving
T types, variables (c_1..c_T, y_1..y_T) >= 0, T(T-1) incentive-compatibility
rows U^t(c_t, y_t) - U^t(c_q, y_q) >= 0 plus one linear budget row
lambda^T (y - c) >= 0, maximizing sum_t lambda_t U^t(c_t, y_t).

The consumption part of the utility is extended below cv - alpha = tau by a
quadratic matching value, slope and curvature at the seam, so evaluations are
smooth for any consumption level.  Grid data are synthetic defaults and can
be overridden; the structure (dimensions, sparsity) is what the instances
reproduce faithfully.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .model import Problem


@dataclass(frozen=True)
class TaxDims:
    T: int
    n: int
    m_ic: int
    m: int


@dataclass
class TaxConfig:
    """Grid sizes, parameter grids (defaults synthesized), weights, seam threshold."""

    na: int = 1
    nb: int = 1
    nc: int = 1
    nd: int = 1
    ne: int = 1
    wages: np.ndarray | None = None          # length na, > 0
    labor_elast: np.ndarray | None = None    # length nb, in (0, 1]
    basic_needs: np.ndarray | None = None    # length nc, >= 0
    work_distaste: np.ndarray | None = None  # length nd, >= 1
    demand_elast: np.ndarray | None = None   # length ne, > 1
    weights: np.ndarray | None = None        # length T, > 0
    tau: float = 0.1
    seed: int = 0

    def __post_init__(self):
        for f in ("na", "nb", "nc", "nd", "ne"):
            if getattr(self, f) < 1:
                raise ValueError(f"{f} must be >= 1")
        if not self.tau > 0:
            raise ValueError("tau must be > 0")
        rng = np.random.default_rng(self.seed)
        if self.wages is None:
            w = np.geomspace(1.0, 5.0, self.na)
            self.wages = w * (1.0 + 0.01 * rng.uniform(-1.0, 1.0, self.na))
        else:
            self.wages = np.asarray(self.wages, dtype=float)
        if self.labor_elast is None:
            self.labor_elast = np.linspace(0.25, 1.0, self.nb)
        else:
            self.labor_elast = np.asarray(self.labor_elast, dtype=float)
        if self.basic_needs is None:
            self.basic_needs = np.linspace(0.0, 0.8, self.nc)
        else:
            self.basic_needs = np.asarray(self.basic_needs, dtype=float)
        if self.work_distaste is None:
            p = np.linspace(1.0, 2.0, self.nd)
            self.work_distaste = p * (1.0 + 0.01 * rng.uniform(-1.0, 1.0, self.nd))
        else:
            self.work_distaste = np.asarray(self.work_distaste, dtype=float)
        if self.demand_elast is None:
            self.demand_elast = np.linspace(2.0, 3.0, self.ne)
        else:
            self.demand_elast = np.asarray(self.demand_elast, dtype=float)
        if np.any(self.demand_elast == 1.0):
            raise ValueError("demand elasticity 1 is not representable")
        if np.any(self.labor_elast <= 0) or np.any(self.wages <= 0):
            raise ValueError("wages and labor elasticities must be positive")
        T = dims(self).T
        if self.weights is None:
            self.weights = np.ones(T)
        else:
            self.weights = np.asarray(self.weights, dtype=float)
            if self.weights.size != T or np.any(self.weights <= 0):
                raise ValueError("weights must be positive, one per type")


def dims(cfg):
    T = cfg.na * cfg.nb * cfg.nc * cfg.nd * cfg.ne
    return TaxDims(T=T, n=2 * T, m_ic=T * (T - 1), m=T * (T - 1) + 1)


def _type_grids(cfg):
    """Per-type parameter vectors (length T) in fixed lexicographic order."""
    I, Jl, K, G, H = np.meshgrid(np.arange(cfg.na), np.arange(cfg.nb),
                                 np.arange(cfg.nc), np.arange(cfg.nd),
                                 np.arange(cfg.ne), indexing="ij")
    return (cfg.wages[I.ravel()], cfg.labor_elast[Jl.ravel()],
            cfg.basic_needs[K.ravel()], cfg.work_distaste[G.ravel()],
            cfg.demand_elast[H.ravel()])


def _cons_term(s, gamma, tau):
    """Value/slope/curvature of the consumption utility, quadratic below the seam.

    For s >= tau:  s^e / e with e = 1 - 1/gamma; below, the C2 extension
    anchored at the seam.  Operates on broadcast arrays.
    """
    e = 1.0 - 1.0 / gamma
    s = np.asarray(s, dtype=float)
    smooth = s >= tau
    ssafe = np.where(smooth, s, tau)
    val = ssafe ** e / e
    d1 = ssafe ** (e - 1.0)
    d2 = (e - 1.0) * ssafe ** (e - 2.0)
    if not np.all(smooth):
        f0 = tau ** e / e
        f1 = tau ** (e - 1.0)
        f2 = (e - 1.0) * tau ** (e - 2.0)
        ds = s - tau
        qval = f0 + f1 * ds + 0.5 * f2 * ds * ds
        qd1 = f1 + f2 * ds
        f0, f1, f2 = np.broadcast_arrays(f0, f1, f2)
        val = np.where(smooth, val, qval)
        d1 = np.where(smooth, d1, qd1)
        d2 = np.where(smooth, d2, f2)
    return val, d1, d2


def _work_term(yv, psi, eta, w):
    """Value/slope/curvature of the work-distaste term psi (y/w)^q / q, q = 1/eta + 1."""
    q = 1.0 / eta + 1.0
    t = np.asarray(yv, dtype=float) / w
    val = psi * t ** q / q
    d1 = psi * t ** (q - 1.0) / w
    d2 = psi * (q - 1.0) * t ** (q - 2.0) / (w * w)
    return val, d1, d2


def utility(cv, yv, theta, tau):
    """Single-type utility and its partials: (U, dU/dc, dU/dy, d2U/dc2, d2U/dy2).

    theta = (alpha, gamma, psi, eta, w).
    """
    alpha, gamma, psi, eta, w = theta
    uc, dc, d2c = _cons_term(cv - alpha, gamma, tau)
    uw, dw, d2w = _work_term(yv, psi, eta, w)
    return (float(uc - uw), float(dc), float(-dw), float(d2c), float(-d2w))


class _TaxData:
    """Precomputed per-type parameters and the ordered (t, q) pair index."""

    def __init__(self, cfg):
        self.cfg = cfg
        self.dims = dims(cfg)
        T = self.dims.T
        self.w, self.eta, self.alpha, self.psi, self.gamma = _type_grids(cfg)
        self.lam = cfg.weights
        tt = np.repeat(np.arange(T), T)
        qq = np.tile(np.arange(T), T)
        keep = tt != qq
        self.t_idx = tt[keep]
        self.q_idx = qq[keep]

    def cross_terms(self, c, y):
        """(T, T) utility, slope, curvature tables: row t evaluates type t at bundle q."""
        S = c[None, :] - self.alpha[:, None]
        uc, dc, d2c = _cons_term(S, self.gamma[:, None], self.cfg.tau)
        uw, dw, d2w = _work_term(y[None, :], self.psi[:, None],
                                 self.eta[:, None], self.w[:, None])
        return uc - uw, dc, d2c, dw, d2w


def build_tax_problem(cfg, name=None):
    """Assemble the maximization Problem for a grid configuration."""
    data = _TaxData(cfg)
    d = data.dims
    T, n, m = d.T, d.n, d.m
    lam = data.lam
    t_idx, q_idx = data.t_idx, data.q_idx
    rows = np.arange(d.m_ic)

    def split(v):
        return v[:T], v[T:]

    def obj(v):
        c, y = split(v)
        U, _, _, _, _ = data.cross_terms(c, y)
        return float(lam @ np.diag(U))

    def grad(v):
        c, y = split(v)
        _, dc, _, dw, _ = data.cross_terms(c, y)
        g = np.empty(n)
        g[:T] = lam * np.diag(dc)
        g[T:] = -lam * np.diag(dw)
        return g

    def cons(v):
        c, y = split(v)
        U, _, _, _, _ = data.cross_terms(c, y)
        diag = np.diag(U)
        vals = np.empty(m)
        vals[:d.m_ic] = diag[t_idx] - U[t_idx, q_idx]
        vals[d.m_ic] = float(lam @ (y - c))
        return vals

    def jac_triplets(v):
        """Sparse rows (row, col, val); each incentive row touches 4 columns."""
        c, y = split(v)
        _, dc, _, dw, _ = data.cross_terms(c, y)
        dcd = np.diag(dc)
        dwd = np.diag(dw)
        r = np.concatenate([rows, rows, rows, rows,
                            np.full(2 * T, d.m_ic)])
        col = np.concatenate([t_idx, T + t_idx, q_idx, T + q_idx,
                              np.arange(2 * T)])
        val = np.concatenate([dcd[t_idx], -dwd[t_idx],
                              -dc[t_idx, q_idx], dw[t_idx, q_idx],
                              np.concatenate([-lam, lam])])
        return r, col, val

    def jac(v):
        J = np.zeros((m, n))
        r, col, val = jac_triplets(v)
        np.add.at(J, (r, col), val)
        return J

    def hess(v, y_mult, obj_weight):
        c, y = split(v)
        _, _, d2c, _, d2w = data.cross_terms(c, y)
        d2cd = np.diag(d2c)
        d2wd = np.diag(d2w)
        diag = np.empty(n)
        diag[:T] = obj_weight * lam * d2cd
        diag[T:] = -obj_weight * lam * d2wd
        y_ic = y_mult[:d.m_ic]
        np.add.at(diag, t_idx, -y_ic * d2cd[t_idx])
        np.add.at(diag, T + t_idx, y_ic * d2wd[t_idx])
        np.add.at(diag, q_idx, y_ic * d2c[t_idx, q_idx])
        np.add.at(diag, T + q_idx, -y_ic * d2w[t_idx, q_idx])
        return np.diag(diag)

    prob = Problem(name or f"tax-{cfg.na}x{cfg.nb}x{cfg.nc}x{cfg.nd}x{cfg.ne}",
                   n, obj=obj, grad=grad, hess=hess, m=m, cons=cons, jac=jac,
                   x0=np.ones(n), lb=np.zeros(n), ub=None,
                   cl=np.zeros(m), cu=np.full(m, np.inf), sense="maximize")
    prob.jac_triplets = jac_triplets
    prob.tax_dims = d
    return prob


def emit_manifest(cfg, path):
    """Write a JSON manifest (config plus explicit grids) that regenerates the problem."""
    data = {
        "na": cfg.na, "nb": cfg.nb, "nc": cfg.nc, "nd": cfg.nd, "ne": cfg.ne,
        "tau": cfg.tau, "seed": cfg.seed,
        "wages": cfg.wages.tolist(),
        "labor_elast": cfg.labor_elast.tolist(),
        "basic_needs": cfg.basic_needs.tolist(),
        "work_distaste": cfg.work_distaste.tolist(),
        "demand_elast": cfg.demand_elast.tolist(),
        "weights": cfg.weights.tolist(),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(data, fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_manifest(path):
    """Rebuild a TaxConfig from a manifest; grids are taken verbatim."""
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    return TaxConfig(na=data["na"], nb=data["nb"], nc=data["nc"], nd=data["nd"],
                     ne=data["ne"], tau=data["tau"], seed=data["seed"],
                     wages=np.array(data["wages"]),
                     labor_elast=np.array(data["labor_elast"]),
                     basic_needs=np.array(data["basic_needs"]),
                     work_distaste=np.array(data["work_distaste"]),
                     demand_elast=np.array(data["demand_elast"]),
                     weights=np.array(data["weights"]))
