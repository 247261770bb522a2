"""Density-weighted design criteria under a Gaussian-process model.

Designs passed as plain arrays are treated as pure noise designs, one
noise model per column. Pass a :class:`~robustfill.gp_core.Design` to mix
control and noise columns; control (and internal-noise) columns are
integrated against the uniform density on [0, 1].
"""

from __future__ import annotations

import math
from collections.abc import Mapping, MutableMapping
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from numpy.polynomial.legendre import leggauss
from scipy import special
from scipy.stats import qmc

from .gp_core import (
    CorrFactor,
    Design,
    factorize,
    mse_from_factor,
    theta_vector,
)
from .stats_dist import DomainError, NoiseModel

DEFAULT_THETAS = (5.0, 10.0, 20.0, 30.0)
MAX_TENSOR_POINTS = 2**18


@dataclass(frozen=True)
class QuadratureSpec:
    """How the criteria integrate.

    rule
        ``auto`` uses Gauss-Legendre on bounded dimensions and
        Gauss-Hermite on normal noise; ``legendre`` forces Gauss-Legendre
        (unbounded supports truncated at ``tail`` weight standard
        deviations); ``panel`` is the 1-D composite rule with breakpoints
        at the design points; ``mc`` forces Monte Carlo.
    """

    rule: str = "auto"
    nodes: int = 64
    mc_size: int = 2**14
    seed: int = 0
    tail: float = 8.0

    def __post_init__(self):
        if self.rule not in ("auto", "legendre", "hermite", "panel", "mc"):
            raise ValueError(f"unknown quadrature rule {self.rule!r}")
        if self.nodes < 8:
            raise ValueError("need at least 8 quadrature nodes per dimension")


@dataclass(frozen=True)
class CriterionConfig:
    k: float = 2.0
    quad: QuadratureSpec = field(default_factory=QuadratureSpec)
    thetas: tuple = DEFAULT_THETAS

    def __post_init__(self):
        if not self.k > 0:
            raise ValueError("k must be positive")
        if not self.thetas:
            raise ValueError("theta set must be nonempty")


@dataclass(frozen=True)
class InternalNoiseSpec:
    """Internal noise e ~ N(0, sigma_e) on a factor with 1-D correlation ``theta``."""

    sigma_e: float = 1.0 / 12.0
    theta: float = 50.0

    def __post_init__(self):
        for name in ("sigma_e", "theta"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be positive and finite")


# --------------------------------------------------------------------------
# weights and nodes


def c_k(model: NoiseModel, k: float) -> float:
    """Normaliser C_k = integral of f^k over the support."""
    if model.kind == "uniform":
        return (model.upper - model.lower) ** (1.0 - k)
    if model.kind == "normal":
        s = model.sd
        return (2 * math.pi * s * s) ** ((1.0 - k) / 2.0) / math.sqrt(k)
    if model.kind == "truncated-normal":
        s = model.sd
        mass = special.ndtr((model.upper - model.mean) / s) - special.ndtr((model.lower - model.mean) / s)
        sk = s / math.sqrt(k)
        mass_k = special.ndtr((model.upper - model.mean) / sk) - special.ndtr((model.lower - model.mean) / sk)
        return (2 * math.pi * s * s) ** ((1.0 - k) / 2.0) / math.sqrt(k) * mass_k / mass**k
    zt, Ft = (np.asarray(t) for t in model.table)
    dens = np.diff(Ft) / np.diff(zt)
    return float(np.sum(dens**k * np.diff(zt)))


def _gl(a: float, b: float, n: int):
    x, w = leggauss(n)
    return 0.5 * (b - a) * x + 0.5 * (a + b), 0.5 * (b - a) * w


def noise_rule(model: NoiseModel, k: float, spec: QuadratureSpec):
    """Nodes and weights with sum(w * h(z)) ~ integral h(z) f(z)^k / C_k dz."""
    if not np.isfinite(c_k(model, k)) or c_k(model, k) <= 0:
        raise DomainError(f"C_k is not finite for k={k}")
    n = spec.nodes
    if model.kind == "normal":
        sk = model.sd / math.sqrt(k)
        if spec.rule in ("auto", "hermite"):
            t, w = hermegauss(n)
            return model.mean + sk * t, w / math.sqrt(2 * math.pi)
        z, w = _gl(model.mean - spec.tail * sk, model.mean + spec.tail * sk, n)
        return z, w * model.pdf(z) ** k / c_k(model, k)
    if model.kind == "empirical-table":
        zt = np.asarray(model.table[0])
        per = max(2, -(-n // (len(zt) - 1)))
        parts = [_gl(a, b, per) for a, b in zip(zt[:-1], zt[1:])]
        z = np.concatenate([p[0] for p in parts])
        w = np.concatenate([p[1] for p in parts])
    else:
        z, w = _gl(model.lower, model.upper, n)
    return z, w * model.pdf(z) ** k / c_k(model, k)


def control_rule(spec: QuadratureSpec):
    return _gl(0.0, 1.0, spec.nodes)


def _as_design(design, models) -> Design:
    if isinstance(design, Design):
        return design
    X = np.asarray(design, dtype=float)
    X = X[:, None] if X.ndim == 1 else X
    return Design(X, roles=("noise_ext",) * X.shape[1])


def _models_for(design: Design, models) -> list:
    q = design.q
    if models is None:
        models = []
    elif isinstance(models, NoiseModel):
        models = [models] * q
    models = list(models)
    if len(models) != q:
        raise ValueError(f"need {q} noise models, got {len(models)}")
    return models


def _dim_rules(design: Design, models, k: float, spec: QuadratureSpec):
    rules = [None] * design.d
    for i in design.control_idx:
        rules[i] = control_rule(spec)
    for i, m in zip(design.noise_idx, models):
        rules[i] = noise_rule(m, k, spec)
    return rules


def _mc_points(design: Design, models, k: float, spec: QuadratureSpec):
    n = spec.mc_size
    u = qmc.Sobol(design.d, scramble=True, seed=spec.seed).random(n)
    u = np.clip(u, 1e-15, 1 - 1e-15)
    pts = u.copy()
    w = np.full(n, 1.0 / n)
    for i, m in zip(design.noise_idx, models):
        pts[:, i] = m.quantile(u[:, i])
        if k != 1.0:
            w = w * m.pdf(pts[:, i]) ** (k - 1.0) / c_k(m, k)
    return pts, w


def _joint_points(design: Design, models, k: float, spec: QuadratureSpec):
    if spec.rule == "mc" or spec.nodes**design.d > MAX_TENSOR_POINTS:
        return _mc_points(design, models, k, spec)
    rules = _dim_rules(design, models, k, spec)
    grids = np.meshgrid(*[r[0] for r in rules], indexing="ij")
    wgrid = np.meshgrid(*[r[1] for r in rules], indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=1)
    w = np.prod(np.stack([g.ravel() for g in wgrid], axis=1), axis=1)
    return pts, w


def _panel_points(z, model: NoiseModel, k: float, per_panel: int = 8, tail_panels: int = 6, tail: float = 10.0):
    """Composite Gauss-Legendre on the 1-D support with breaks at the design points."""
    z = np.sort(np.asarray(z, dtype=float).ravel())
    lo, hi = model.lower, model.upper
    if not math.isfinite(lo):
        lo = min(model.mean - tail * model.sd, z[0] - model.sd)
    if not math.isfinite(hi):
        hi = max(model.mean + tail * model.sd, z[-1] + model.sd)
    inner = z[(z > lo) & (z < hi)]
    left = np.linspace(lo, inner[0], tail_panels + 1) if len(inner) else np.array([lo])
    right = np.linspace(inner[-1], hi, tail_panels + 1) if len(inner) else np.array([hi])
    breaks = np.unique(np.concatenate([left, inner, right]))
    if model.kind == "empirical-table":
        breaks = np.unique(np.concatenate([breaks, model.table[0]]))
    x, w = leggauss(per_panel)
    a, b = breaks[:-1], breaks[1:]
    half = 0.5 * (b - a)
    pts = (half[:, None] * x[None, :] + 0.5 * (a + b)[:, None]).ravel()
    wts = (half[:, None] * w[None, :]).ravel()
    return pts, wts * model.pdf(pts) ** k / c_k(model, k)


def _factor(design: Design, theta) -> CorrFactor:
    return factorize(design.X, theta_vector(design, theta))


# --------------------------------------------------------------------------
# criteria


def weighted_power_mean(mse, base_w, dens, k: float) -> float:
    """[sum base_w (sqrt(mse) dens)^k / sum base_w dens^k]^(1/k).

    The normaliser is formed on the same nodes, so scaling ``dens`` by any
    constant leaves the value unchanged.
    """
    mse = np.clip(np.asarray(mse, dtype=float), 0.0, None)
    base_w = np.asarray(base_w, dtype=float)
    dens = np.asarray(dens, dtype=float)
    num = np.sum(base_w * (np.sqrt(mse) * dens) ** k)
    den = np.sum(base_w * dens**k)
    return float((num / den) ** (1.0 / k))


def wrmse(design, theta, points, models=None) -> np.ndarray:
    """sqrt(MSE) times the joint noise density at each point."""
    D = _as_design(design, models)
    models = _models_for(D, models)
    P = np.asarray(points, dtype=float)
    P = P.reshape(-1, D.d)
    out = np.sqrt(mse_from_factor(_factor(D, theta), P))
    for i, m in zip(D.noise_idx, models):
        out = out * m.pdf(P[:, i])
    return out


def _integrate_mse_power(D: Design, factor: CorrFactor, models, k: float, spec: QuadratureSpec, power: float):
    if spec.rule == "panel":
        if D.d != 1 or D.q != 1:
            raise ValueError("panel rule needs a 1-D noise design")
        pts, w = _panel_points(D.X[:, 0], models[0], k, per_panel=max(4, spec.nodes // 4))
        pts = pts[:, None]
    else:
        pts, w = _joint_points(D, models, k, spec)
    total = 0.0
    chunk = max(1, 2**22 // max(D.n, 1))
    for s in range(0, len(w), chunk):
        mse = mse_from_factor(factor, pts[s : s + chunk])
        total += float(np.sum(w[s : s + chunk] * mse**power))
    return total


def irmse_k(design, theta, models=None, cfg: Optional[CriterionConfig] = None) -> float:
    """[integral (sqrt(MSE) f)^k / C_k]^(1/k) over controls and noise."""
    cfg = cfg or CriterionConfig()
    D = _as_design(design, models)
    models = _models_for(D, models)
    val = _integrate_mse_power(D, _factor(D, theta), models, cfg.k, cfg.quad, cfg.k / 2.0)
    return max(val, 0.0) ** (1.0 / cfg.k)


def irmse(design, theta, models=None, cfg: Optional[CriterionConfig] = None) -> float:
    """Integrated root MSE weighted by the noise density (the k = 1 member)."""
    cfg = cfg or CriterionConfig()
    return irmse_k(design, theta, models, CriterionConfig(k=1.0, quad=cfg.quad, thetas=cfg.thetas))


def imse_weight_matrix(D: Design, theta, models, spec: QuadratureSpec, k: float = 2.0) -> np.ndarray:
    """W_ij = integral r_i r_j f^k / C_k, by tensor quadrature done per dimension."""
    t = theta_vector(D, theta)
    rules = _dim_rules(D, models, k, spec)
    W = np.ones((D.n, D.n))
    for l, (u, w) in enumerate(rules):
        E = np.exp(-t[l] * (u[None, :] - D.X[:, l, None]) ** 2)
        W *= (E * w[None, :]) @ E.T
    return W


def imse(design, theta, models=None, cfg: Optional[CriterionConfig] = None) -> float:
    """Integrated MSE with weight f^2 / C_2.

    The Gaussian kernel and product weight make the integrand separable, so
    the tensor rule is applied per dimension: IMSE = 1 - tr(R^{-1} W).
    """
    cfg = cfg or CriterionConfig()
    D = _as_design(design, models)
    models = _models_for(D, models)
    spec = cfg.quad
    if spec.rule in ("panel", "mc"):
        return _integrate_mse_power(D, _factor(D, theta), models, 2.0, spec, 1.0)
    factor = _factor(D, theta)
    W = imse_weight_matrix(D, theta, models, spec)
    return float(1.0 - np.trace(factor.solve(W)))


def imse_unweighted(design, theta, models=None, cfg: Optional[CriterionConfig] = None) -> float:
    """IMSE with weight f instead of f^2/C_2; kept only for comparison."""
    cfg = cfg or CriterionConfig()
    D = _as_design(design, models)
    models = _models_for(D, models)
    return _integrate_mse_power(D, _factor(D, theta), models, 1.0, cfg.quad, 1.0)


# --------------------------------------------------------------------------
# robustness over theta


def _theta_key(theta) -> float:
    return float(np.atleast_1d(theta)[0]) if np.ndim(theta) else float(theta)


def efficiency_table(designs: Mapping, thetas: Sequence[float], models, cfg: Optional[CriterionConfig] = None,
                     optima: Optional[MutableMapping] = None):
    """Efficiencies eff[a][theta] = best IRMSE at theta / IRMSE(design a, theta).

    ``optima`` is updated whenever one of ``designs`` beats the stored value.
    """
    cfg = cfg or CriterionConfig(quad=QuadratureSpec(rule="panel", nodes=64))
    values = {a: {t: irmse(D, t, models, cfg) for t in thetas} for a, D in designs.items()}
    optima = optima if optima is not None else {}
    for t in thetas:
        best = min(values[a][t] for a in designs)
        key = _theta_key(t)
        if key not in optima or best < optima[key]:
            optima[key] = best
    return {a: {t: optima[_theta_key(t)] / values[a][t] for t in thetas} for a in designs}


def min_efficiency(design, thetas: Sequence[float], optima: Mapping, models=None,
                   cfg: Optional[CriterionConfig] = None) -> float:
    """Worst-case efficiency of ``design`` over ``thetas`` against best-known optima.

    Raises KeyError if a theta has no stored optimum. If ``design`` beats a
    stored optimum and ``optima`` is mutable, the stored value is replaced,
    so efficiencies never exceed one.
    """
    cfg = cfg or CriterionConfig(quad=QuadratureSpec(rule="panel", nodes=64))
    effs = []
    for t in thetas:
        key = _theta_key(t)
        if key not in optima:
            raise KeyError(f"no optimum stored for theta={t}")
        val = irmse(design, t, models, cfg)
        if val < optima[key] and isinstance(optima, MutableMapping):
            optima[key] = val
        effs.append(min(1.0, optima[key] / val) if val > 0 else 1.0)
    return float(min(effs))


# --------------------------------------------------------------------------
# nearest-point bound


def _nearest_panels(d, model: NoiseModel, per_panel: int, tail: float = 12.0):
    d = np.sort(np.asarray(d, dtype=float).ravel())
    lo, hi = model.lower, model.upper
    if not math.isfinite(lo):
        lo = min(model.mean - tail * model.sd, d[0] - model.sd)
    if not math.isfinite(hi):
        hi = max(model.mean + tail * model.sd, d[-1] + model.sd)
    mids = 0.5 * (d[1:] + d[:-1])
    breaks = np.unique(np.clip(np.concatenate([[lo], d, mids, [hi]]), lo, hi))
    extra = np.linspace(lo, min(d[0], hi), 9)[1:-1]
    extra2 = np.linspace(max(d[-1], lo), hi, 9)[1:-1]
    breaks = np.unique(np.concatenate([breaks, extra, extra2]))
    x, w = leggauss(per_panel)
    a, b = breaks[:-1], breaks[1:]
    half = 0.5 * (b - a)
    z = (half[:, None] * x + 0.5 * (a + b)[:, None]).ravel()
    wz = (half[:, None] * w).ravel()
    idx = np.clip(np.searchsorted(d, z), 1, len(d) - 1) if len(d) > 1 else np.zeros(len(z), int)
    if len(d) > 1:
        left, right = d[idx - 1], d[idx]
        q = np.where(np.abs(z - left) <= np.abs(z - right), left, right)
    else:
        q = np.full_like(z, d[0])
    return z, wz * model.pdf(z), q


def irmse_upper_bound(d, theta: float, model: NoiseModel, per_panel: int = 16) -> float:
    """integral sqrt(1 - R(z - Q(z))^2) f(z) dz, Q(z) the nearest design point."""
    z, w, q = _nearest_panels(d, model, per_panel)
    h = z - q
    return float(np.sum(w * np.sqrt(-np.expm1(-2.0 * theta * h * h))))


def nearest_point_approx(d, theta: float, model: NoiseModel, per_panel: int = 16) -> float:
    """Large-n approximation sqrt(2 theta) * integral |z - Q(z)| f(z) dz of the bound."""
    z, w, q = _nearest_panels(d, model, per_panel)
    return float(math.sqrt(2.0 * theta) * np.sum(w * np.abs(z - q)))


# --------------------------------------------------------------------------
# internal noise


def a_matrix(x: float, d, spec: InternalNoiseSpec) -> np.ndarray:
    """A_ij(x) = integral r_i(x+e) r_j(x+e) phi^2(e; 0, sigma_e) / C_2 de."""
    d = np.asarray(d, dtype=float).ravel()
    th, s2 = spec.theta, spec.sigma_e**2
    g = 1.0 + 2.0 * th * s2
    mid = 0.5 * (d[:, None] + d[None, :])
    gap = d[:, None] - d[None, :]
    return np.exp(-2.0 * th / g * (x - mid) ** 2 - 0.5 * th * gap**2) / math.sqrt(g)


def abar_matrix(d, spec: InternalNoiseSpec) -> np.ndarray:
    """Integral of :func:`a_matrix` over x in [0, 1], in closed form."""
    d = np.asarray(d, dtype=float).ravel()
    th, s2 = spec.theta, spec.sigma_e**2
    root = math.sqrt(1.0 + 2.0 * th * s2)
    ssum = d[:, None] + d[None, :]
    gap = d[:, None] - d[None, :]
    rt = math.sqrt(th)
    mass = special.ndtr(rt * (2.0 - ssum) / root) - special.ndtr(-rt * ssum / root)
    return math.sqrt(math.pi) / math.sqrt(2.0 * th) * mass * np.exp(-0.5 * th * gap**2)


def imse_internal(d, spec: InternalNoiseSpec) -> float:
    """Closed-form IMSE of a 1-D design for a factor with internal noise."""
    d = np.asarray(d, dtype=float).ravel()
    factor = factorize(d[:, None], spec.theta)
    c2 = 1.0 / (2.0 * spec.sigma_e * math.sqrt(math.pi))
    scale = 1.0 / (2.0 * spec.sigma_e * math.sqrt(math.pi) * c2)
    return float(scale * (1.0 - np.trace(factor.solve(abar_matrix(d, spec)))))


def expected_mse_internal(x, d, spec: InternalNoiseSpec) -> np.ndarray:
    """Expected MSE at nominal setting(s) x, averaged over the internal noise."""
    d = np.asarray(d, dtype=float).ravel()
    factor = factorize(d[:, None], spec.theta)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.empty(len(x))
    for i, xi in enumerate(x):
        out[i] = 1.0 - np.trace(factor.solve(a_matrix(xi, d, spec)))
    return out
