"""Design construction: LHDs, cross arrays, jittered cross arrays and noise arrays."""

from __future__ import annotations

import hashlib
import itertools
import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy import optimize

from . import criteria
from .criteria import CriterionConfig, InternalNoiseSpec, QuadratureSpec
from .gp_core import Design, factorize, cross_corr
from .stats_dist import BetaWarp, NoiseModel, beta_quantile, correlate_mvn, inverse_transform


# --------------------------------------------------------------------------
# Latin hypercubes


def uniform_design(n: int) -> np.ndarray:
    """Midpoint levels (i - 0.5) / n, i = 1..n."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return (np.arange(n) + 0.5) / n


def random_lhd(n: int, d: int, rng: np.random.Generator) -> np.ndarray:
    levels = uniform_design(n)
    return np.column_stack([rng.permutation(levels) for _ in range(d)])


def maximin_terms(X, rows, p: float = 15.0):
    """(d_ij^2)^(-p/2) between ``rows`` and every row; self-pairs are zero."""
    diff = X[rows, None, :] - X[None, :, :]
    d2 = np.einsum("ijk,ijk->ij", diff, diff)
    with np.errstate(divide="ignore"):
        t = d2 ** (-p / 2.0)
    t[np.arange(len(rows)), rows] = 0.0
    return t


def maxpro_terms(X, rows, s: float = 2.0):
    """1 / prod_l |x_il - x_jl|^s between ``rows`` and every row."""
    diff = np.abs(X[rows, None, :] - X[None, :, :])
    with np.errstate(divide="ignore"):
        t = 1.0 / np.prod(diff**s, axis=2)
    t[np.arange(len(rows)), rows] = 0.0
    return t


def maximin_criterion(X, p: float = 15.0) -> float:
    """Morris-Mitchell phi_p; smaller is better."""
    X = np.asarray(X, dtype=float)
    T = maximin_terms(X, np.arange(len(X)), p)
    return float((0.5 * T.sum()) ** (1.0 / p))


def maxpro_criterion(X, s: float = 2.0) -> float:
    """Average reciprocal projected-distance product, to the power 1/d; smaller is better."""
    X = np.asarray(X, dtype=float)
    n, d = X.shape
    T = maxpro_terms(X, np.arange(n), s)
    return float((0.5 * T.sum() / math.comb(n, 2)) ** (1.0 / d))


def min_pairwise_distance(X) -> float:
    X = np.asarray(X, dtype=float)
    diff = X[:, None, :] - X[None, :, :]
    d2 = np.einsum("ijk,ijk->ij", diff, diff)
    return float(np.sqrt(d2[np.triu_indices(len(X), 1)].min()))


def _anneal(X, terms, iters: int, rng: np.random.Generator, t0: float = 0.05, t1: float = 1e-4):
    """Simulated annealing over within-column swaps, minimising log(sum of pair terms)."""
    n, d = X.shape
    X = X.copy()
    T = terms(X, np.arange(n))
    total = 0.5 * T.sum()
    best_X, best = X.copy(), total
    if n < 2:
        return X
    cool = (t1 / t0) ** (1.0 / max(iters - 1, 1))
    temp = t0
    for _ in range(iters):
        k = rng.integers(d)
        i, j = rng.choice(n, 2, replace=False)
        rows = np.array([i, j])
        old_rows = T[rows]
        old = old_rows.sum() - old_rows[0, j]
        X[i, k], X[j, k] = X[j, k], X[i, k]
        new_rows = terms(X, rows)
        new = new_rows.sum() - new_rows[0, j]
        cand = total - old + new
        delta = math.log(cand) - math.log(total) if cand > 0 and total > 0 else cand - total
        if delta <= 0 or rng.random() < math.exp(-delta / temp):
            T[rows] = new_rows
            T[:, rows] = new_rows.T
            total = cand
            if total < best:
                best, best_X = total, X.copy()
        else:
            X[i, k], X[j, k] = X[j, k], X[i, k]
        temp *= cool
    return best_X


def maximin_lhd(n: int, d: int, seed: int = 0, iters: Optional[int] = None) -> np.ndarray:
    """Maximin Latin hypercube by simulated annealing on the phi_15 criterion."""
    if n < 2:
        raise ValueError("n must be >= 2")
    rng = np.random.default_rng(seed)
    iters = iters if iters is not None else max(2000, 200 * n * d)
    return _anneal(random_lhd(n, d, rng), maximin_terms, iters, rng)


def maxpro_lhd(n: int, d: int, seed: int = 0, iters: Optional[int] = None) -> np.ndarray:
    """Maximum projection Latin hypercube (s = 2) by simulated annealing."""
    if n < 2:
        raise ValueError("n must be >= 2")
    rng = np.random.default_rng(seed)
    iters = iters if iters is not None else max(2000, 200 * n * d)
    return _anneal(random_lhd(n, d, rng), maxpro_terms, iters, rng)


def snap_to_levels(X) -> np.ndarray:
    """Replace each column by the midpoint levels in the same rank order."""
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    ranks = np.argsort(np.argsort(X, axis=0, kind="stable"), axis=0, kind="stable")
    return (ranks + 0.5) / n


# --------------------------------------------------------------------------
# fill distance


@dataclass(frozen=True)
class FillDistance:
    radius: float
    point: np.ndarray


def _fill_1d(x) -> FillDistance:
    x = np.sort(np.asarray(x, dtype=float).ravel())
    cands = [(x[0], 0.0), (1.0 - x[-1], 1.0)]
    if len(x) > 1:
        gaps = np.diff(x) / 2.0
        k = int(np.argmax(gaps))
        cands.append((gaps[k], 0.5 * (x[k] + x[k + 1])))
    r, u = max(cands, key=lambda c: c[0])
    return FillDistance(float(r), np.array([u]))


def _nearest_dist(X, P):
    diff = P[:, None, :] - X[None, :, :]
    return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff).min(axis=1))


def _fill_2d(X) -> FillDistance:
    # the maximum sits at a Voronoi vertex, a corner, or a bisector/edge crossing
    X = np.asarray(X, dtype=float)
    cands = [np.array([[0, 0], [0, 1], [1, 0], [1, 1]], dtype=float)]
    n = len(X)
    if n >= 3:
        try:
            from scipy.spatial import Voronoi

            v = Voronoi(X).vertices
            cands.append(v[np.all((v >= 0) & (v <= 1), axis=1)])
        except Exception:  # degenerate (collinear) point sets
            pass
    i, j = np.triu_indices(n, 1)
    a, b = X[i], X[j]
    m = 0.5 * (a + b)
    nrm = b - a
    pts = []
    for axis in (0, 1):
        other = 1 - axis
        for c in (0.0, 1.0):
            with np.errstate(divide="ignore", invalid="ignore"):
                t = (nrm[:, 0] * m[:, 0] + nrm[:, 1] * m[:, 1] - nrm[:, axis] * c) / nrm[:, other]
            ok = np.isfinite(t) & (t >= 0) & (t <= 1)
            P = np.empty((ok.sum(), 2))
            P[:, axis] = c
            P[:, other] = t[ok]
            pts.append(P)
    cands.extend(pts)
    C = np.vstack(cands)
    d = _nearest_dist(X, C)
    k = int(np.argmax(d))
    return FillDistance(float(d[k]), C[k])


def _fill_search(X, seed: int = 0, n_random: int = 4096, n_local: int = 16) -> FillDistance:
    X = np.asarray(X, dtype=float)
    dim = X.shape[1]
    rng = np.random.default_rng(seed)
    corners = np.array(list(itertools.product([0.0, 1.0], repeat=dim))) if dim <= 10 else np.empty((0, dim))
    C = np.vstack([rng.random((n_random, dim)), corners])
    d = _nearest_dist(X, C)
    order = np.argsort(-d)[:n_local]
    best_r, best_u = float(d[order[0]]), C[order[0]]
    bounds = [(0.0, 1.0)] * dim
    for k in order:
        res = optimize.minimize(
            lambda u: -_nearest_dist(X, u[None, :])[0], C[k], method="Powell", bounds=bounds,
            options={"xtol": 1e-10, "ftol": 1e-12},
        )
        u = np.clip(res.x, 0, 1)
        r = _nearest_dist(X, u[None, :])[0]
        if r > best_r:
            best_r, best_u = float(r), u
    return FillDistance(best_r, best_u)


def fill_distance(design, seed: int = 0) -> FillDistance:
    """Covering radius of the design in the unit cube, with the point attaining it."""
    X = design.X if isinstance(design, Design) else np.asarray(design, dtype=float)
    X = X[:, None] if X.ndim == 1 else X
    if X.shape[1] == 1:
        return _fill_1d(X[:, 0])
    if X.shape[1] == 2:
        return _fill_2d(X)
    return _fill_search(X, seed=seed)


# --------------------------------------------------------------------------
# cross arrays


@dataclass
class CrossArrayStructure:
    """Bookkeeping for a crossed design: clusters, covering radius and jitter cubes."""

    control: np.ndarray
    noise: np.ndarray
    labels: np.ndarray  # (n, 2): control cluster, noise cluster
    centers: np.ndarray
    radius: float
    radius_point: np.ndarray

    @property
    def half_width(self) -> float:
        return self.radius / math.sqrt(self.centers.shape[1])

    def cube(self, i: int):
        """Bounds of the cube around run ``i``, clipped to the unit cube."""
        h = self.half_width
        c = self.centers[i]
        return np.maximum(c - h, 0.0), np.minimum(c + h, 1.0)


def _as_array(D) -> np.ndarray:
    D = D.X if isinstance(D, Design) else np.asarray(D, dtype=float)
    return D[:, None] if D.ndim == 1 else D


def cross_array(Dx, Dz, noise_role: str = "noise_ext"):
    """Cross a control array with a noise array: row (i, j) = (Dx_i, Dz_j).

    Returns the crossed :class:`Design` and its :class:`CrossArrayStructure`.
    The covering radius uses r^2 = r_x^2 + r_z^2, which holds exactly for a
    product design.
    """
    Dx, Dz = _as_array(Dx), _as_array(Dz)
    if Dx.size == 0 or Dz.size == 0:
        raise ValueError("control and noise arrays must be nonempty")
    n1, p = Dx.shape
    n2, q = Dz.shape
    ii, jj = np.meshgrid(np.arange(n1), np.arange(n2), indexing="ij")
    ii, jj = ii.ravel(), jj.ravel()
    X = np.hstack([Dx[ii], Dz[jj]])
    labels = np.column_stack([ii, jj])
    fx, fz = fill_distance(Dx), fill_distance(Dz)
    r = math.hypot(fx.radius, fz.radius)
    design = Design(X, roles=("control",) * p + (noise_role,) * q, labels=labels)
    struct = CrossArrayStructure(Dx, Dz, labels, X, r, np.concatenate([fx.point, fz.point]))
    return design, struct


def _maxpro_increment(C, P, s: float = 2.0):
    """sum_j 1 / prod_l |c_l - P_jl|^s for each candidate row of C."""
    if len(P) == 0:
        return np.zeros(len(C))
    diff = np.abs(C[:, None, :] - P[None, :, :])
    with np.errstate(divide="ignore", over="ignore"):
        return np.sum(1.0 / np.prod(diff**s, axis=2), axis=1)


def _best_in_cube(lo, hi, P, rng, n_random: int = 50, refine: int = 8):
    d = len(lo)
    mid = 0.5 * (lo + hi)
    pattern = np.array(list(itertools.product(*[(a, m, b) for a, m, b in zip(lo, mid, hi)])))
    C = np.vstack([pattern, lo + (hi - lo) * rng.random((n_random, d))])
    vals = _maxpro_increment(C, P)
    k = int(np.argmin(vals))
    u, fu = C[k].copy(), vals[k]
    step = 0.25 * (hi - lo)
    for _ in range(refine):
        moves = np.vstack([np.diag(step), -np.diag(step)])
        N = np.clip(u + moves, lo, hi)
        fv = _maxpro_increment(N, P)
        j = int(np.argmin(fv))
        if fv[j] < fu:
            u, fu = N[j], fv[j]
        else:
            step = step / 2.0
    return u


def jittered_cross_array(Dx, Dz, seed: int = 0, restarts: int = 16, noise_role: str = "noise_ext") -> Design:
    """Jittered cross array built by sequential MaxPro placement inside each run's cube.

    The returned design carries ``labels`` (control and noise cluster of
    each run) and ``pre_snap`` (the jittered points before the columns are
    snapped to equally spaced levels).
    """
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    base, S = cross_array(Dx, Dz, noise_role=noise_role)
    if not S.radius > 0:
        raise ValueError("degenerate jitter cube: covering radius is zero")
    n, d = base.X.shape
    first = int(np.argmin(np.sum((S.centers - 0.5) ** 2, axis=1)))
    others = np.array([i for i in range(n) if i != first], dtype=int)

    best = None
    for rep in range(restarts):
        rng = np.random.default_rng([seed, rep])
        order = np.concatenate([[first], rng.permutation(others)])
        pts = np.empty((n, d))
        lo, hi = S.cube(first)
        pts[first] = np.clip(np.full(d, 0.5), lo, hi)
        placed = [first]
        for i in order[1:]:
            lo, hi = S.cube(i)
            pts[i] = _best_in_cube(lo, hi, pts[placed], rng)
            placed.append(i)
        obj = maxpro_criterion(pts)
        if best is None or obj < best[0]:
            best = (obj, rep, pts)
    pre = best[2]
    out = Design(
        snap_to_levels(pre),
        roles=base.roles,
        labels=S.labels.copy(),
        pre_snap=pre.copy(),
    )
    out.structure = S
    out.maxpro = best[0]
    return out


# --------------------------------------------------------------------------
# noise arrays


def _noise_models(design: Design, models):
    q = design.q
    if isinstance(models, NoiseModel):
        return [models] * q
    models = list(models)
    if len(models) != q:
        raise ValueError(f"need {q} noise models, got {len(models)}")
    return models


def _transform_noise(design: Design, models, warp: Optional[BetaWarp], tag: str) -> Design:
    X = design.X.copy()
    idx = design.noise_idx
    if isinstance(models, NoiseModel) and models.cov is not None:
        U = X[:, idx]
        if warp is not None:
            U = beta_quantile(U, warp)
        X[:, idx] = correlate_mvn(U, models.cov, mean=np.full(len(idx), models.mean))
    else:
        for i, m in zip(idx, _noise_models(design, models)):
            col = X[:, i]
            if warp is not None:
                col = beta_quantile(col, warp)
            X[:, i] = inverse_transform(col, m)
    tags = list(design.transforms)
    for i in idx:
        tags[i] = tag
    return design.with_columns(X, transforms=tuple(tags))


def _noise_design(design) -> Design:
    if isinstance(design, Design):
        return design
    X = np.asarray(design, dtype=float)
    X = X[:, None] if X.ndim == 1 else X
    return Design(X, roles=("noise_ext",) * X.shape[1])


def transformed_noise(design, models) -> Design:
    """Map every noise column through its quantile function."""
    return _transform_noise(_noise_design(design), models, None, "tr")


def double_transformed_noise(design, models, alpha: float = 2.0 / 3.0) -> Design:
    """Beta(alpha, alpha)-warp every noise column, then apply its quantile function."""
    return _transform_noise(_noise_design(design), models, BetaWarp(alpha), f"dt:{alpha!r}")


# --------------------------------------------------------------------------
# 1-D model-based noise designs


@dataclass
class Transformation1D:
    """Monotone map from the midpoint levels u_i* to optimised levels z_i*."""

    u: np.ndarray
    z: np.ndarray
    details: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=float)
        self.z = np.asarray(self.z, dtype=float)
        if self.u.shape != self.z.shape or self.u.ndim != 1:
            raise ValueError("level vectors must be 1-D and of equal length")
        if np.any(np.diff(self.u) <= 0) or np.any(np.diff(self.z) <= 0):
            raise ValueError("transformation levels must be strictly increasing")

    @property
    def n(self) -> int:
        return len(self.u)

    def __call__(self, u):
        return np.interp(np.asarray(u, dtype=float), self.u, self.z)

    @classmethod
    def identity(cls, n: int):
        u = uniform_design(n)
        return cls(u, u.copy())


def hybrid_noise_design(U_z, T: Transformation1D, tol: float = 1e-9) -> Design:
    """Apply ``T`` elementwise to every noise column of ``U_z``.

    Every noise entry must be one of T's levels.
    """
    D = _noise_design(U_z)
    X = D.X.copy()
    idx = D.noise_idx
    vals = X[:, idx]
    pos = np.searchsorted(T.u, vals)
    pos = np.clip(pos, 0, T.n - 1)
    lower = np.clip(pos - 1, 0, T.n - 1)
    near = np.where(np.abs(T.u[lower] - vals) < np.abs(T.u[pos] - vals), lower, pos)
    if np.any(np.abs(T.u[near] - vals) > tol):
        raise ValueError("noise array levels do not match the transformation levels")
    X[:, idx] = T.z[near]
    tags = list(D.transforms)
    for i in idx:
        tags[i] = "hybrid"
    return D.with_columns(X, transforms=tuple(tags))


def _softmax_points(w):
    w = w - w.max()
    g = np.exp(w)
    g /= g.sum()
    u = np.cumsum(g)[:-1]
    return g, u


def _irmse_1d_and_grad(z, theta: float, model: NoiseModel, per_panel: int = 8):
    """Panel-rule IRMSE of a 1-D design and its gradient in the design points."""
    D = Design(z[:, None], roles=("noise_ext",))
    factor = factorize(D.X, theta)
    pts, w = criteria._panel_points(z, model, 1.0, per_panel=per_panel)
    r = cross_corr(D.X, pts[:, None], theta)  # n x m
    a = factor.solve(r)
    mse = np.clip(1.0 - np.einsum("ij,ij->j", r, a), 1e-14, 1.0)
    root = np.sqrt(mse)
    val = float(np.sum(w * root))
    R = factor.chol @ factor.chol.T
    M = R * (z[None, :] - z[:, None])  # M_ij = R_ij (z_j - z_i)
    dmse = -4.0 * theta * a * r * (pts[None, :] - z[:, None]) + 4.0 * theta * a * (M @ a)
    grad = (dmse * (w / (2.0 * root))[None, :]).sum(axis=1)
    return val, grad


def optimize_irmse_1d(n: int, theta: float, model: NoiseModel, seed: int = 0, restarts: int = 20,
                      maxiter: int = 500, starts: Sequence = ()):
    """Minimise the 1-D IRMSE over n ordered points; returns (points, value, converged)."""
    rng = np.random.default_rng(seed)
    d0 = uniform_design(n)
    init = [np.asarray(s, dtype=float) for s in starts]
    alphas = np.linspace(0.5, 1.0, 6)
    for k in range(restarts):
        if k < len(alphas):
            u = beta_quantile(d0, BetaWarp(alphas[k]))
        else:
            u = np.sort(rng.uniform(0.002, 0.998, n))
            u = 0.5 * u + 0.5 * beta_quantile(d0, BetaWarp(rng.uniform(0.5, 1.0)))
        init.append(inverse_transform(u, model))

    def unpack(w):
        g, u = _softmax_points(w)
        u = np.clip(u, 1e-12, 1 - 1e-12)
        return g, u, np.asarray(model.quantile(u), dtype=float)

    def fun(w):
        g, u, z = unpack(w)
        if np.any(np.diff(z) <= 0):
            return 1e3, np.zeros_like(w)
        try:
            val, gz = _irmse_1d_and_grad(z, theta, model)
        except np.linalg.LinAlgError:
            return 1e3, np.zeros_like(w)
        dens = np.maximum(model.pdf(z), 1e-300)
        cu = gz / dens  # dJ/du
        tail = np.concatenate([np.cumsum(cu[::-1])[::-1], [0.0]])
        gw = g * tail - g * np.sum(cu * u)
        # log scale: the criterion can sit near the nugget floor (~1e-4)
        return math.log(val), gw / val

    best = None
    converged = False
    for z0 in init:
        u0 = np.clip(np.asarray(model.cdf(np.sort(z0)), dtype=float), 1e-9, 1 - 1e-9)
        gaps = np.diff(np.concatenate([[0.0], u0, [1.0]]))
        w0 = np.log(np.maximum(gaps, 1e-12))
        res = optimize.minimize(fun, w0, jac=True, method="L-BFGS-B", options={"maxiter": maxiter})
        z = unpack(res.x)[2]
        val = criteria.irmse(z, theta, model, CriterionConfig(quad=QuadratureSpec(rule="panel")))
        if best is None or val < best[1]:
            best = (z, val)
            converged = bool(res.success)
    return best[0], best[1], converged


def _model_key(model: NoiseModel) -> dict:
    return {"kind": model.kind, "mean": model.mean, "sd": model.sd,
            "lower": model.lower, "upper": model.upper,
            "table": model.table}


def _cache_path(cache_dir, n, theta, model, seed, restarts):
    key = json.dumps({"n": n, "theta": float(theta), "model": _model_key(model), "seed": seed,
                      "restarts": restarts}, sort_keys=True, default=str)
    h = hashlib.sha256(key.encode()).hexdigest()[:16]
    return Path(cache_dir) / f"irmse1d-{h}.json"


def optimal_1d_designs(n: int, thetas: Sequence[float], model: NoiseModel, seed: int = 0,
                       restarts: int = 20, cache_dir=None) -> dict:
    """IRMSE-optimal 1-D designs per theta, optionally cached on disk as JSON."""
    out = {}
    for t in thetas:
        path = _cache_path(cache_dir, n, t, model, seed, restarts) if cache_dir else None
        if path is not None and path.exists():
            rec = json.loads(path.read_text())
            out[float(t)] = (np.array(rec["z"]), rec["value"], rec["converged"])
            continue
        z, val, ok = optimize_irmse_1d(n, t, model, seed=seed, restarts=restarts)
        if not ok:
            warnings.warn(f"1-D IRMSE optimiser did not report convergence for theta={t}")
        out[float(t)] = (z, val, ok)
        if path is not None:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(json.dumps({"z": z.tolist(), "value": val, "converged": ok}))
    return out


def robust_1d_noise_design(n: int, thetas: Sequence[float], model: NoiseModel, seed: int = 0,
                           restarts: int = 20, cache_dir=None) -> Transformation1D:
    """Max-min-efficiency 1-D noise design over ``thetas``, returned as a level map.

    ``details`` holds the per-theta optimal designs, the efficiency table,
    the best-known optima and a convergence flag.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    thetas = [float(t) for t in thetas]
    if not thetas:
        raise ValueError("theta set must be nonempty")
    opt = optimal_1d_designs(n, thetas, model, seed=seed, restarts=restarts, cache_dir=cache_dir)
    designs = {t: opt[t][0] for t in thetas}
    optima = {t: opt[t][1] for t in thetas}
    table = criteria.efficiency_table(designs, thetas, model, optima=optima)
    min_eff = {a: min(row.values()) for a, row in table.items()}
    pick = max(thetas, key=lambda a: (min_eff[a], a))
    z = np.sort(designs[pick])
    details = {
        "designs": designs,
        "efficiency": table,
        "min_efficiency": min_eff,
        "optima": optima,
        "selected_theta": pick,
        "converged": all(opt[t][2] for t in thetas),
    }
    return Transformation1D(uniform_design(n), z, details)


# --------------------------------------------------------------------------
# internal noise


def endpoint_grid(n: int) -> np.ndarray:
    return np.linspace(0.0, 1.0, n)


def optimal_internal_design(n: int, spec: InternalNoiseSpec, seed: int = 0, restarts: int = 8):
    """Minimise the closed-form internal-noise IMSE over n points in [0, 1].

    Returns ``(points, value, converged)``; the result is never worse than
    the midpoint design or the endpoint grid.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    rng = np.random.default_rng(seed)
    starts = [endpoint_grid(n), uniform_design(n)]
    starts += [np.sort(rng.random(n)) for _ in range(max(0, restarts - 2))]

    def fun(x):
        try:
            return criteria.imse_internal(np.sort(x), spec)
        except np.linalg.LinAlgError:
            return 1e3

    best = None
    converged = False
    for x0 in starts:
        res = optimize.minimize(fun, x0, method="L-BFGS-B", bounds=[(0.0, 1.0)] * n,
                                options={"maxiter": 2000, "ftol": 1e-15, "gtol": 1e-10})
        x = np.sort(res.x)
        val = fun(x)
        if best is None or val < best[1]:
            best, converged = (x, val), bool(res.success)
    for bench in (endpoint_grid(n), uniform_design(n)):
        v = fun(bench)
        if v < best[1]:
            best = (bench, v)
    return best[0], best[1], converged
