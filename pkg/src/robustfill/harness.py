"""Robust-setting search and the simulated control-by-noise study."""

from __future__ import annotations

import hashlib
import itertools
import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np
import scipy
from numpy.polynomial.hermite_e import hermegauss
from scipy.stats import qmc

from . import __version__
from .criteria import wrmse
from .generators import (
    double_transformed_noise,
    jittered_cross_array,
    maximin_lhd,
    maxpro_lhd,
    transformed_noise,
    uniform_design,
)
from .gp_core import ConditioningError, Design, KrigingModel, cross_corr, fit_kriging
from .io import canonical_json, write_profile
from .stats_dist import NoiseModel

RECIPES = ("TrMaxProLHD", "DTMaxProLHD", "TrJCA", "DTJCA")


def max_threads() -> int:
    """Worker cap from ROBUSTFILL_THREADS, else the machine's CPU count."""
    env = os.environ.get("ROBUSTFILL_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            warnings.warn(f"ignoring non-integer ROBUSTFILL_THREADS={env!r}")
    return os.cpu_count() or 1


# --------------------------------------------------------------------------
# noise quadrature and robust settings


def noise_nodes(models: Sequence[NoiseModel], n_gh: int = 64, mc_size: int = 2**14, seed: int = 0):
    """Nodes and weights for expectations over independent noise factors.

    Tensor Gauss-Hermite for up to two normal factors, otherwise scrambled
    Sobol points pushed through the quantile functions.
    """
    q = len(models)
    if q <= 2 and all(m.kind == "normal" for m in models):
        t, w = hermegauss(n_gh)
        w = w / math.sqrt(2 * math.pi)
        axes = [m.mean + m.sd * t for m in models]
        grids = np.meshgrid(*axes, indexing="ij")
        wg = np.meshgrid(*([w] * q), indexing="ij")
        Z = np.stack([g.ravel() for g in grids], axis=1)
        W = np.prod(np.stack([g.ravel() for g in wg], axis=1), axis=1)
        return Z, W
    m2 = int(round(math.log2(mc_size)))
    u = qmc.Sobol(q, scramble=True, seed=seed).random_base2(m2)
    u = np.clip(u, 1e-15, 1 - 1e-15)
    Z = np.column_stack([m.quantile(u[:, i]) for i, m in enumerate(models)])
    return Z, np.full(len(Z), 1.0 / len(Z))


def predict_grid(model: KrigingModel, Xc, Z) -> np.ndarray:
    """Predictions on the product of control settings ``Xc`` and noise nodes ``Z``.

    Uses the product form of the Gaussian kernel, so the cost is two small
    correlation matrices and one matrix product.
    """
    Xc = np.atleast_2d(np.asarray(Xc, dtype=float))
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    if model.constant:
        return np.full((len(Xc), len(Z)), model.mu)
    ci, ni = model.design.control_idx, model.design.noise_idx
    t = model.factor.theta
    A = cross_corr(Xc, model.X[:, ci], t[ci])
    B = cross_corr(Z, model.X[:, ni], t[ni])
    return model.mu + (A * model.weights[None, :]) @ B.T


def _expected_loss(G, W, loss):
    if loss == "variance":
        m = G @ W
        return np.maximum(G**2 @ W - m**2, 0.0)
    if loss == "quadratic":
        return G**2 @ W
    if callable(loss):
        return loss(G) @ W
    raise ValueError(f"unknown loss {loss!r}")


@dataclass
class RobustSetting:
    x: np.ndarray
    value: float
    flat: bool
    grid: np.ndarray = field(repr=False)
    objective: np.ndarray = field(repr=False)


def _control_grid(x_grid, p: int) -> np.ndarray:
    if isinstance(x_grid, int):
        axis = np.linspace(0.0, 1.0, x_grid)
        return np.array(list(itertools.product(axis, repeat=p)))
    g = np.asarray(x_grid, dtype=float)
    if g.ndim == 1:
        return np.array(list(itertools.product(g, repeat=p)))
    return g


def robust_setting(model: Union[KrigingModel, Callable], loss="variance", noise_models=None,
                   x_grid=501, p: int = 1, n_gh: int = 64, mc_size: int = 2**14, seed: int = 0,
                   flat_tol: float = 1e-12) -> RobustSetting:
    """Minimise the expected loss over control settings on a grid.

    ``model`` is a fitted :class:`KrigingModel` or any callable taking an
    (m, p + q) array of points with the control columns first. ``loss`` is
    ``variance`` (noise-induced variance), ``quadratic`` (mean of y^2) or
    an elementwise callable. Ties go to the lexicographically smallest grid
    point; ``flat`` marks an objective that does not vary over the grid.
    For p > 2 the grid search is refined by a bounded local search.
    """
    if isinstance(noise_models, NoiseModel):
        noise_models = [noise_models]
    if isinstance(model, KrigingModel):
        p = model.design.p
    Xc = _control_grid(x_grid, p)
    order = np.lexsort(Xc.T[::-1])
    Xc = Xc[order]
    Z, W = noise_nodes(noise_models, n_gh=n_gh, mc_size=mc_size, seed=seed)

    def objective(points):
        out = np.empty(len(points))
        chunk = max(1, 2**22 // len(Z))
        for s in range(0, len(points), chunk):
            xs = points[s : s + chunk]
            if isinstance(model, KrigingModel):
                G = predict_grid(model, xs, Z)
            else:
                P = np.hstack([np.repeat(xs, len(Z), axis=0), np.tile(Z, (len(xs), 1))])
                G = np.asarray(model(P), dtype=float).reshape(len(xs), len(Z))
            out[s : s + chunk] = _expected_loss(G, W, loss)
        return out

    obj = objective(Xc)
    k = int(np.argmin(obj))
    spread = float(obj.max() - obj.min())
    flat = spread <= flat_tol * (1.0 + abs(float(obj.mean())))
    x, val = Xc[k], float(obj[k])
    if p > 2 and not flat:
        from scipy.optimize import minimize

        # Powell copes with the flat (often quartic) minima of variance losses
        res = minimize(lambda u: objective(u[None, :])[0], x, method="Powell", bounds=[(0, 1)] * p,
                       options={"xtol": 1e-8, "ftol": 1e-14})
        if res.fun < val:
            x, val = np.clip(res.x, 0, 1), float(res.fun)
    return RobustSetting(np.asarray(x), val, flat, Xc, obj)


# --------------------------------------------------------------------------
# simulated study


def response_function(X, beta, gamma) -> np.ndarray:
    """y = sum_i beta_i (x - gamma_i) z_i^2 exp(-(x - gamma_5)^2), one control, four noise."""
    X = np.atleast_2d(X)
    x = X[:, 0]
    z = X[:, 1:5]
    beta = np.asarray(beta, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    return np.sum(beta[None, :] * (x[:, None] - gamma[None, :4]) * z**2, axis=1) * np.exp(-(x - gamma[4]) ** 2)


@dataclass
class StudyConfig:
    """Settings for the simulated study; every seed is recorded in the report."""

    designs: tuple = RECIPES
    n1: int = 6
    n2: int = 9
    replications: int = 20
    test_size: int = 100
    seed: int = 20240
    design_seed: int = 0
    alpha: float = 2.0 / 3.0
    jca_restarts: int = 16
    theta_bounds: tuple = (1e-2, 1e3)
    fit_starts: int = 8
    grid_size: int = 501
    loss: str = "variance"
    mc_size: int = 2**14
    beta: Optional[tuple] = None
    gamma: Optional[tuple] = None

    def __post_init__(self):
        self.designs = tuple(self.designs)
        self.theta_bounds = tuple(float(b) for b in self.theta_bounds)
        if self.beta is not None:
            self.beta = tuple(float(b) for b in self.beta)
        if self.gamma is not None:
            self.gamma = tuple(float(g) for g in self.gamma)
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        unknown = set(self.designs) - set(RECIPES)
        if unknown:
            raise ValueError(f"unknown design recipe(s) {sorted(unknown)}")
        if self.loss not in ("variance", "quadratic"):
            raise ValueError("loss must be 'variance' or 'quadratic'")

    @classmethod
    def from_dict(cls, d: dict):
        return cls(**d)

    def to_dict(self) -> dict:
        return asdict(self)

    def digest(self) -> str:
        return hashlib.sha256(canonical_json(self.to_dict()).encode()).hexdigest()


NOISE = NoiseModel.normal(0.0, 1.0)
Q = 4


def study_designs(cfg: StudyConfig) -> dict:
    """The n1*n2-run designs named in ``cfg.designs`` (one control, four N(0,1) noise)."""
    n = cfg.n1 * cfg.n2
    out = {}
    roles = ("control",) + ("noise_ext",) * Q
    need_mp = any("MaxPro" in r for r in cfg.designs)
    need_jca = any("JCA" in r for r in cfg.designs)
    if need_mp:
        base = Design(maxpro_lhd(n, 1 + Q, seed=cfg.design_seed), roles=roles)
    if need_jca:
        Dx = uniform_design(cfg.n1)[:, None]
        Dz = maximin_lhd(cfg.n2, Q, seed=cfg.design_seed)
        jca = jittered_cross_array(Dx, Dz, seed=cfg.design_seed, restarts=cfg.jca_restarts)
    for name in cfg.designs:
        src = base if "MaxPro" in name else jca
        if name.startswith("DT"):
            out[name] = double_transformed_noise(src, NOISE, alpha=cfg.alpha)
        else:
            out[name] = transformed_noise(src, NOISE)
    return out


def _draw_params(cfg: StudyConfig, rep: int):
    rng = np.random.default_rng([cfg.seed, rep])
    beta = rng.random(4)
    gamma = rng.random(5)
    if cfg.beta is not None:
        beta = np.asarray(cfg.beta, dtype=float)
    if cfg.gamma is not None:
        gamma = np.asarray(cfg.gamma, dtype=float)
    return beta, gamma


def holdout_points(cfg: StudyConfig) -> np.ndarray:
    u = qmc.Sobol(1 + Q, scramble=True, seed=cfg.seed).random_base2(int(math.ceil(math.log2(cfg.test_size))))
    u = np.clip(u[: cfg.test_size], 1e-15, 1 - 1e-15)
    X = u.copy()
    X[:, 1:] = NOISE.quantile(u[:, 1:])
    return X


def _run_replication(cfg: StudyConfig, rep: int, designs: dict, Xtest: np.ndarray):
    beta, gamma = _draw_params(cfg, rep)
    f = lambda P: response_function(P, beta, gamma)  # noqa: E731
    truth = robust_setting(f, cfg.loss, [NOISE] * Q, x_grid=cfg.grid_size, p=1,
                           mc_size=cfg.mc_size, seed=cfg.seed)
    ytest = f(Xtest)
    rows = []
    for k, (name, D) in enumerate(designs.items()):
        row = {"replication": rep, "design": name, "beta": beta.tolist(), "gamma": gamma.tolist(),
               "x_true": float(truth.x[0])}
        try:
            y = f(D.X)
            model = fit_kriging(D, y, theta_bounds=cfg.theta_bounds, n_starts=cfg.fit_starts,
                                seed=cfg.seed + 7919 * rep + k)
            pred = model.predict(Xtest)
            rmspe = float(np.sqrt(np.mean((pred - ytest) ** 2)))
            est = robust_setting(model, cfg.loss, [NOISE] * Q, x_grid=cfg.grid_size,
                                 mc_size=cfg.mc_size, seed=cfg.seed)
            row.update(rmspe=rmspe, x_hat=float(est.x[0]), error=float(est.x[0] - truth.x[0]),
                       flat=bool(est.flat), status="zero" if model.constant else "ok")
        except (ConditioningError, np.linalg.LinAlgError, ValueError) as exc:
            row.update(rmspe=None, x_hat=None, error=None, flat=None, status=f"failed: {exc}")
        rows.append(row)
    return rows


@dataclass
class StudyReport:
    config: dict
    rows: list
    summary: dict
    provenance: dict

    def to_dict(self) -> dict:
        return {"config": self.config, "rows": self.rows, "summary": self.summary,
                "provenance": self.provenance}

    def to_json(self) -> str:
        return canonical_json(self.to_dict())

    def digest(self) -> str:
        return hashlib.sha256(self.to_json().encode()).hexdigest()

    def column(self, design: str, key: str) -> np.ndarray:
        return np.array([r[key] for r in self.rows if r["design"] == design and r[key] is not None],
                        dtype=float)


def _summarise(rows, names):
    out = {}
    for name in names:
        rs = [r for r in rows if r["design"] == name]
        ok = [r for r in rs if not r["status"].startswith("failed")]
        entry = {"attempted": len(rs), "completed": len(ok)}
        if ok:
            rm = np.array([r["rmspe"] for r in ok])
            er = np.abs(np.array([r["error"] for r in ok]))
            qs = (0.1, 0.25, 0.5, 0.75, 0.9)
            entry["rmspe_quantiles"] = dict(zip(map(str, qs), np.quantile(rm, qs).tolist()))
            entry["abs_error_quantiles"] = dict(zip(map(str, qs), np.quantile(er, qs).tolist()))
            entry["zero_rmspe"] = bool(np.all(rm == 0.0))
        out[name] = entry
    return out


def run_simulated_example(cfg: StudyConfig, threads: Optional[int] = None) -> StudyReport:
    """Fit kriging to each design for ``cfg.replications`` random test functions.

    Each replication draws beta and gamma from U(0, 1), records the RMSPE
    on scrambled-Sobol test points and the error of the plug-in robust
    setting against the true one. Failed fits are kept in the rows with a
    ``failed`` status and counted in the summary.
    """
    designs = study_designs(cfg)
    Xtest = holdout_points(cfg)
    workers = min(threads or max_threads(), cfg.replications)
    reps = range(cfg.replications)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            chunks = list(ex.map(lambda r: _run_replication(cfg, r, designs, Xtest), reps))
    else:
        chunks = [_run_replication(cfg, r, designs, Xtest) for r in reps]
    rows = [row for chunk in chunks for row in chunk]
    provenance = {
        "config_hash": cfg.digest(),
        "seeds": {"master": cfg.seed, "design": cfg.design_seed,
                  "replications": [[cfg.seed, r] for r in reps]},
        "versions": {"robustfill": __version__, "numpy": np.__version__, "scipy": scipy.__version__},
    }
    return StudyReport(cfg.to_dict(), rows, _summarise(rows, list(designs)), provenance)


# --------------------------------------------------------------------------
# profiles


def emit_profile(design, theta, models, grid, path) -> np.ndarray:
    """Write WRMSE at each grid point to CSV and return the values."""
    D = design if isinstance(design, Design) else Design(np.asarray(design, dtype=float).reshape(len(design), -1),
                                                        roles=("noise_ext",) * np.asarray(design).reshape(len(design), -1).shape[1])
    grid = np.asarray(grid, dtype=float).reshape(-1, D.d)
    vals = wrmse(D, theta, grid, models) if len(grid) else np.empty(0)
    write_profile(D.names, grid, vals, path)
    return vals
