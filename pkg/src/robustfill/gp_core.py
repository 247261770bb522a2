"""Gaussian-correlation kriging: correlation matrices, prediction and ML fitting."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import linalg, optimize
from scipy.linalg import lapack

NUGGET = 1e-8
NUGGET_MAX = 1e-4
ILL_CONDITIONED = 1e8  # smallest eigenvalue comparable to the nugget

ROLES = ("control", "noise_ext", "noise_int")


class ConditioningError(np.linalg.LinAlgError):
    """Correlation matrix could not be factorised even with the largest nugget."""


@dataclass(frozen=True)
class CorrelationParams:
    """Gaussian correlation scales for the control and noise coordinates."""

    theta_x: np.ndarray
    theta_z: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        tx = np.atleast_1d(np.asarray(self.theta_x, dtype=float)).copy()
        tz = np.atleast_1d(np.asarray(self.theta_z, dtype=float)).copy()
        for t in (tx, tz):
            if t.ndim != 1 or not np.all(np.isfinite(t)) or np.any(t < 0):
                raise ValueError("correlation parameters must be finite and >= 0")
        tx.flags.writeable = False
        tz.flags.writeable = False
        object.__setattr__(self, "theta_x", tx)
        object.__setattr__(self, "theta_z", tz)

    @property
    def theta(self) -> np.ndarray:
        return np.concatenate([self.theta_x, self.theta_z])

    @property
    def p(self) -> int:
        return len(self.theta_x)

    @property
    def q(self) -> int:
        return len(self.theta_z)

    @classmethod
    def from_vector(cls, theta, p: int):
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        return cls(theta[:p], theta[p:])

    @classmethod
    def isotropic(cls, value: float, p: int, q: int):
        return cls(np.full(p, float(value)), np.full(q, float(value)))


def as_theta(theta, dim: Optional[int] = None) -> np.ndarray:
    """Flatten a CorrelationParams, scalar or vector into a length-``dim`` array."""
    if isinstance(theta, CorrelationParams):
        t = theta.theta
    else:
        t = np.atleast_1d(np.asarray(theta, dtype=float))
    if dim is not None:
        if t.size == 1 and dim != 1:
            t = np.full(dim, float(t[0]))
        if t.size != dim:
            raise ValueError(f"theta has {t.size} entries, expected {dim}")
    if not np.all(np.isfinite(t)) or np.any(t < 0):
        raise ValueError("correlation parameters must be finite and >= 0")
    return t


@dataclass
class Design:
    """An n x (p+q) matrix of runs plus per-column metadata.

    ``roles`` holds one of ``control``, ``noise_ext``, ``noise_int`` per column.
    ``transforms`` holds ``none``, ``tr``, ``dt:<alpha>`` or ``hybrid``.
    """

    X: np.ndarray
    roles: tuple = ()
    names: tuple = ()
    transforms: tuple = ()
    labels: Optional[np.ndarray] = None  # (n, 2) control/noise cluster ids
    pre_snap: Optional[np.ndarray] = None

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        if X.ndim != 2 or X.shape[0] < 1:
            raise ValueError("design needs at least one run")
        if not np.all(np.isfinite(X)):
            raise ValueError("design entries must be finite")
        self.X = X
        d = X.shape[1]
        if not self.roles:
            self.roles = ("control",) * d
        bad = [r for r in self.roles if r not in ROLES]
        if bad:
            raise ValueError(f"unknown role(s) {bad}")
        if not self.names:
            self.names = tuple(self._default_names())
        if not self.transforms:
            self.transforms = ("none",) * d
        self.roles = tuple(self.roles)
        self.names = tuple(self.names)
        self.transforms = tuple(self.transforms)
        for meta in (self.roles, self.names, self.transforms):
            if len(meta) != d:
                raise ValueError("column metadata length does not match design width")

    def _default_names(self):
        counts = {"control": 0, "noise_ext": 0, "noise_int": 0}
        prefix = {"control": "x", "noise_ext": "z", "noise_int": "X"}
        for r in self.roles:
            counts[r] += 1
            yield f"{prefix[r]}{counts[r]}"

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    @property
    def control_idx(self) -> np.ndarray:
        return np.array([i for i, r in enumerate(self.roles) if r != "noise_ext"], dtype=int)

    @property
    def noise_idx(self) -> np.ndarray:
        return np.array([i for i, r in enumerate(self.roles) if r == "noise_ext"], dtype=int)

    @property
    def p(self) -> int:
        return len(self.control_idx)

    @property
    def q(self) -> int:
        return len(self.noise_idx)

    def min_distance(self) -> float:
        if self.n < 2:
            return math.inf
        diff = self.X[:, None, :] - self.X[None, :, :]
        d2 = np.einsum("ijk,ijk->ij", diff, diff)
        return float(np.sqrt(d2[np.triu_indices(self.n, 1)].min()))

    def validate(self):
        """Check control columns lie in [0, 1] and rows are distinct."""
        ctrl = self.X[:, [i for i, r in enumerate(self.roles) if r == "control"]]
        if ctrl.size and (ctrl.min() < 0 or ctrl.max() > 1):
            raise ValueError("control columns must lie in [0, 1]")
        if self.min_distance() <= 0:
            raise ValueError("design has duplicate rows")
        return self

    def with_columns(self, X, transforms=None):
        return Design(
            X,
            roles=self.roles,
            names=self.names,
            transforms=self.transforms if transforms is None else transforms,
            labels=self.labels,
            pre_snap=self.pre_snap,
        )

    def __eq__(self, other):
        if not isinstance(other, Design):
            return NotImplemented
        return (
            self.X.shape == other.X.shape
            and np.array_equal(self.X, other.X)
            and self.roles == other.roles
            and self.names == other.names
            and self.transforms == other.transforms
        )


def theta_vector(design: Design, theta) -> np.ndarray:
    """Correlation scales in design-column order.

    A :class:`CorrelationParams` is scattered onto the control and noise
    columns; anything else is taken to be in column order already.
    """
    if isinstance(theta, CorrelationParams):
        t = np.empty(design.d)
        t[design.control_idx] = as_theta(theta.theta_x, len(design.control_idx))
        t[design.noise_idx] = as_theta(theta.theta_z, len(design.noise_idx))
        return t
    return as_theta(theta, design.d)


def theta_params(design: Design, t) -> CorrelationParams:
    t = np.asarray(t, dtype=float)
    return CorrelationParams(t[design.control_idx], t[design.noise_idx])


def _as_matrix(D) -> np.ndarray:
    if isinstance(D, Design):
        return D.X
    D = np.asarray(D, dtype=float)
    return D[:, None] if D.ndim == 1 else D


def gauss_corr(u, v, theta) -> float:
    """exp(-sum_l theta_l (u_l - v_l)^2) for two points."""
    u = np.atleast_1d(np.asarray(u, dtype=float))
    v = np.atleast_1d(np.asarray(v, dtype=float))
    if u.shape != v.shape:
        raise ValueError("point dimensions do not match")
    t = as_theta(theta, u.size)
    return float(np.exp(-np.sum(t * (u - v) ** 2)))


def cross_corr(A, B, theta) -> np.ndarray:
    """Matrix of Gaussian correlations between rows of ``A`` and rows of ``B``."""
    A = _as_matrix(A)
    B = _as_matrix(B)
    if A.shape[1] != B.shape[1]:
        raise ValueError("point dimensions do not match")
    t = as_theta(theta, A.shape[1])
    # per-coordinate differences: the expanded-square form cancels badly near design points
    d2 = np.zeros((A.shape[0], B.shape[0]))
    for k in range(A.shape[1]):
        diff = A[:, k, None] - B[None, :, k]
        d2 += t[k] * diff * diff
    return np.exp(-d2)


def corr_matrix(design, theta, nugget: float = NUGGET) -> np.ndarray:
    """Correlation matrix of the design rows with ``nugget`` added to the diagonal."""
    X = _as_matrix(design)
    t = as_theta(theta, X.shape[1])
    diff = X[:, None, :] - X[None, :, :]
    R = np.exp(-np.einsum("ijk,k->ij", diff * diff, t))
    R[np.diag_indices_from(R)] += nugget
    return R


@dataclass
class CorrFactor:
    """Cholesky factor of a design correlation matrix."""

    X: np.ndarray
    theta: np.ndarray
    chol: np.ndarray
    nugget: float
    cond: float

    @property
    def ill_conditioned(self) -> bool:
        return self.cond > ILL_CONDITIONED

    def solve(self, b):
        return linalg.cho_solve((self.chol, True), b, check_finite=False)

    def half_solve(self, b):
        """L^{-1} b, so that b' R^{-1} b = ||L^{-1} b||^2."""
        return linalg.solve_triangular(self.chol, b, lower=True, check_finite=False)

    def cross(self, points) -> np.ndarray:
        """Correlations between design rows and ``points`` (n x m).

        A point that coincides with a design row also picks up the nugget,
        so the predictor interpolates exactly and the MSE there is zero.
        """
        P = _as_matrix(points)
        r = cross_corr(self.X, P, self.theta)
        if self.nugget > 0:
            same = np.all(self.X[:, None, :] == P[None, :, :], axis=2)
            r[same] += self.nugget
        return r

    @property
    def logdet(self) -> float:
        return 2.0 * float(np.sum(np.log(np.diag(self.chol))))

    @property
    def n(self) -> int:
        return self.chol.shape[0]


def factorize(design, theta, nugget: float = NUGGET, max_nugget: float = NUGGET_MAX) -> CorrFactor:
    """Cholesky-factorise the correlation matrix, escalating the nugget x10 on failure."""
    X = _as_matrix(design)
    t = as_theta(theta, X.shape[1])
    if not (0.0 <= nugget <= max_nugget):
        raise ValueError("need 0 <= nugget <= max_nugget")
    R0 = corr_matrix(X, t, nugget=0.0)
    nug = nugget
    while True:
        R = R0.copy()
        R[np.diag_indices_from(R)] += nug
        try:
            L = np.linalg.cholesky(R)
        except np.linalg.LinAlgError:
            L = None
        if L is not None and np.all(np.isfinite(L)):
            # LAPACK 1-norm estimate from the existing factor
            rcond, _ = lapack.dpocon(L, float(np.abs(R).sum(axis=0).max()), uplo="L")
            cond = 1.0 / rcond if rcond > 0 else math.inf
            return CorrFactor(X=X, theta=t, chol=L, nugget=nug, cond=cond)
        if nug >= max_nugget * (1 - 1e-12):
            raise ConditioningError(
                f"correlation matrix not positive definite with nugget {max_nugget:g}"
            )
        nug = min(max(10.0 * nug, NUGGET), max_nugget)


def mse_from_factor(factor: CorrFactor, points) -> np.ndarray:
    """Normalised posterior variance 1 - r'R^{-1}r, clamped to [0, 1]."""
    P = _as_matrix(points)
    v = factor.half_solve(factor.cross(P))
    mse = 1.0 - np.einsum("ij,ij->j", v, v)
    return np.clip(mse, 0.0, 1.0)


def predict_mse(design, theta, points) -> np.ndarray:
    """MSE(point; D, theta) for each row of ``points``."""
    return mse_from_factor(factorize(design, theta), points)


@dataclass(frozen=True)
class KrigingModel:
    """Fitted ordinary-kriging model; immutable after construction."""

    design: Design
    y: np.ndarray
    mu: float
    tau2: float
    theta: CorrelationParams
    factor: CorrFactor = field(repr=False)
    weights: np.ndarray = field(repr=False)
    constant: bool = False
    loglik: float = math.nan

    @property
    def X(self) -> np.ndarray:
        return self.design.X

    def predict(self, points) -> np.ndarray:
        P = _as_matrix(points)
        if self.constant:
            return np.full(P.shape[0], self.mu)
        return self.mu + self.factor.cross(P).T @ self.weights

    def mse(self, points) -> np.ndarray:
        return mse_from_factor(self.factor, points)

    def variance(self, points) -> np.ndarray:
        return self.tau2 * self.mse(points)


def predict_mean(model: KrigingModel, points) -> np.ndarray:
    return model.predict(points)


def _profile(factor: CorrFactor, y: np.ndarray):
    ones = np.ones_like(y)
    Ri1 = factor.solve(ones)
    mu = float(Ri1 @ y / (Ri1 @ ones))
    resid = y - mu
    w = factor.solve(resid)
    tau2 = float(resid @ w / len(y))
    return mu, tau2, w


def build_model(design, y, theta, nugget: float = NUGGET) -> KrigingModel:
    """Model at fixed ``theta`` with mu and tau^2 profiled out."""
    if not isinstance(design, Design):
        design = Design(np.asarray(design, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    if len(y) != design.n:
        raise ValueError("response length does not match design")
    if not np.all(np.isfinite(y)):
        raise ValueError("responses must be finite")
    t = theta_vector(design, theta)
    params = theta_params(design, t)
    factor = factorize(design.X, t, nugget=nugget)
    mu, tau2, w = _profile(factor, y)
    if not math.isfinite(tau2):
        raise FloatingPointError("process variance overflows double precision")
    n = len(y)
    loglik = -0.5 * n * math.log(max(tau2, 1e-300)) - 0.5 * factor.logdet
    return KrigingModel(design, y, mu, tau2, params, factor, w, False, loglik)


def neg_profile_loglik(log_theta, X, y, nugget: float = NUGGET) -> float:
    """Negative concentrated log-likelihood at theta = exp(log_theta).

    Parameters needing nugget escalation are penalised so the optimum keeps
    the model interpolating.
    """
    t = np.exp(log_theta)
    try:
        factor = factorize(X, t, nugget=nugget, max_nugget=nugget)
    except ConditioningError:
        return 1e10
    _, tau2, _ = _profile(factor, y)
    if not tau2 > 0:
        return 1e10
    n = len(y)
    return 0.5 * n * math.log(tau2) + 0.5 * factor.logdet


def fit_kriging(
    design,
    y,
    theta_bounds: Sequence[float] = (1e-2, 1e3),
    n_starts: int = 8,
    seed: int = 0,
    nugget: float = NUGGET,
) -> KrigingModel:
    """Maximum-likelihood ordinary kriging with a multistart search over log theta.

    Starts are log-uniform over ``theta_bounds`` and drawn from ``seed``.
    A response with zero variance gives a constant model (``constant=True``,
    ``tau2 = 0``).
    """
    if not isinstance(design, Design):
        design = Design(np.asarray(design, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    n, d = design.X.shape
    if len(y) != n:
        raise ValueError("response length does not match design")
    if not np.all(np.isfinite(y)):
        raise ValueError("responses must be finite")
    if n < max(d + 1, 3):
        raise ValueError(f"need at least {max(d + 1, 3)} runs to fit, got {n}")

    lo, hi = (float(b) for b in theta_bounds)
    if np.all(y == y[0]):
        t = np.full(d, math.sqrt(lo * hi))
        factor = factorize(design.X, t, nugget=nugget)
        return KrigingModel(
            design, y, float(y[0]), 0.0, theta_params(design, t), factor, np.zeros(n), True
        )

    # standardise y so the likelihood surface does not depend on its scale
    with np.errstate(over="ignore", invalid="ignore"):
        centre, scale = y.mean(), y.std()
        ys = (y - centre) / scale
    if not (math.isfinite(scale) and np.all(np.isfinite(ys))):
        raise FloatingPointError("response scale overflows double precision")
    rng = np.random.default_rng(seed)
    log_lo, log_hi = math.log(lo), math.log(hi)
    starts = rng.uniform(log_lo, log_hi, size=(n_starts, d))
    bounds = [(log_lo, log_hi)] * d

    best = None
    for k, s0 in enumerate(starts):
        res = optimize.minimize(
            neg_profile_loglik,
            s0,
            args=(design.X, ys, nugget),
            method="L-BFGS-B",
            bounds=bounds,
        )
        val = float(res.fun)
        if best is None or val < best[0]:
            best = (val, k, res.x)

    if best[0] >= 1e10:
        warnings.warn("all likelihood starts ill-conditioned; relying on nugget escalation")
    return build_model(design, y, np.exp(best[2]), nugget=nugget)
