"""Noise distributions and the probability transforms applied to design columns.

All functions are pure; arrays in, arrays out.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import special


class DomainError(ValueError):
    """Argument outside the domain of a distribution function."""


class MatrixError(np.linalg.LinAlgError):
    """Covariance matrix is not symmetric positive definite."""


def _check_finite(x, name="x"):
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise DomainError(f"{name} must be finite")
    return x


def _check_sd(sd):
    if not (np.isfinite(sd) and sd > 0):
        raise DomainError(f"sd must be positive and finite, got {sd!r}")


def norm_cdf(x, mean=0.0, sd=1.0):
    """Normal distribution function."""
    _check_sd(sd)
    x = _check_finite(x)
    out = special.ndtr((x - mean) / sd)
    return out if out.ndim else float(out)


def norm_quantile(p, mean=0.0, sd=1.0):
    """Normal quantile function; ``p`` must lie strictly inside (0, 1)."""
    _check_sd(sd)
    p = np.asarray(p, dtype=float)
    if np.any(~(p > 0) | ~(p < 1)):
        raise DomainError("probabilities must lie strictly inside (0, 1)")
    out = mean + sd * special.ndtri(p)
    return out if out.ndim else float(out)


def norm_pdf(x, mean=0.0, sd=1.0):
    _check_sd(sd)
    x = np.asarray(x, dtype=float)
    t = (x - mean) / sd
    out = np.exp(-0.5 * t * t) / (sd * math.sqrt(2 * math.pi))
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class BetaWarp:
    """Symmetric Beta(alpha, alpha) warp of the unit interval.

    The useful range is ``0.5 <= alpha <= 1``; smaller values are accepted so
    the unweighted-density IMSE optimum (alpha ~ 0.476) can be reproduced.
    """

    alpha: float = 2.0 / 3.0

    def __post_init__(self):
        if not (0.0 < self.alpha <= 1.0):
            raise DomainError(f"alpha must lie in (0, 1], got {self.alpha}")

    @property
    def norm_const(self) -> float:
        a = self.alpha
        return math.exp(math.lgamma(2 * a) - 2 * math.lgamma(a))

    def pdf(self, u):
        u = np.asarray(u, dtype=float)
        a = self.alpha
        with np.errstate(divide="ignore"):
            return self.norm_const * (u * (1 - u)) ** (a - 1)


def beta_cdf(u, warp: BetaWarp):
    """Distribution function B_alpha of the symmetric beta warp."""
    u = _check_finite(u, "u")
    if np.any((u < 0) | (u > 1)):
        raise DomainError("u must lie in [0, 1]")
    a = warp.alpha
    if a == 1.0:
        out = u.copy()
    else:
        # evaluate on the shorter side so B(u) + B(1-u) = 1 holds to rounding
        lo = np.minimum(u, 1 - u)
        b = special.betainc(a, a, lo)
        out = np.where(u <= 0.5, b, 1.0 - b)
    return out if out.ndim else float(out)


def beta_quantile(p, warp: BetaWarp):
    """Inverse of :func:`beta_cdf`."""
    p = _check_finite(p, "p")
    if np.any((p < 0) | (p > 1)):
        raise DomainError("p must lie in [0, 1]")
    a = warp.alpha
    if a == 1.0:
        out = p.copy()
    else:
        lo = np.minimum(p, 1 - p)
        q = special.betaincinv(a, a, lo)
        q = _polish_beta_quantile(q, lo, a)
        out = np.where(p <= 0.5, q, 1.0 - q)
    return out if out.ndim else float(out)


def _polish_beta_quantile(q, p, a, steps=3):
    # a few safeguarded Newton steps against betainc, restricted to [0, 0.5]
    c = math.exp(math.lgamma(2 * a) - 2 * math.lgamma(a))
    q = np.array(np.minimum(q, 0.5), dtype=float)
    inner = (q > 0) & (p > 0)
    for _ in range(steps):
        if not inner.any():
            break
        qi = q[inner]
        resid = special.betainc(a, a, qi) - p[inner]
        dens = c * (qi * (1 - qi)) ** (a - 1)
        step = resid / dens
        new = np.minimum(qi - step, 0.5)
        bad = (new <= 0) | ~np.isfinite(new)
        new[bad] = qi[bad]
        q[inner] = new
    return q


@dataclass(frozen=True)
class NoiseModel:
    """Distribution of a single noise factor, or a joint normal with ``cov``.

    ``kind`` is one of ``normal``, ``truncated-normal``, ``uniform`` or
    ``empirical-table``. For ``uniform`` the support is ``[lower, upper]``.
    For ``empirical-table`` pass the CDF as ``table=(z_values, F_values)``;
    the CDF is interpolated linearly.
    """

    kind: str = "normal"
    mean: float = 0.5
    sd: float = 1.0 / 6.0
    lower: float = -math.inf
    upper: float = math.inf
    table: Optional[tuple] = None
    cov: Optional[np.ndarray] = field(default=None, compare=False)

    def __post_init__(self):
        kinds = ("normal", "truncated-normal", "uniform", "empirical-table")
        if self.kind not in kinds:
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if self.kind == "uniform":
            lo = 0.0 if math.isinf(self.lower) else self.lower
            hi = 1.0 if math.isinf(self.upper) else self.upper
            object.__setattr__(self, "lower", lo)
            object.__setattr__(self, "upper", hi)
            object.__setattr__(self, "mean", 0.5 * (lo + hi))
            object.__setattr__(self, "sd", (hi - lo) / math.sqrt(12.0))
        elif self.kind == "truncated-normal":
            if math.isinf(self.lower) and math.isinf(self.upper):
                object.__setattr__(self, "lower", 0.0)
                object.__setattr__(self, "upper", 1.0)
        elif self.kind == "empirical-table":
            if self.table is None:
                raise ValueError("empirical-table model needs a table")
            z, F = (np.asarray(t, dtype=float) for t in self.table)
            if z.ndim != 1 or z.shape != F.shape or len(z) < 2:
                raise ValueError("table must be two equal-length 1-D sequences")
            if np.any(np.diff(z) <= 0) or np.any(np.diff(F) <= 0):
                raise ValueError("table must be strictly increasing")
            if abs(F[0]) > 1e-12 or abs(F[-1] - 1) > 1e-12:
                raise ValueError("table CDF must run from 0 to 1")
            object.__setattr__(self, "table", (tuple(z), tuple(F)))
            object.__setattr__(self, "lower", float(z[0]))
            object.__setattr__(self, "upper", float(z[-1]))
            w = np.diff(F)
            mid = 0.5 * (z[1:] + z[:-1])
            mean = float(np.sum(w * mid))
            var = float(np.sum(w * (np.diff(z) ** 2 / 12 + (mid - mean) ** 2)))
            object.__setattr__(self, "mean", mean)
            object.__setattr__(self, "sd", math.sqrt(var))
        _check_sd(self.sd)
        if self.lower >= self.upper:
            raise ValueError("empty support")
        if self.cov is not None:
            cov = np.array(self.cov, dtype=float)
            object.__setattr__(self, "cov", cov)

    @classmethod
    def uniform(cls, lower=0.0, upper=1.0):
        return cls(kind="uniform", lower=lower, upper=upper)

    @classmethod
    def normal(cls, mean=0.5, sd=1.0 / 6.0):
        return cls(kind="normal", mean=mean, sd=sd)

    @property
    def bounded(self) -> bool:
        return math.isfinite(self.lower) and math.isfinite(self.upper)

    @property
    def support(self) -> tuple[float, float]:
        return (self.lower, self.upper)

    def _tn_mass(self):
        a = special.ndtr((self.lower - self.mean) / self.sd)
        b = special.ndtr((self.upper - self.mean) / self.sd)
        return a, b

    def pdf(self, z):
        z = np.asarray(z, dtype=float)
        inside = (z >= self.lower) & (z <= self.upper)
        if self.kind == "normal":
            return norm_pdf(z, self.mean, self.sd)
        if self.kind == "uniform":
            return np.where(inside, 1.0 / (self.upper - self.lower), 0.0)
        if self.kind == "truncated-normal":
            a, b = self._tn_mass()
            return np.where(inside, norm_pdf(z, self.mean, self.sd) / (b - a), 0.0)
        zt, Ft = (np.asarray(t) for t in self.table)
        dens = np.diff(Ft) / np.diff(zt)
        idx = np.clip(np.searchsorted(zt, z, side="right") - 1, 0, len(dens) - 1)
        return np.where(inside, dens[idx], 0.0)

    def cdf(self, z):
        z = _check_finite(z, "z")
        if self.kind == "normal":
            out = special.ndtr((z - self.mean) / self.sd)
        elif self.kind == "uniform":
            out = np.clip((z - self.lower) / (self.upper - self.lower), 0.0, 1.0)
        elif self.kind == "truncated-normal":
            a, b = self._tn_mass()
            zc = np.clip(z, self.lower, self.upper)
            out = (special.ndtr((zc - self.mean) / self.sd) - a) / (b - a)
            out = np.clip(out, 0.0, 1.0)
        else:
            zt, Ft = self.table
            out = np.interp(z, zt, Ft)
        return out if out.ndim else float(out)

    def quantile(self, p):
        p = _check_finite(p, "p")
        if np.any((p < 0) | (p > 1)):
            raise DomainError("probabilities must lie in [0, 1]")
        if not self.bounded and np.any((p == 0) | (p == 1)):
            raise DomainError("p = 0 or 1 maps to an infinite quantile on unbounded support")
        if self.kind == "normal":
            out = self.mean + self.sd * special.ndtri(p)
        elif self.kind == "uniform":
            out = self.lower + p * (self.upper - self.lower)
        elif self.kind == "truncated-normal":
            a, b = self._tn_mass()
            out = self.mean + self.sd * special.ndtri(a + p * (b - a))
            out = np.clip(out, self.lower, self.upper)
        else:
            zt, Ft = self.table
            out = np.interp(p, Ft, zt)
        return out if out.ndim else float(out)

    def sample(self, rng: np.random.Generator, size):
        """Inverse-transform sampling."""
        u = rng.random(size)
        u = np.clip(u, 1e-16, 1 - 1e-16)
        return self.quantile(u)


def inverse_transform(column, model: NoiseModel):
    """Map a column of probabilities through the quantile function of ``model``."""
    column = np.asarray(column, dtype=float)
    return np.asarray(model.quantile(column), dtype=float)


def double_transform(column, model: NoiseModel, warp: BetaWarp):
    """Beta-warp the probabilities, then apply the noise quantile function."""
    return inverse_transform(beta_quantile(column, warp), model)


def sqrtm_spd(cov) -> np.ndarray:
    """Symmetric square root of an SPD matrix."""
    cov = np.asarray(cov, dtype=float)
    if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
        raise MatrixError("covariance must be square")
    if not np.allclose(cov, cov.T, rtol=0, atol=1e-12 * max(1.0, np.abs(cov).max())):
        raise MatrixError("covariance must be symmetric")
    w, V = np.linalg.eigh(0.5 * (cov + cov.T))
    if w.min() <= 0:
        raise MatrixError("covariance must be positive definite")
    return (V * np.sqrt(w)) @ V.T


def correlate_mvn(rows, cov, mean=None) -> np.ndarray:
    """Map rows of a unit-cube design to N(mean, cov) via ``cov^{1/2} Phi^{-1}(row)``."""
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    root = sqrtm_spd(cov)
    if rows.shape[1] != root.shape[0]:
        raise ValueError("row width does not match covariance dimension")
    out = norm_quantile(rows) @ root.T
    if mean is not None:
        out = out + np.asarray(mean, dtype=float)
    return out
