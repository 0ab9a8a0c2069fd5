"""Samplers and densities for the building-block distributions.

The symmetric multivariate Laplace (SL) law used throughout is the normal
scale mixture sqrt(W) * N(0, Sigma) with W ~ Exp(1); its zero-inflated
variant (ZIL) replaces the draw by the zero vector with a fixed probability.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr, ndtri

from .errors import DomainError, ParameterError
from .quadrature import log_mixing_integral
from .rng import RngStream


@dataclass(frozen=True)
class NoiseParams:
    """Privacy pair of the zero-inflated Laplace noise.

    zero_mass: probability of releasing a record unperturbed.
    scale: noise scale lambda; nonzero rows receive SL noise with
    per-coordinate variance scale**2.
    """

    zero_mass: float
    scale: float

    def __post_init__(self):
        if not (0.0 < self.zero_mass < 1.0):
            raise ParameterError(f"zero_mass must lie in (0,1), got {self.zero_mass}")
        if not (self.scale > 0.0 and np.isfinite(self.scale)):
            raise ParameterError(f"scale must be positive and finite, got {self.scale}")


def _check_counts(d: int, n: int):
    if d < 1:
        raise ParameterError(f"dimension must be >= 1, got {d}")
    if n < 1:
        raise ParameterError(f"sample count must be >= 1, got {n}")


def sample_sl(d: int, variance: float, n: int, rng: RngStream) -> np.ndarray:
    """n i.i.d. rows from the symmetric multivariate Laplace with covariance
    variance * I_d, generated as sqrt(W) X with W ~ Exp(1), X ~ N(0, variance I)."""
    _check_counts(d, n)
    if variance <= 0:
        raise ParameterError(f"variance must be positive, got {variance}")
    g = rng.generator()
    w = g.exponential(size=n)
    x = g.standard_normal((n, d)) * np.sqrt(variance)
    return np.sqrt(w)[:, None] * x


def sample_zil(d: int, params: NoiseParams, n: int, rng: RngStream) -> np.ndarray:
    """n i.i.d. zero-inflated SL rows: the zero vector with probability
    zero_mass, otherwise an SL(scale^2 I_d) draw. The zero event is shared
    across the whole row."""
    _check_counts(d, n)
    g = rng.generator()
    w = g.exponential(size=n)
    x = g.standard_normal((n, d)) * params.scale
    s = np.sqrt(w)[:, None] * x
    keep = g.random(n) >= params.zero_mass
    return s * keep[:, None]


def sl_log_density_radial(r, d: int, variance: float) -> np.ndarray:
    """Log SL density as a function of the radius ||x||, vectorized.

    Evaluated through the one-dimensional mixing integral over the
    exponential scale variable, not the Bessel closed form.
    """
    r = np.asarray(r, dtype=float)
    if np.any(r == 0.0):
        if d >= 2:
            raise DomainError(
                "the SL density is singular at x = 0 for d >= 2; "
                "refusing to evaluate at the singularity"
            )
        # d = 1 at the origin: Laplace(sqrt(variance/2)) peak
        out = np.where(r == 0.0, -0.5 * np.log(2.0 * variance), np.nan)
        pos = r > 0
        if np.any(pos):
            out = np.array(out, dtype=float)
            out[pos] = log_mixing_integral(r[pos], d, variance)
        return out
    return log_mixing_integral(r, d, variance)


def sl_log_density(x, variance: float) -> float:
    """Log density of SL_d(variance * I_d) at the point x (d inferred from x)."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ParameterError("x must be a flat coordinate vector")
    if not np.all(np.isfinite(x)):
        raise ParameterError("x must be finite")
    if variance <= 0:
        raise ParameterError(f"variance must be positive, got {variance}")
    d = x.shape[0]
    r = float(np.linalg.norm(x))
    return float(sl_log_density_radial(np.array([r]), d, variance)[0])


def sample_truncated_normal(lower, upper, n: int, rng: RngStream) -> np.ndarray:
    """Coordinate-wise standard normals truncated to [lower_j, upper_j],
    sampled by inverse CDF (exact and rejection-free)."""
    lower = np.atleast_1d(np.asarray(lower, dtype=float))
    upper = np.atleast_1d(np.asarray(upper, dtype=float))
    if lower.shape != upper.shape:
        raise ParameterError("lower and upper must have matching shapes")
    if np.any(lower >= upper):
        raise ParameterError("truncation interval is empty: need lower < upper")
    _check_counts(lower.size, n)
    g = rng.generator()
    plo, phi = ndtr(lower), ndtr(upper)
    u = g.random((n, lower.size))
    return ndtri(plo[None, :] + u * (phi - plo)[None, :])


def laplace_cdf(t) -> np.ndarray:
    """CDF of the standard Laplace L(1)."""
    t = np.asarray(t, dtype=float)
    out = np.where(t < 0, 0.5 * np.exp(np.minimum(t, 0.0)),
                   1.0 - 0.5 * np.exp(-np.maximum(t, 0.0)))
    return out if out.ndim else float(out)


def laplace_quantile(p) -> np.ndarray:
    """Quantile of the standard Laplace L(1); exact inverse of laplace_cdf."""
    p = np.asarray(p, dtype=float)
    if np.any((p <= 0.0) | (p >= 1.0)):
        raise ParameterError("laplace_quantile requires p in (0,1)")
    out = np.where(p < 0.5, np.log(2.0 * p), -np.log(2.0 * (1.0 - p)))
    return out if out.ndim else float(out)
