"""Quadrature engines for the exponential scale-mixture integrals.

Two integral families recur in this package:

* the radial mixing integral behind the multivariate-Laplace density,
      I(r) = int_0^inf (2 pi w v)^(-d/2) exp(-r^2 / (2 w v)) e^(-w) dw,
* normal-CDF mixtures of the form
      int_0^inf Phi(sqrt(w) x / c + s * c / (2 sqrt(w))) e^(-w) dw,  s = +/-1.

Both integrands develop boundary layers near w = 0 that defeat naive
Gauss-Laguerre rules, so each family gets a transformation tailored to it:
a log substitution with trapezoidal refinement for the first (the integrand
becomes doubly-exponentially decaying and entire), and Gauss-Legendre panels
refined at the analytically known transition scale for the second.
"""
from __future__ import annotations

import numpy as np
from scipy.special import logsumexp, ndtr, roots_legendre

from .errors import ParameterError

# upper cut for the e^{-w} weight; tail mass below 3e-20
_W_MAX = 45.0

_LEGENDRE_ORDER = 16
_LEGENDRE_REF = roots_legendre(_LEGENDRE_ORDER)

# panel edges around a Phi-argument crossing, in transition-width units
_LAYER_UNITS = np.array(
    [-60.0, -30.0, -15.0, -8.0, -5.0, -3.0, -2.0, -1.2, -0.6, 0.0,
     0.6, 1.2, 2.0, 3.0, 5.0, 8.0, 15.0, 30.0, 60.0]
)


def log_mixing_integral(r, d: int, variance: float, tol: float = 1e-12,
                        max_level: int = 6) -> np.ndarray:
    """log I(r) for the radial mixing integral, vectorized over radii r > 0.

    Substituting w = (r / sqrt(2 v)) e^t turns the integral into
    a^((2-d)/4) * int exp(nu t - z cosh t) dt with a = r^2/(2v), nu = (2-d)/2
    and z = 2 sqrt(a); the integrand is entire and decays like
    exp(-z e^|t| / 2), so the trapezoidal rule converges geometrically.
    The step is halved until two successive levels agree to `tol` in log.
    """
    r = np.asarray(r, dtype=float)
    if d < 1:
        raise ParameterError(f"dimension must be >= 1, got {d}")
    if variance <= 0:
        raise ParameterError(f"variance must be positive, got {variance}")
    if np.any(r <= 0):
        raise ParameterError("radii must be strictly positive")

    nu = (2.0 - d) / 2.0
    a = r * r / (2.0 * variance)
    z = 2.0 * np.sqrt(a)

    # range: need z (cosh T - 1) to exhaust double precision plus slack for
    # the cosh(nu t) growth
    zmin = float(np.min(z))
    t_max = float(np.arccosh((760.0 + abs(nu) * 60.0) / max(zmin, 1e-300) + 1.0)) + 1.0
    t_max = min(max(t_max, 4.0), 800.0)

    def log_terms(t):
        # symmetrized integrand 2 e^{-z cosh t} cosh(nu t), halved at t = 0
        zc = np.multiply.outer(z, np.cosh(t))
        lg = -zc + _log_cosh(nu * t)[None, :]
        return lg

    step = 0.5
    t = np.arange(0.0, t_max + step, step)
    lg = log_terms(t)
    lg[..., 0] -= np.log(2.0)
    log_j = logsumexp(lg, axis=-1) + np.log(step)
    for _ in range(max_level):
        mids = np.arange(step / 2.0, t_max + step / 2.0, step)
        log_mid = logsumexp(log_terms(mids), axis=-1)
        new = np.logaddexp(log_j - np.log(2.0), np.log(step / 2.0) + log_mid)
        step /= 2.0
        done = np.all(np.abs(new - log_j) <= tol * np.maximum(1.0, np.abs(new)))
        log_j = new
        if done:
            break
    log_j += np.log(2.0)  # fold in the mirrored t < 0 half

    return (-(d / 2.0) * np.log(2.0 * np.pi * variance)
            + ((2.0 - d) / 4.0) * np.log(a) + log_j)


def _log_cosh(x):
    x = np.abs(x)
    return x + np.log1p(np.exp(-2.0 * x)) - np.log(2.0)


def _panel_edges(x: float, c: float, sign: float) -> np.ndarray:
    """Panel edges on [0, W_MAX]; extra panels resolve the Phi transition.

    The argument sqrt(w) x/c + sign * c/(2 sqrt(w)) crosses zero at
    w* = c^2 / (2|x|) when x*sign < 0, with width ~ 6 c sqrt(w*) / |x|.
    """
    base = [np.geomspace(1e-10, _W_MAX, 30)]
    if x * sign < 0.0:
        wstar = c * c / (2.0 * abs(x))
        if wstar < 2.0 * _W_MAX:
            dw = 6.0 * c * np.sqrt(wstar) / abs(x)
            layer = wstar + dw * _LAYER_UNITS
            base.append(layer[(layer > 0.0) & (layer < _W_MAX)])
            lo_edge = wstar - 60.0 * dw
            if lo_edge > 1e-12:
                base.append(np.geomspace(lo_edge * 1e-4, lo_edge, 8))
    edges = np.concatenate([[0.0, _W_MAX]] + base)
    edges = edges[(edges >= 0.0) & (edges <= _W_MAX)]
    return np.unique(edges)


def phi_exponential_mixture(x, c: float, sign: float = 1.0) -> np.ndarray:
    """int_0^inf Phi(sqrt(w) x/c + sign * c/(2 sqrt(w))) e^{-w} dw.

    Vectorized over x; each point gets its own layer-refined panel set.
    Absolute accuracy is at the 1e-13 level (validated against the
    algebraic closed form over c in [0.05, 50] and |x| up to 1e7).
    """
    if c <= 0:
        raise ParameterError(f"c must be positive, got {c}")
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    if not np.all(np.isfinite(xs)):
        raise ParameterError("x must be finite")
    xr, wr = _LEGENDRE_REF
    out = np.empty(xs.shape, dtype=float)
    for i, xi in np.ndenumerate(xs):
        edges = _panel_edges(float(xi), c, sign)
        lo, hi = edges[:-1], edges[1:]
        mid = (lo + hi) / 2.0
        half = (hi - lo) / 2.0
        nodes = (mid[:, None] + half[:, None] * xr[None, :]).ravel()
        weights = (half[:, None] * wr[None, :]).ravel()
        sq = np.sqrt(nodes)
        arg = xi / c * sq + sign * c / (2.0 * sq)
        out[i] = float(np.sum(ndtr(arg) * weights * np.exp(-nodes)))
    return out if np.ndim(x) else float(out[()]if out.shape == () else out[0])
