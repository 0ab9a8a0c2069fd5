"""Trade-off functions, their large-dimension limits, and budget calibration.

Naming note: the mixture zero-probability is `zero_mass` and the DP budget
slack is `delta_dp` everywhere, including file formats; the two are never
interchangeable.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .distributions import laplace_cdf, laplace_quantile, sl_log_density_radial
from .errors import InfeasibleError, InferenceError, ParameterError
from .quadrature import phi_exponential_mixture
from .rng import RngStream

DEFAULT_ALPHA_GRID = np.round(np.linspace(0.0, 1.0, 1001), 3)


@dataclass(frozen=True)
class PrivacyBudget:
    epsilon: float
    delta_dp: float

    def __post_init__(self):
        if not (self.epsilon >= 0.0 and np.isfinite(self.epsilon)):
            raise ParameterError(f"epsilon must be finite and >= 0, got {self.epsilon}")
        if not (0.0 <= self.delta_dp < 1.0):
            raise ParameterError(f"delta_dp must lie in [0,1), got {self.delta_dp}")


@dataclass
class TradeoffCurve:
    """Sampled trade-off function alpha -> beta on a sorted alpha grid."""

    alphas: np.ndarray
    betas: np.ndarray
    label: str = ""
    mc_std_err: np.ndarray | None = field(default=None)

    def __post_init__(self):
        self.alphas = np.asarray(self.alphas, dtype=float)
        self.betas = np.asarray(self.betas, dtype=float)
        if self.mc_std_err is not None:
            self.mc_std_err = np.asarray(self.mc_std_err, dtype=float)
        self.validate()

    def validate(self, atol: float = 1e-9):
        a, b = self.alphas, self.betas
        if a.shape != b.shape or a.ndim != 1:
            raise ParameterError("alphas and betas must be aligned 1-d arrays")
        if np.any(np.diff(a) <= 0) or a[0] < -atol or a[-1] > 1 + atol:
            raise ParameterError("alphas must be strictly increasing within [0,1]")
        if np.any(b < -atol) or np.any(b > 1 + atol):
            raise ParameterError("betas must lie in [0,1]")
        if np.any(np.diff(b) > atol):
            raise ParameterError("betas must be non-increasing in alpha")
        if np.any(b > 1 - a + atol):
            raise ParameterError("a trade-off curve satisfies beta <= 1 - alpha")

    def interpolate(self, alpha) -> np.ndarray:
        return np.interp(np.asarray(alpha, dtype=float), self.alphas, self.betas)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            self.write_csv(fh)

    def write_csv(self, fh):
        w = csv.writer(fh)
        w.writerow(["alpha", "beta", "stderr", "label"])
        se = self.mc_std_err
        for i, (a, b) in enumerate(zip(self.alphas, self.betas)):
            w.writerow([repr(float(a)), repr(float(b)),
                        "" if se is None else repr(float(se[i])), self.label])

    @classmethod
    def from_csv(cls, path) -> "TradeoffCurve":
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        alphas = np.array([float(r["alpha"]) for r in rows])
        betas = np.array([float(r["beta"]) for r in rows])
        ses = [r["stderr"] for r in rows]
        se = None if all(s == "" for s in ses) else np.array([float(s) for s in ses])
        label = rows[0]["label"] if rows else ""
        return cls(alphas, betas, label, se)


def f_eps_delta(alpha, budget: PrivacyBudget):
    """Piecewise-linear trade-off envelope of an (epsilon, delta_dp) budget."""
    a = np.asarray(alpha, dtype=float)
    if np.any((a < 0) | (a > 1)):
        raise ParameterError("alpha must lie in [0,1]")
    eps, dd = budget.epsilon, budget.delta_dp
    val = np.maximum.reduce([
        np.zeros_like(a),
        1.0 - dd - np.exp(eps) * a,
        np.exp(-eps) * (1.0 - dd - a),
    ])
    return val if val.ndim else float(val)


def _beta_from_h(h, c: float):
    """Closed form of the limiting type-II error in terms of h = F_c^{-1}(1-alpha)/c."""
    h = np.asarray(h, dtype=float)
    rt = np.sqrt(2.0 + h * h)
    # s = h + sqrt(2+h^2), computed stably for very negative h
    s = np.where(h >= 0.0, h + rt, 2.0 / (rt - h))
    out = 1.0 / (1.0 + 2.0 / (s * s)) * np.exp(-c / s)
    return out if out.ndim else float(out)


def F_c(x, c: float):
    """CDF of c X1 W^{-1/2} - c^2 (2W)^{-1}, evaluated through its
    normal-mixture integral representation."""
    return phi_exponential_mixture(x, c, sign=1.0)


def _closed_quantile_guess(p: float, c: float) -> float:
    """Quantile guess from the algebraic closed form of F_c."""
    g = lambda h: _beta_from_h(h, c) - (1.0 - p)
    lo, hi = -1.0, 1.0
    for _ in range(200):
        if g(lo) < 0:
            break
        lo *= 2.0
    for _ in range(200):
        if g(hi) > 0:
            break
        hi *= 2.0
    h0 = brentq(g, lo, hi, xtol=1e-12, rtol=8.9e-16)
    return -c * h0


def F_c_inverse(p: float, c: float, tol: float = 1e-10) -> float:
    """Quantile of F_c by bracketed root-finding on the monotone CDF."""
    if c <= 0:
        raise ParameterError(f"c must be positive, got {c}")
    if not (0.0 < p < 1.0):
        _raise_quantile_domain(p)
    guess = _closed_quantile_guess(p, c)
    width = 1e-3 * (1.0 + abs(guess))
    lo, hi = guess - width, guess + width
    # expand by doubling until the bracket straddles the root
    for _ in range(200):
        if F_c(lo, c) <= p:
            break
        lo -= (hi - lo)
    for _ in range(200):
        if F_c(hi, c) >= p:
            break
        hi += (hi - lo)
    x = brentq(lambda t: F_c(t, c) - p, lo, hi, xtol=1e-13, rtol=8.9e-16)
    if abs(F_c(x, c) - p) > tol:
        raise InferenceError(f"quantile iteration stalled at p={p}, c={c}")
    return float(x)


def _raise_quantile_domain(p):
    from .errors import DomainError

    raise DomainError(f"the quantile is infinite at p={p}; need p in (0,1)")


def beta_c(alpha, c: float, consistency_tol: float = 1e-6):
    """Limiting trade-off function.

    Evaluates the defining normal-mixture integral and cross-checks it
    against the closed form in h; disagreement beyond `consistency_tol`
    raises, since the two routes share no code path.
    """
    if c <= 0:
        raise ParameterError(f"c must be positive, got {c}")
    a = np.atleast_1d(np.asarray(alpha, dtype=float))
    if np.any((a < 0) | (a > 1)):
        raise ParameterError("alpha must lie in [0,1]")
    out = np.empty_like(a)
    interior = (a > 0) & (a < 1)
    out[a <= 0] = 1.0
    out[a >= 1] = 0.0
    if np.any(interior):
        xq = np.array([F_c_inverse(1.0 - ai, c) for ai in a[interior]])
        integral = phi_exponential_mixture(xq, c, sign=-1.0)
        closed = _beta_from_h(xq / c, c)
        gap = float(np.max(np.abs(integral - closed)))
        if gap > consistency_tol:
            raise InferenceError(
                f"beta integral and closed form disagree by {gap:.2e} at c={c}"
            )
        out[interior] = integral
    return out if np.ndim(alpha) else float(out[0])


def beta_c_closed_form(alpha, c: float):
    """Closed-form route to beta_c (shares only the quantile computation)."""
    a = np.atleast_1d(np.asarray(alpha, dtype=float))
    out = np.empty_like(a)
    out[a <= 0] = 1.0
    out[a >= 1] = 0.0
    interior = (a > 0) & (a < 1)
    if np.any(interior):
        xq = np.array([F_c_inverse(1.0 - ai, c) for ai in a[interior]])
        out[interior] = _beta_from_h(xq / c, c)
    return out if np.ndim(alpha) else float(out[0])


def beta_c_delta(alpha, c: float, zero_mass: float):
    """Zero-inflation shrink of the limiting trade-off function."""
    if not (0.0 < zero_mass < 1.0):
        raise ParameterError(f"zero_mass must lie in (0,1), got {zero_mass}")
    a = np.atleast_1d(np.asarray(alpha, dtype=float))
    if np.any((a < 0) | (a > 1)):
        raise ParameterError("alpha must lie in [0,1]")
    out = np.zeros_like(a)
    keep = a <= 1.0 - zero_mass
    if np.any(keep):
        out[keep] = (1.0 - zero_mass) * beta_c(a[keep] / (1.0 - zero_mass), c)
    return out if np.ndim(alpha) else float(out[0])


def t1c_closed_form(alpha, c: float):
    """Exact one-dimensional trade-off F_Lap(F_Lap^{-1}(1-alpha) - sqrt(2) c)."""
    if c <= 0:
        raise ParameterError(f"c must be positive, got {c}")
    a = np.atleast_1d(np.asarray(alpha, dtype=float))
    if np.any((a < 0) | (a > 1)):
        raise ParameterError("alpha must lie in [0,1]")
    out = np.empty_like(a)
    out[a <= 0] = 1.0
    out[a >= 1] = 0.0
    interior = (a > 0) & (a < 1)
    if np.any(interior):
        out[interior] = laplace_cdf(laplace_quantile(1.0 - a[interior]) - np.sqrt(2.0) * c)
    return out if np.ndim(alpha) else float(out[0])


def _log_likelihood_ratio(samples: np.ndarray, d: int, c: float,
                          chunk: int = 50_000) -> np.ndarray:
    """log f(s - c e1) - log f(s) for SL_d(I_d), streamed in chunks."""
    shifted = samples.copy()
    shifted[:, 0] -= c
    r0 = np.linalg.norm(samples, axis=1)
    r1 = np.linalg.norm(shifted, axis=1)
    out = np.empty(len(samples))
    for i in range(0, len(samples), chunk):
        sl = slice(i, i + chunk)
        out[sl] = (sl_log_density_radial(r1[sl], d, 1.0)
                   - sl_log_density_radial(r0[sl], d, 1.0))
    return out


def _lower_convex_hull(a: np.ndarray, b: np.ndarray):
    """Lower hull of the staircase vertices (a increasing, b decreasing):
    the trade-off of the randomized likelihood-ratio tests."""
    hull_a, hull_b = [a[0]], [b[0]]
    for x, y in zip(a[1:], b[1:]):
        while len(hull_a) >= 2:
            x1, y1 = hull_a[-2], hull_b[-2]
            x2, y2 = hull_a[-1], hull_b[-1]
            # drop the middle point if it lies above the chord
            if (y2 - y1) * (x - x1) >= (y - y1) * (x2 - x1):
                hull_a.pop()
                hull_b.pop()
            else:
                break
        hull_a.append(x)
        hull_b.append(y)
    return np.array(hull_a), np.array(hull_b)


def empirical_tradeoff(d: int, c: float, n_sim: int, rng: RngStream,
                       alphas: np.ndarray | None = None,
                       label: str | None = None) -> TradeoffCurve:
    """Monte-Carlo trade-off curve of the most powerful test between
    SL_d(I_d) and its shift by (c, 0, ..., 0)."""
    from .distributions import sample_sl

    if c <= 0:
        raise ParameterError(f"c must be positive, got {c}")
    if n_sim < 10_000:
        raise ParameterError(f"n_sim must be at least 1e4, got {n_sim}")
    if alphas is None:
        alphas = DEFAULT_ALPHA_GRID
    shift = np.zeros(d)
    shift[0] = c
    sp = sample_sl(d, 1.0, n_sim, rng.child(0))
    sq = sample_sl(d, 1.0, n_sim, rng.child(1)) + shift
    lp = _log_likelihood_ratio(sp, d, c)
    lq = _log_likelihood_ratio(sq, d, c)

    vals = np.concatenate([lp, lq])
    is_p = np.concatenate([np.ones(n_sim, dtype=bool), np.zeros(n_sim, dtype=bool)])
    order = np.argsort(-vals, kind="stable")
    vals, is_p = vals[order], is_p[order]

    # vertices after each distinct threshold, descending; ties move diagonally
    edges = np.nonzero(np.diff(vals))[0]
    cuts = np.concatenate([edges + 1, [len(vals)]])
    cp = np.cumsum(is_p)
    cq = np.cumsum(~is_p)
    a_pts = cp[cuts - 1] / n_sim
    b_pts = 1.0 - cq[cuts - 1] / n_sim
    # anchor at the exact trivial-test endpoints; vertices at a = 0 below
    # (0, 1) are the usual plug-in endpoint artifact of a finite P sample
    keep = a_pts > 0.0
    a_pts = np.concatenate([[0.0], a_pts[keep]])
    b_pts = np.concatenate([[1.0], b_pts[keep]])
    ha, hb = _lower_convex_hull(a_pts, b_pts)

    betas = np.interp(alphas, ha, hb)
    # delta-method error of reading the curve at fixed alpha; at a kink take
    # the steeper of the adjacent hull slopes
    seg_slope = np.abs(np.diff(hb) / np.maximum(np.diff(ha), 1e-12))
    idx = np.clip(np.searchsorted(ha, alphas, side="left") - 1, 0, len(seg_slope) - 1)
    idx_r = np.clip(idx + 1, 0, len(seg_slope) - 1)
    slopes = np.maximum(seg_slope[idx], seg_slope[idx_r])
    se = np.sqrt(betas * (1 - betas) / n_sim
                 + slopes**2 * alphas * (1 - alphas) / n_sim)
    if label is None:
        label = f"empirical-T-d{d}-c{c:g}"
    return TradeoffCurve(alphas, betas, label, se)


def tradeoff_shrink(curve: TradeoffCurve, zero_mass: float) -> TradeoffCurve:
    """Apply the zero-inflation shrink map to a sampled curve."""
    if not (0.0 < zero_mass < 1.0):
        raise ParameterError(f"zero_mass must lie in (0,1), got {zero_mass}")
    a = curve.alphas
    keep = a <= 1.0 - zero_mass
    betas = np.zeros_like(a)
    betas[keep] = (1.0 - zero_mass) * curve.interpolate(a[keep] / (1.0 - zero_mass))
    se = None
    if curve.mc_std_err is not None:
        se = np.zeros_like(a)
        se[keep] = (1.0 - zero_mass) * np.interp(
            a[keep] / (1.0 - zero_mass), curve.alphas, curve.mc_std_err)
    return TradeoffCurve(a, betas, f"{curve.label}-shrunk-{zero_mass:g}", se)


def delta_profile(c: float, epsilon: float) -> float:
    """delta_dp(epsilon) profile of the limiting trade-off function."""
    if c <= 0:
        raise ParameterError(f"c must be positive, got {c}")
    if epsilon < 0:
        raise ParameterError(f"epsilon must be >= 0, got {epsilon}")
    val = (1.0 - np.exp(epsilon) * (1.0 - F_c(epsilon, c))
           - _beta_from_h(epsilon / c, c))
    return float(min(max(val, 0.0), 1.0 - 1e-16))


def delta_profile_zil(c: float, epsilon: float, zero_mass: float) -> float:
    """Profile after zero-inflation: 1 - (1-zero_mass)(1 - delta_c(epsilon))."""
    if not (0.0 < zero_mass < 1.0):
        raise ParameterError(f"zero_mass must lie in (0,1), got {zero_mass}")
    return float(1.0 - (1.0 - zero_mass) * (1.0 - delta_profile(c, epsilon)))


def calibrate(target: PrivacyBudget, zero_mass: float, support, mode: str,
              tol: float = 1e-6) -> tuple[float, float]:
    """Solve for the trade-off scale c' meeting the budget, then convert it
    to the noise scale via the relevant support diameter.

    Returns (c_prime, lambda). A solution exists iff zero_mass < delta_dp.
    """
    from .mechanism import diam_attribute, diam_individual

    if not (0.0 < zero_mass < 1.0):
        raise ParameterError(f"zero_mass must lie in (0,1), got {zero_mass}")
    mode = mode.lower()
    if mode not in ("adp", "dp"):
        raise ParameterError(f"mode must be 'adp' or 'dp', got {mode!r}")
    if zero_mass >= target.delta_dp:
        raise InfeasibleError(
            f"no calibration exists: requires zero_mass < delta_dp "
            f"(got zero_mass={zero_mass}, delta_dp={target.delta_dp})"
        )
    g = lambda c: delta_profile_zil(c, target.epsilon, zero_mass) - target.delta_dp
    lo, hi = 1e-6, 1.0
    for _ in range(80):
        if g(hi) >= 0:
            break
        hi *= 2.0
    else:
        raise InferenceError("calibration bracket expansion failed")
    c_prime = brentq(g, lo, hi, xtol=min(tol, 1e-9))
    diam = diam_attribute(support) if mode == "adp" else diam_individual(support)
    return float(c_prime), float(diam / c_prime)
