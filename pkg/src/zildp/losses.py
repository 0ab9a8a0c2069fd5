"""Loss functions and the corrected-loss constructions.

A LossSpec evaluates row-wise over a batch: `features` holds the private
(noised) columns, `publics` the untouched ones. For the regression losses
the first public column is the response and any further public columns are
extra covariates; coefficients are ordered [private features..., extra
public covariates...]. Second-derivative corrections only ever sum over the
private coordinates, because only those were perturbed.
"""
from __future__ import annotations

import numpy as np
from scipy.special import expit

from .errors import CapabilityError, ParameterError

NONSMOOTH = "nonsmooth"
TWICE_DIFFERENTIABLE = "twice_differentiable_in_x"


def _as_publics(publics, n):
    if publics is None:
        return np.empty((n, 0))
    publics = np.asarray(publics, dtype=float)
    if publics.ndim == 1:
        publics = publics[:, None]
    return publics


class LossSpec:
    """Row-wise loss with subgradients in theta and optional x-Laplacian."""

    name: str = "loss"
    smoothness: str = NONSMOOTH
    # the signed DRCL combination of a convex loss is generally nonconvex
    possibly_nonconvex_drcl: bool = True

    def n_params(self, d_masked: int, n_publics: int) -> int:
        raise NotImplementedError

    def value(self, features, publics, theta) -> np.ndarray:
        raise NotImplementedError

    def subgrad_theta(self, features, publics, theta) -> np.ndarray:
        raise NotImplementedError

    def x_laplacian(self, features, publics, theta) -> np.ndarray:
        raise CapabilityError(
            f"loss {self.name!r} is {self.smoothness} and provides no "
            f"x_laplacian; the SL and smoothed corrections need a loss that "
            f"is twice differentiable in x"
        )

    def x_laplacian_grad_theta(self, features, publics, theta) -> np.ndarray:
        raise CapabilityError(
            f"loss {self.name!r} provides no x_laplacian_grad_theta"
        )


class ScalarTransformLoss(LossSpec):
    """(theta - g(x))^2 for a scalar transform g; nonsmooth in x."""

    def __init__(self, name, transform):
        self.name = name
        self._g = transform

    def n_params(self, d_masked, n_publics):
        if d_masked != 1:
            raise ParameterError(f"{self.name} expects a single private column")
        return 1

    def value(self, features, publics, theta):
        x = np.asarray(features, dtype=float).reshape(-1)
        return (theta[0] - self._g(x)) ** 2

    def subgrad_theta(self, features, publics, theta):
        x = np.asarray(features, dtype=float).reshape(-1)
        return (2.0 * (theta[0] - self._g(x)))[:, None]


class QuantileLoss(LossSpec):
    """Univariate location check loss (x - theta)(tau - 1{x - theta < 0})."""

    def __init__(self, tau):
        if not (0.0 < tau < 1.0):
            raise ParameterError(f"tau must lie in (0,1), got {tau}")
        self.tau = float(tau)
        self.name = f"quantile:{tau:g}"

    def n_params(self, d_masked, n_publics):
        if d_masked != 1:
            raise ParameterError("quantile loss expects a single private column")
        return 1

    def value(self, features, publics, theta):
        r = np.asarray(features, dtype=float).reshape(-1) - theta[0]
        return r * (self.tau - (r < 0))

    def subgrad_theta(self, features, publics, theta):
        # 1{r<0} is taken as 0 at r = 0 (strict inequality convention)
        r = np.asarray(features, dtype=float).reshape(-1) - theta[0]
        return (-(self.tau - (r < 0)).astype(float))[:, None]


class _RegressionLoss(LossSpec):
    """Shared plumbing: linear predictor over private + extra public columns."""

    has_linear_predictor = True

    def n_params(self, d_masked, n_publics):
        if n_publics < 1:
            raise ParameterError(f"{self.name} needs the response as publics[:, 0]")
        return d_masked + (n_publics - 1)

    @staticmethod
    def _split(features, publics, theta):
        X = np.asarray(features, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        P = _as_publics(publics, X.shape[0])
        y = P[:, 0]
        extras = P[:, 1:]
        dm = X.shape[1]
        u = X @ theta[:dm] + (extras @ theta[dm:] if extras.shape[1] else 0.0)
        return X, y, extras, u, dm

    @staticmethod
    def _design(X, extras):
        return np.hstack([X, extras]) if extras.shape[1] else X


class LogisticLoss(_RegressionLoss):
    name = "logistic"
    smoothness = TWICE_DIFFERENTIABLE

    def value(self, features, publics, theta):
        X, y, extras, u, _ = self._split(features, publics, theta)
        return (1.0 - y) * u + np.logaddexp(0.0, -u)

    def subgrad_theta(self, features, publics, theta):
        X, y, extras, u, _ = self._split(features, publics, theta)
        return self._design(X, extras) * (expit(u) - y)[:, None]

    def x_laplacian(self, features, publics, theta):
        X, y, extras, u, dm = self._split(features, publics, theta)
        q = float(theta[:dm] @ theta[:dm])
        s = expit(u)
        return s * (1.0 - s) * q

    def x_laplacian_grad_theta(self, features, publics, theta):
        X, y, extras, u, dm = self._split(features, publics, theta)
        q = float(theta[:dm] @ theta[:dm])
        s = expit(u)
        sp = s * (1.0 - s)
        out = self._design(X, extras) * (sp * (1.0 - 2.0 * s) * q)[:, None]
        out[:, :dm] += 2.0 * np.outer(sp, theta[:dm])
        return out


class LinearSquaredLoss(_RegressionLoss):
    name = "linear"
    smoothness = TWICE_DIFFERENTIABLE

    def value(self, features, publics, theta):
        X, y, extras, u, _ = self._split(features, publics, theta)
        return (y - u) ** 2

    def subgrad_theta(self, features, publics, theta):
        X, y, extras, u, _ = self._split(features, publics, theta)
        return self._design(X, extras) * (-2.0 * (y - u))[:, None]

    def x_laplacian(self, features, publics, theta):
        X, y, extras, u, dm = self._split(features, publics, theta)
        return np.full(X.shape[0], 2.0 * float(theta[:dm] @ theta[:dm]))

    def x_laplacian_grad_theta(self, features, publics, theta):
        X, y, extras, u, dm = self._split(features, publics, theta)
        out = np.zeros((X.shape[0], len(theta)))
        out[:, :dm] = 4.0 * theta[:dm]
        return out


class CheckLoss(_RegressionLoss):
    """Regression check loss rho_tau(y - u)."""

    def __init__(self, tau):
        if not (0.0 < tau < 1.0):
            raise ParameterError(f"tau must lie in (0,1), got {tau}")
        self.tau = float(tau)
        self.name = f"check:{tau:g}"

    def value(self, features, publics, theta):
        X, y, extras, u, _ = self._split(features, publics, theta)
        r = y - u
        return r * (self.tau - (r < 0))

    def subgrad_theta(self, features, publics, theta):
        X, y, extras, u, _ = self._split(features, publics, theta)
        r = y - u
        w = -(self.tau - (r < 0).astype(float))
        return self._design(X, extras) * w[:, None]


_BUILTINS = {
    "mean-relu": lambda: ScalarTransformLoss("mean-relu", lambda x: np.maximum(x, 0.0)),
    "mean-indicator": lambda: ScalarTransformLoss(
        "mean-indicator", lambda x: ((x >= 0.5) & (x <= 1.0)).astype(float)),
    "mean-abssin": lambda: ScalarTransformLoss(
        "mean-abssin", lambda x: np.abs(np.sin(2.0 * np.pi * x))),
    "logistic": LogisticLoss,
    "linear": LinearSquaredLoss,
}


def make_loss(name: str) -> LossSpec:
    """Loss lookup by CLI name: mean-relu | mean-indicator | mean-abssin |
    logistic | linear | check:<tau> | quantile:<tau>."""
    key = name.strip().lower()
    if key in _BUILTINS:
        return _BUILTINS[key]()
    if ":" in key:
        kind, _, arg = key.partition(":")
        try:
            tau = float(arg)
        except ValueError:
            raise ParameterError(f"bad tau in loss spec {name!r}") from None
        if kind == "check":
            return CheckLoss(tau)
        if kind == "quantile":
            return QuantileLoss(tau)
    raise ParameterError(
        f"unknown loss {name!r}; expected one of "
        f"{sorted(_BUILTINS)} or check:<tau> / quantile:<tau>"
    )


# ---------------------------------------------------------------------------
# corrected-loss constructions


def _check_zero_mass(zero_mass):
    if not (0.0 < zero_mass <= 1.0):
        raise ParameterError(f"zero_mass must lie in (0,1], got {zero_mass}")


def drcl_value(loss, x1_rows, x2_rows, publics, theta, zero_mass):
    """Signed affine combination that is unbiased for the clean loss:
    (1 - 1/zero_mass) * loss(x2) + (1/zero_mass) * loss(x1)."""
    _check_zero_mass(zero_mass)
    w2 = 1.0 - 1.0 / zero_mass
    return (w2 * loss.value(x2_rows, publics, theta)
            + loss.value(x1_rows, publics, theta) / zero_mass)


def drcl_subgrad(loss, x1_rows, x2_rows, publics, theta, zero_mass):
    _check_zero_mass(zero_mass)
    w2 = 1.0 - 1.0 / zero_mass
    return (w2 * loss.subgrad_theta(x2_rows, publics, theta)
            + loss.subgrad_theta(x1_rows, publics, theta) / zero_mass)


def sl_corrected_value(loss, x2_rows, publics, theta, scale):
    """loss(x2) - (scale^2 / 2) * sum_k d2 loss / dx_k^2 over private coords."""
    if scale < 0:
        raise ParameterError(f"scale must be >= 0, got {scale}")
    v = loss.value(x2_rows, publics, theta)
    if scale == 0.0:
        return v
    return v - 0.5 * scale**2 * loss.x_laplacian(x2_rows, publics, theta)


def sl_corrected_subgrad(loss, x2_rows, publics, theta, scale):
    g = loss.subgrad_theta(x2_rows, publics, theta)
    if scale == 0.0:
        return g
    return g - 0.5 * scale**2 * loss.x_laplacian_grad_theta(x2_rows, publics, theta)


def sdrcl_value(loss, x1_rows, x2_rows, publics, theta, zero_mass, scale):
    """loss(x1) - ((1 - zero_mass) scale^2 / 2) * Laplacian at x2."""
    _check_zero_mass(zero_mass)
    if scale < 0:
        raise ParameterError(f"scale must be >= 0, got {scale}")
    k = 0.5 * (1.0 - zero_mass) * scale**2
    v = loss.value(x1_rows, publics, theta)
    if k == 0.0:
        return v
    return v - k * loss.x_laplacian(x2_rows, publics, theta)


def sdrcl_subgrad(loss, x1_rows, x2_rows, publics, theta, zero_mass, scale):
    _check_zero_mass(zero_mass)
    k = 0.5 * (1.0 - zero_mass) * scale**2
    g = loss.subgrad_theta(x1_rows, publics, theta)
    if k == 0.0:
        return g
    return g - k * loss.x_laplacian_grad_theta(x2_rows, publics, theta)
