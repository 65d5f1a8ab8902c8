"""Loss families, per-sample gradients, and weighted empirical risk.

Two families: plain/L1-penalized least squares and (unpenalized) binary
logistic regression with {0,1} labels.  The L1 subgradient (sign convention
sign(0) = 0) is data independent, so it is excluded from per-sample
gradients -- recombination matches the data part exactly -- and added
deterministically by :func:`mean_gradient`.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .errors import DimensionMismatch

LEAST_SQUARES = "least_squares"
LOGISTIC = "logistic"


@dataclass(frozen=True)
class Dataset:
    """N x d feature matrix plus length-N targets; immutable during optimization."""

    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "X", np.ascontiguousarray(self.X, dtype=np.float64))
        object.__setattr__(self, "y", np.ascontiguousarray(self.y, dtype=np.float64))

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def d(self):
        return self.X.shape[1]

    def validate(self, for_logistic=False):
        if self.X.ndim != 2 or self.y.ndim != 1:
            raise DimensionMismatch("X must be 2-d and y 1-d")
        if self.X.shape[0] != self.y.shape[0]:
            raise DimensionMismatch("X and y row counts differ")
        if self.n < 1 or self.d < 1:
            raise DimensionMismatch("need N >= 1 and d >= 1")
        if not (np.all(np.isfinite(self.X)) and np.all(np.isfinite(self.y))):
            raise ValueError("dataset contains non-finite entries")
        if for_logistic and not np.all((self.y == 0) | (self.y == 1)):
            raise ValueError("logistic targets must be in {0, 1}")


@dataclass(frozen=True)
class ModelSpec:
    family: str
    l1_lambda: float = 0.0

    def __post_init__(self):
        if self.family not in (LEAST_SQUARES, LOGISTIC):
            raise ValueError(f"unknown family {self.family!r}")
        if self.l1_lambda < 0:
            raise ValueError("l1_lambda must be nonnegative")

    @property
    def family_code(self):
        return 0 if self.family == LEAST_SQUARES else 1


def _check_theta(theta, d):
    theta = np.ascontiguousarray(theta, dtype=np.float64)
    if theta.shape != (d,):
        raise DimensionMismatch(f"theta must have shape ({d},), got {theta.shape}")
    return theta


def _gather(data, weights):
    if weights is None:
        return data.X, data.y, None
    sup = weights.support
    if sup.size and (sup.max() >= data.n or sup.min() < 0):
        raise DimensionMismatch("measure support indexes rows outside the dataset")
    return data.X[sup], data.y[sup], weights.weights


def _logistic_sample_losses(t, y):
    # y * softplus(-t) + (1 - y) * softplus(t) = softplus(t) - y * t,
    # stable for |t| up to ~700
    return np.logaddexp(0.0, t) - y * t


def loss(model, theta, data, weights=None):
    """Weighted empirical risk plus the L1 penalty (uniform if no weights)."""
    theta = _check_theta(theta, data.d)
    X, y, w = _gather(data, weights)
    t = X @ theta
    if model.family == LEAST_SQUARES:
        per = (t - y) ** 2
    else:
        per = _logistic_sample_losses(t, y)
    value = float(per.mean()) if w is None else float(per @ w)
    return value + model.l1_lambda * float(np.abs(theta).sum())


def logistic_curvature_bound(data):
    """Upper bound on v' H v for the logistic empirical risk:
    0.25 * lambda_max(X^T X / N), since sigmoid' <= 1/4."""
    second_moment = data.X.T @ data.X / data.n
    return 0.25 * float(np.linalg.eigvalsh(second_moment)[-1])


def gradient_scale(model, theta, data):
    """Per-sample scalar s_i with grad_i = s_i * x_i (data part only)."""
    theta = _check_theta(theta, data.d)
    t = data.X @ theta
    if model.family == LEAST_SQUARES:
        return 2.0 * (t - data.y)
    return expit(t) - data.y


def per_sample_gradient(model, theta, data, coords=None):
    """Row i is the gradient of the i-th sample loss at theta, restricted to
    ``coords``, excluding the (data-independent) L1 term."""
    theta = _check_theta(theta, data.d)
    cols = data.X if coords is None else data.X[:, coords]
    t = data.X @ theta
    if model.family == LEAST_SQUARES:
        scale = 2.0 * (t - data.y)
    else:
        scale = expit(t) - data.y
    return scale[:, None] * cols


def l1_subgradient(model, theta, coords=None):
    sub = model.l1_lambda * np.sign(theta)
    return sub if coords is None else sub[coords]


def mean_gradient(model, theta, data, weights=None, coords=None):
    """Weighted mean of per-sample gradients plus the L1 subgradient."""
    theta = _check_theta(theta, data.d)
    X, y, w = _gather(data, weights)
    cols = X if coords is None else X[:, coords]
    t = X @ theta
    if model.family == LEAST_SQUARES:
        scale = 2.0 * (t - y)
    else:
        scale = expit(t) - y
    if w is None:
        g = cols.T @ scale / X.shape[0]
    else:
        g = cols.T @ (scale * w)
    return g + l1_subgradient(model, theta, coords)


def risk_and_gradient(model, theta, data):
    """Full loss and full mean gradient from one forward pass."""
    theta = _check_theta(theta, data.d)
    t = data.X @ theta
    if model.family == LEAST_SQUARES:
        r = t - data.y
        value = float(r @ r) / data.n
        scale = 2.0 * r
    else:
        value = float(_logistic_sample_losses(t, data.y).mean())
        scale = expit(t) - data.y
    g = data.X.T @ scale / data.n + l1_subgradient(model, theta)
    value += model.l1_lambda * float(np.abs(theta).sum())
    return value, g
