"""Minibatch baselines: stochastic average gradients and ADAM.

Both draw uniform without-replacement batches from a seeded generator and
charge batch_size/N full-pass equivalents per step, so their traces are
comparable with the recombination optimizers under the same counting rule.
The recorded loss is the full empirical risk (instrumentation only).
"""

import math
import time
from dataclasses import dataclass

import numpy as np

from .errors import Diverged
from .models import l1_subgradient, loss, per_sample_gradient
from .trace import Trace


@dataclass(frozen=True)
class SGDConfig:
    learning_rate: float
    batch_size: int = 256
    it_max: int = 1_000
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps_stability: float = 1e-8

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError("betas must lie in [0, 1)")


def _check(loss_value, theta):
    if not math.isfinite(loss_value) or not np.all(np.isfinite(theta)):
        raise Diverged(f"non-finite loss {loss_value!r}")


def sag(model, data, config, theta0=None):
    """Stochastic average gradients with a per-sample gradient table.

    Each step refreshes the table rows of one batch at the current iterate
    and moves along the table average (plus the L1 subgradient).  The table
    starts at zero (cold start).
    """
    data.validate(for_logistic=model.family == "logistic")
    if config.batch_size > data.n:
        raise ValueError("batch_size exceeds the number of samples")
    rng = np.random.default_rng(config.seed)
    n, d = data.n, data.d
    theta = np.zeros(d) if theta0 is None else np.array(theta0, dtype=np.float64)
    table = np.zeros((n, d))
    table_sum = np.zeros(d)
    trace = Trace()
    t0 = time.perf_counter()
    fpe = 0.0
    for step in range(config.it_max):
        batch = rng.choice(n, size=config.batch_size, replace=False)
        sub = type(data)(data.X[batch], data.y[batch])
        rows = per_sample_gradient(model, theta, sub)
        table_sum += rows.sum(axis=0) - table[batch].sum(axis=0)
        table[batch] = rows
        g = table_sum / n + l1_subgradient(model, theta)
        theta = theta - config.learning_rate * g
        fpe += config.batch_size / n
        loss_value = loss(model, theta, data)
        _check(loss_value, theta)
        trace.append(
            step + 1, loss_value, math.nan, fpe, time.perf_counter() - t0, 0, theta
        )
    return trace


def adam(model, data, config, theta0=None):
    """ADAM on minibatch gradients of the full objective (L1 included)."""
    data.validate(for_logistic=model.family == "logistic")
    if config.batch_size > data.n:
        raise ValueError("batch_size exceeds the number of samples")
    rng = np.random.default_rng(config.seed)
    n, d = data.n, data.d
    theta = np.zeros(d) if theta0 is None else np.array(theta0, dtype=np.float64)
    m = np.zeros(d)
    v = np.zeros(d)
    trace = Trace()
    t0 = time.perf_counter()
    fpe = 0.0
    for step in range(1, config.it_max + 1):
        batch = rng.choice(n, size=config.batch_size, replace=False)
        sub = type(data)(data.X[batch], data.y[batch])
        g = per_sample_gradient(model, theta, sub).mean(axis=0)
        g = g + l1_subgradient(model, theta)
        m = config.beta1 * m + (1.0 - config.beta1) * g
        v = config.beta2 * v + (1.0 - config.beta2) * g * g
        m_hat = m / (1.0 - config.beta1**step)
        v_hat = v / (1.0 - config.beta2**step)
        theta = theta - config.learning_rate * m_hat / (np.sqrt(v_hat) + config.eps_stability)
        fpe += config.batch_size / n
        loss_value = loss(model, theta, data)
        _check(loss_value, theta)
        trace.append(step, loss_value, math.nan, fpe, time.perf_counter() - t0, 0, theta)
    return trace
