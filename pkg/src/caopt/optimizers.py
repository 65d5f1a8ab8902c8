"""Full gradient descent and its recombination-accelerated variant.

The accelerated loop alternates full-measure anchor steps with long runs of
cheap steps on a reduced measure whose atoms were chosen to match the mean
gradient at the anchor.  A quadratic control statistic (anchor gradient plus
a Hessian surrogate) decides when the reduced measure has gone stale: the
step at which it stops decreasing is rolled back and a fresh reduced measure
is built at the last retained iterate.

Hessian surrogates: a constant ``c * I`` (exact on isotropic quadratics, kept
for tests) or a rank-1 secant built from the gradient difference across the
most recent full-measure step and the coordinate-wise reciprocal of the
parameter difference.  The secant mode spends two full-gradient evaluations
before the first reduction and one full-measure step per phase thereafter.
"""

import math
import time
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from . import _kernels
from .errors import DegenerateStep, Diverged
from .measure import DiscreteMeasure, recombine_hierarchical
from .models import (
    LEAST_SQUARES,
    _logistic_sample_losses,
    l1_subgradient,
    risk_and_gradient,
)
from .trace import PhaseLog, Trace

HESSIAN_RANK1 = "rank1"
HESSIAN_CONST = "const"


@dataclass
class DirectionOracle:
    """Descent direction source: -(beta * velocity + gradient).

    beta = 0 reproduces the plain negative gradient bit for bit.
    """

    kind: str = "neg_gradient"
    beta: float = 0.0
    velocity: np.ndarray | None = None

    def reset(self, d):
        self.velocity = np.zeros(d)

    def clone(self):
        v = None if self.velocity is None else self.velocity.copy()
        return DirectionOracle(self.kind, self.beta, v)


def neg_gradient():
    return DirectionOracle("neg_gradient", 0.0)


def momentum(beta):
    if not 0.0 <= beta < 1.0:
        raise ValueError("beta must lie in [0, 1)")
    return DirectionOracle("momentum", beta)


def direction(oracle, mean_grad_current):
    """Advance the oracle state and return the descent direction."""
    if oracle.velocity is None:
        oracle.reset(mean_grad_current.shape[0])
    oracle.velocity = oracle.beta * oracle.velocity + mean_grad_current
    return -oracle.velocity


@dataclass(frozen=True)
class ConstantHessian:
    c: float


@dataclass(frozen=True)
class Rank1Hessian:
    """H = outer(dg, r) with r the guarded reciprocal of the parameter step."""

    dg: np.ndarray
    r: np.ndarray


def hessian_rank1(grad_new, grad_old, theta_new, theta_old, zero_guard=1e-12):
    dth = np.asarray(theta_new, dtype=np.float64) - np.asarray(theta_old, dtype=np.float64)
    mask = np.abs(dth) > zero_guard
    if not mask.any():
        raise DegenerateStep("no coordinate moved more than the zero guard")
    r = np.zeros_like(dth)
    r[mask] = 1.0 / dth[mask]
    return Rank1Hessian(np.asarray(grad_new, dtype=np.float64) - np.asarray(grad_old, dtype=np.float64), r)


def control_statistic(grad_anchor, theta_j, theta_anchor, hess):
    """grad_anchor . (theta_j - theta_anchor) + 0.5 * quadratic surrogate."""
    dd = np.asarray(theta_j, dtype=np.float64) - np.asarray(theta_anchor, dtype=np.float64)
    if isinstance(hess, ConstantHessian):
        quad = hess.c * float(dd @ dd)
    else:
        quad = float(hess.dg @ dd) * float(hess.r @ dd)
    return float(np.asarray(grad_anchor) @ dd) + 0.5 * quad


@dataclass(frozen=True)
class CaGDConfig:
    gamma: float
    eps_grad: float = 1e-3
    eps_loss: float = 0.0
    it_max: int = 10_000
    it_max_ca: int | None = None  # None: max(10 / gamma, 1e4)
    hessian_mode: str = HESSIAN_RANK1
    hessian_c: float = 1.0
    recomb_tol: float = 1e-9
    zero_guard: float = 1e-12

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError("gamma must be nonnegative")
        if self.eps_grad < 0 or self.eps_loss < 0:
            raise ValueError("stopping thresholds must be nonnegative")
        if self.it_max < 1:
            raise ValueError("it_max must be positive")
        if self.it_max_ca is not None and self.it_max_ca < 2:
            raise ValueError("it_max_ca must be at least 2")
        if self.hessian_mode not in (HESSIAN_RANK1, HESSIAN_CONST):
            raise ValueError(f"unknown hessian_mode {self.hessian_mode!r}")

    def resolved_it_max_ca(self):
        if self.it_max_ca is not None:
            return self.it_max_ca
        if self.gamma <= 0:
            return 10_000
        return int(max(10.0 / self.gamma, 1e4))


def _should_stop(grad_norm, loss_value, config):
    # stop as soon as either threshold is met; eps_loss = 0 leaves the
    # gradient criterion in charge for positive losses
    return grad_norm <= config.eps_grad or abs(loss_value) <= config.eps_loss


def _check_finite(loss_value, theta):
    if not math.isfinite(loss_value) or not np.all(np.isfinite(theta)):
        raise Diverged(f"non-finite loss {loss_value!r}")


def gd(model, data, config, theta0=None):
    """Plain full-gradient descent; one full pass per step."""
    data.validate(for_logistic=model.family == "logistic")
    theta = np.zeros(data.d) if theta0 is None else np.array(theta0, dtype=np.float64)
    trace = Trace()
    t0 = time.perf_counter()
    fpe = 0.0
    for step in range(config.it_max + 1):
        loss_value, g = risk_and_gradient(model, theta, data)
        fpe += 1.0
        _check_finite(loss_value, theta)
        gnorm = float(np.linalg.norm(g))
        trace.append(step, loss_value, gnorm, fpe, time.perf_counter() - t0, 0, theta)
        if _should_stop(gnorm, loss_value, config) or step == config.it_max:
            break
        theta = theta - config.gamma * g
    return trace


def _anchor_eval(model, theta, data):
    # one forward pass yields the recombination target matrix, the full mean
    # gradient, and the full loss
    t = data.X @ theta
    if model.family == LEAST_SQUARES:
        r = t - data.y
        loss_value = float(r @ r) / data.n
        scale = 2.0 * r
    else:
        loss_value = float(_logistic_sample_losses(t, data.y).mean())
        scale = expit(t) - data.y
    loss_value += model.l1_lambda * float(np.abs(theta).sum())
    P = scale[:, None] * data.X
    g = P.mean(axis=0) + l1_subgradient(model, theta)
    return P, g, loss_value


@dataclass(frozen=True)
class PhaseResult:
    """Outcome of one reduced-measure phase."""

    thetas: np.ndarray
    deltas: np.ndarray
    losses: np.ndarray
    evaluations: int
    accepted: int
    cap_hit: bool
    rejected_delta: float
    converged: bool
    gradient_evaluations: int  # evaluations plus the converged-check forward

    @property
    def ended_by(self):
        if self.converged:
            return "converged"
        return "cap" if self.cap_hit else "rollback"


def run_reduced_phase(
    model,
    data,
    support,
    weights,
    theta_anchor,
    grad_anchor,
    hess,
    gamma,
    it_max_ca,
    oracle,
    strict=True,
    half_quad=True,
    coords=None,
    gmat=None,
    eps_grad=-1.0,
    eps_loss=-1.0,
):
    """Drive the reduced-measure kernel for one phase; returns the kernel's
    outputs with the oracle velocity already rolled back to the last retained
    step.  ``coords`` restricts the phase to a coordinate block (the frozen
    remainder enters through the per-sample offset).  Nonnegative eps values
    mirror the stopping thresholds on the reduced measure."""
    dd = len(theta_anchor) if coords is None else len(coords)
    Xfull = data.X[support]
    if coords is None:
        Xs = np.ascontiguousarray(Xfull)
        offset = np.zeros(len(support))
        th0 = np.asarray(theta_anchor, dtype=np.float64)
    else:
        Xs = np.ascontiguousarray(Xfull[:, coords])
        th0 = np.asarray(theta_anchor, dtype=np.float64)[coords]
        offset = Xfull @ np.asarray(theta_anchor, dtype=np.float64) - Xs @ th0
    ys = np.ascontiguousarray(data.y[support])
    ws = np.ascontiguousarray(weights)
    if gmat is None:
        gmat = np.eye(dd)
    if isinstance(hess, ConstantHessian):
        hmode, h_dg, h_r, c_const = 0, np.zeros(dd), np.zeros(dd), float(hess.c)
    else:
        hmode, h_dg, h_r, c_const = 1, hess.dg, hess.r, 0.0
    if oracle.velocity is None:
        oracle.reset(dd if coords is None else len(theta_anchor))
    v0 = oracle.velocity if coords is None else oracle.velocity[coords]
    out = _kernels.reduced_phase(
        Xs,
        ys,
        ws,
        offset,
        model.family_code,
        float(model.l1_lambda),
        np.ascontiguousarray(th0),
        np.ascontiguousarray(v0, dtype=np.float64),
        float(oracle.beta),
        float(gamma),
        np.ascontiguousarray(gmat, dtype=np.float64),
        np.ascontiguousarray(grad_anchor, dtype=np.float64),
        hmode,
        np.ascontiguousarray(h_dg, dtype=np.float64),
        np.ascontiguousarray(h_r, dtype=np.float64),
        c_const,
        half_quad,
        strict,
        int(it_max_ca),
        float(eps_grad),
        float(eps_loss),
    )
    thetas, deltas, losses, n_eval, n_acc, cap_hit, v_keep, rejected, converged, extra = out
    if coords is None:
        oracle.velocity = np.array(v_keep)
    else:
        oracle.velocity = oracle.velocity.copy()
        oracle.velocity[coords] = v_keep
    return PhaseResult(
        thetas[:n_acc].copy(),
        deltas[:n_acc].copy(),
        losses[:n_acc].copy(),
        n_eval,
        n_acc,
        cap_hit,
        rejected,
        converged,
        n_eval + extra,
    )


def cagd(model, data, config, oracle=None, theta0=None):
    """Recombination-accelerated gradient descent (matches gd's stopping)."""
    data.validate(for_logistic=model.family == "logistic")
    if oracle is None:
        oracle = neg_gradient()
    oracle = oracle.clone()
    theta = np.zeros(data.d) if theta0 is None else np.array(theta0, dtype=np.float64)
    oracle.reset(data.d)
    n, d = data.n, data.d
    it_max_ca = config.resolved_it_max_ca()
    trace = Trace()
    t0 = time.perf_counter()
    now = lambda: time.perf_counter() - t0
    fpe = 0.0
    recombs = 0
    step = 0

    if config.hessian_mode == HESSIAN_RANK1:
        # warm-up: one full-measure step so a secant pair exists
        loss0, g_prev = risk_and_gradient(model, theta, data)
        fpe += 1.0
        _check_finite(loss0, theta)
        trace.append(0, loss0, np.linalg.norm(g_prev), fpe, now(), recombs, theta)
        if _should_stop(np.linalg.norm(g_prev), loss0, config):
            return trace
        theta_prev = theta
        theta = theta + config.gamma * direction(oracle, g_prev)
        step = 1
        P, g, loss_a = _anchor_eval(model, theta, data)
        fpe += 1.0
        _check_finite(loss_a, theta)
        trace.append(step, loss_a, np.linalg.norm(g), fpe, now(), recombs, theta)
    else:
        P, g, loss_a = _anchor_eval(model, theta, data)
        fpe += 1.0
        _check_finite(loss_a, theta)
        trace.append(0, loss_a, np.linalg.norm(g), fpe, now(), recombs, theta)
        theta_prev, g_prev = None, None

    while not _should_stop(np.linalg.norm(g), loss_a, config) and step <= config.it_max:
        if config.hessian_mode == HESSIAN_RANK1:
            try:
                hess = hessian_rank1(g, g_prev, theta, theta_prev, config.zero_guard)
            except DegenerateStep:
                hess = ConstantHessian(0.0)
        else:
            hess = ConstantHessian(config.hessian_c)
        # reduce the data-part gradient columns at the anchor
        result = recombine_hierarchical(P, DiscreteMeasure.uniform(n), config.recomb_tol)
        recombs += 1
        sup = result.measure.support
        phase = run_reduced_phase(
            model,
            data,
            sup,
            result.measure.weights,
            theta,
            g,
            hess,
            config.gamma,
            it_max_ca,
            oracle,
            eps_grad=config.eps_grad,
            eps_loss=config.eps_loss,
        )
        trace.tau_events.append(step)
        trace.phases.append(
            PhaseLog(
                step,
                sup.size,
                phase.deltas,
                phase.rejected_delta,
                phase.ended_by,
                phase.evaluations,
            )
        )
        fpe_anchor = fpe
        per_step_cost = sup.size / n
        for i in range(phase.accepted):
            step += 1
            trace.append(
                step,
                phase.losses[i],
                math.nan,
                fpe_anchor + (i + 1) * per_step_cost,
                now(),
                recombs,
                phase.thetas[i],
            )
        fpe = fpe_anchor + phase.gradient_evaluations * per_step_cost
        if phase.accepted:
            theta_end = phase.thetas[phase.accepted - 1]
        else:
            # the very first reduced step failed the control test; take one
            # plain full-measure step instead so the anchor always advances
            theta_end = theta + config.gamma * direction(oracle, g)
            step += 1
            trace.append(step, math.nan, math.nan, fpe, now(), recombs, theta_end)
        # full gradient at the rolled-back anchor: stop check, and either the
        # next secant leg (rank-1) or directly the next anchor (constant c)
        if config.hessian_mode == HESSIAN_RANK1:
            loss_end, g_end = risk_and_gradient(model, theta_end, data)
            P_end = None
        else:
            P_end, g_end, loss_end = _anchor_eval(model, theta_end, data)
        fpe += 1.0
        _check_finite(loss_end, theta_end)
        trace.amend_last(loss=loss_end, grad_norm=np.linalg.norm(g_end), full_pass=fpe, wall=now())
        if _should_stop(np.linalg.norm(g_end), loss_end, config):
            # the threshold was crossed inside this phase: bisect the retained
            # trajectory with full gradients so the run stops at the first
            # iterate under the thresholds (same stopping rule as gd)
            lo, hi = 0, phase.accepted - 1
            g_stop, loss_stop = g_end, loss_end
            while lo < hi:
                mid = (lo + hi) // 2
                loss_mid, g_mid = risk_and_gradient(model, phase.thetas[mid], data)
                fpe += 1.0
                if _should_stop(np.linalg.norm(g_mid), loss_mid, config):
                    hi = mid
                    g_stop, loss_stop = g_mid, loss_mid
                else:
                    lo = mid + 1
            keep = len(trace) - (phase.accepted - 1 - hi)
            trace.truncate(keep)
            trace.amend_last(
                loss=loss_stop,
                grad_norm=np.linalg.norm(g_stop),
                full_pass=fpe,
                wall=now(),
            )
            return trace
        if step > config.it_max:
            return trace
        if config.hessian_mode == HESSIAN_RANK1:
            theta_prev, g_prev = theta_end, g_end
            theta = theta_end + config.gamma * direction(oracle, g_end)
            step += 1
            P, g, loss_a = _anchor_eval(model, theta, data)
            fpe += 1.0
            _check_finite(loss_a, theta)
            trace.append(step, loss_a, np.linalg.norm(g), fpe, now(), recombs, theta)
        else:
            theta = theta_end
            P, g = P_end, g_end
            loss_a = loss_end
    return trace
