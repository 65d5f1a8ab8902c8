"""Block coordinate descent with optional recombination acceleration.

Two run families share one entry point, :func:`cabcd`:

* Gauss-Southwell / Random plans: every iteration takes one full-coordinate
  oracle step, regroups coordinates (by gradient mass or at random), and --
  when recombination is on -- descends each block on its own reduced measure
  before synchronizing.  Blocks are pairwise disjoint, so block phases are
  independent given the frozen anchor and the synchronized iterate does not
  depend on block execution order.
* Nutini-style rule grid, restricted to partitions {VB, Sort, Order, Avg},
  selections {Random, Cyclic, GS, Lipschitz}, directions {Lb, Hb}: one block
  is selected and updated per iteration, either by a full Lipschitz/Newton
  step or, with recombination, by a reduced-measure phase whose direction is
  premultiplied by the same 1/L or inverse-Hessian factor.

Rule ids follow "partition_block-selection_direction" with an "_CA" suffix
for recombination-enabled runs.
"""

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    Diverged,
    MissingLipschitz,
    SingularBlockHessian,
    WrongModel,
)
from .measure import DiscreteMeasure, recombine_hierarchical
from .models import (
    LEAST_SQUARES,
    _logistic_sample_losses,
    l1_subgradient,
    mean_gradient,
)
from .optimizers import (
    ConstantHessian,
    Rank1Hessian,
    direction,
    neg_gradient,
    run_reduced_phase,
)
from .trace import PhaseLog, Trace

PARTITIONS = ("VB", "Sort", "Order", "Avg")
SELECTIONS = ("Random", "Cyclic", "GS", "Lipschitz")
DIRECTIONS = ("Lb", "Hb")
HB_RIDGE = 1e-10


@dataclass(frozen=True)
class Block:
    coords: tuple

    def __post_init__(self):
        coords = tuple(int(c) for c in self.coords)
        if len(set(coords)) != len(coords):
            raise ValueError("block coordinates must be distinct")
        object.__setattr__(self, "coords", coords)

    @property
    def size(self):
        return len(self.coords)


@dataclass(frozen=True)
class BlockPlan:
    blocks: tuple
    rule_id: str

    def validate(self):
        seen = set()
        for b in self.blocks:
            if seen & set(b.coords):
                raise ValueError("blocks must be pairwise disjoint")
            seen |= set(b.coords)


def _chunk(indices, s):
    return [Block(tuple(indices[i : i + s])) for i in range(0, len(indices), s)]


def gs_blocks(gradient, percentage, s):
    """Modified Gauss-Southwell grouping: take the shortest descending-|g|
    prefix covering more than ``percentage`` of the total absolute gradient
    mass and chunk it into blocks of size <= s, preserving the order."""
    if not 0 < percentage <= 1:
        raise ValueError("percentage must lie in (0, 1]")
    if s < 1:
        raise ValueError("block size must be >= 1")
    g = np.abs(np.asarray(gradient, dtype=np.float64))
    total = g.sum()
    if total == 0.0:
        return [Block((0,))]
    order = np.argsort(-g, kind="stable")
    cum = np.cumsum(g[order])
    n_hat = int(np.searchsorted(cum, percentage * total, side="right")) + 1
    n_hat = min(n_hat, g.size)
    return _chunk(order[:n_hat].tolist(), s)


def random_blocks(d, fraction, s, rng_seed):
    """Sample ceil(fraction * d) coordinates without replacement and chunk
    them into blocks of size <= s; deterministic given the seed."""
    return _random_blocks(d, fraction, s, np.random.default_rng(rng_seed))


def _random_blocks(d, fraction, s, rng):
    if not 0 < fraction <= 1:
        raise ValueError("fraction must lie in (0, 1]")
    if s < 1:
        raise ValueError("block size must be >= 1")
    count = int(math.ceil(fraction * d))
    chosen = rng.choice(d, size=count, replace=False)
    return _chunk(chosen.tolist(), s)


def partition_plan(rule, lipschitz, s, d):
    """Fixed partition of all d coordinates into blocks of size <= s.

    Order: contiguous index runs.  Sort: descending Lipschitz.  Avg: fill each
    block alternating the largest / smallest remaining Lipschitz value.  VB has
    no fixed partition (rebuilt per iteration by the selection rule).
    """
    if rule == "Order":
        return BlockPlan(tuple(_chunk(list(range(d)), s)), f"Order_s{s}")
    if rule in ("Sort", "Avg"):
        if lipschitz is None:
            raise MissingLipschitz(f"{rule} partition needs per-coordinate constants")
        lip = np.asarray(lipschitz, dtype=np.float64)
        if lip.shape != (d,):
            raise MissingLipschitz("need one Lipschitz constant per coordinate")
        by_desc = np.argsort(-lip, kind="stable").tolist()
        if rule == "Sort":
            return BlockPlan(tuple(_chunk(by_desc, s)), f"Sort_s{s}")
        # Avg: alternately take from the large end and the small end
        picked = []
        lo, hi = 0, len(by_desc) - 1
        take_large = True
        while lo <= hi:
            if take_large:
                picked.append(by_desc[lo])
                lo += 1
            else:
                picked.append(by_desc[hi])
                hi -= 1
            take_large = not take_large
        return BlockPlan(tuple(_chunk(picked, s)), f"Avg_s{s}")
    raise ValueError(f"unknown partition rule {rule!r}")


def block_lipschitz_ls(data, block):
    """(2/N) * sigma_max(X_block)^2; least-squares only."""
    cols = data.X[:, list(block.coords)]
    if cols.size == 0:
        return 0.0
    smax = np.linalg.svd(cols, compute_uv=False)[0]
    return float(2.0 * smax * smax / data.n)


def coordinate_lipschitz_ls(data):
    """Per-coordinate constants (2/N) * ||X_j||^2."""
    return 2.0 * (data.X**2).sum(axis=0) / data.n


def _require_least_squares(model, what):
    if model.family != LEAST_SQUARES:
        raise WrongModel(f"{what} requires the least-squares family")


def _block_hessian_inverse(data, coords):
    cols = data.X[:, coords]
    H = 2.0 * (cols.T @ cols) / data.n
    try:
        inv = np.linalg.inv(H)
        if not np.all(np.isfinite(inv)):
            raise np.linalg.LinAlgError
    except np.linalg.LinAlgError:
        inv = np.linalg.inv(H + HB_RIDGE * np.eye(len(coords)))
        if not np.all(np.isfinite(inv)):
            raise SingularBlockHessian(f"block {coords} Hessian is not invertible")
    return inv


def block_direction(rule, model, data, theta, block, lipschitz=None, g_block=None):
    """Scaled block update u (applied as theta_block -= u).

    Lb: g_block / L_block.  Hb: solve H_block u = g_block with the closed-form
    least-squares block Hessian (2/N) X_b^T X_b, ridge-regularized if singular.
    """
    coords = list(block.coords)
    if g_block is None:
        g_block = mean_gradient(model, theta, data, coords=coords)
    if rule == "Lb":
        L = block_lipschitz_ls(data, block) if lipschitz is None else float(lipschitz)
        if L <= 0:
            raise MissingLipschitz("block Lipschitz constant must be positive")
        return g_block / L
    if rule == "Hb":
        _require_least_squares(model, "Hb direction")
        return _block_hessian_inverse(data, coords) @ g_block
    raise ValueError(f"unknown direction rule {rule!r}")


@dataclass(frozen=True)
class NutiniRuleSpec:
    partition: str
    selection: str
    direction: str
    ca: bool

    @property
    def rule_id(self):
        base = f"{self.partition}_{self.selection}_{self.direction}"
        return base + ("_CA" if self.ca else "")


def parse_rule_id(rule_id):
    parts = rule_id.split("_")
    ca = False
    if parts and parts[-1] == "CA":
        ca = True
        parts = parts[:-1]
    if len(parts) != 3:
        raise ValueError(f"rule id {rule_id!r} is not partition_selection_direction")
    partition, selection, direc = parts
    if partition not in PARTITIONS:
        raise ValueError(f"partition {partition!r} not in {PARTITIONS}")
    if selection not in SELECTIONS:
        raise ValueError(
            f"selection {selection!r} not supported (restricted grid: {SELECTIONS})"
        )
    if direc not in DIRECTIONS:
        raise ValueError(f"direction {direc!r} not in {DIRECTIONS}")
    return NutiniRuleSpec(partition, selection, direc, ca)


@dataclass(frozen=True)
class GSPlan:
    """Modified Gauss-Southwell grouping over a gradient-mass prefix."""

    s: int = 2
    percentage: float = 0.75


@dataclass(frozen=True)
class RandomPlan:
    """Random acyclic grouping of a coordinate fraction per iteration."""

    s: int = 2
    fraction: float = 0.5


@dataclass(frozen=True)
class NutiniPlan:
    rule_id: str
    s: int = 5


@dataclass(frozen=True)
class CaBCDConfig:
    gamma: float
    eps_grad: float = 1e-3
    eps_loss: float = 0.0
    it_max: int = 1_000
    it_max_ca: int = 100
    recomb_tol: float = 1e-9
    zero_guard: float = 1e-12
    max_full_passes: float | None = None
    seed: int = 0

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError("gamma must be nonnegative")
        if self.it_max < 1 or self.it_max_ca < 2:
            raise ValueError("it_max >= 1 and it_max_ca >= 2 required")


def _full_eval(model, data, theta):
    """One forward pass: per-sample gradient scale, mean gradient, full loss."""
    from scipy.special import expit

    t = data.X @ theta
    if model.family == LEAST_SQUARES:
        r = t - data.y
        loss_value = float(r @ r) / data.n
        scale = 2.0 * r
    else:
        loss_value = float(_logistic_sample_losses(t, data.y).mean())
        scale = expit(t) - data.y
    loss_value += model.l1_lambda * float(np.abs(theta).sum())
    g = data.X.T @ scale / data.n + l1_subgradient(model, theta)
    return scale, g, loss_value


def _secant_or_zero(dg, dth, zero_guard):
    mask = np.abs(dth) > zero_guard
    if not mask.any():
        return ConstantHessian(0.0)
    r = np.zeros_like(dth)
    r[mask] = 1.0 / dth[mask]
    return Rank1Hessian(dg.copy(), r)


def _stop(gnorm, loss_value, config):
    return gnorm <= config.eps_grad or abs(loss_value) <= config.eps_loss


def _budget_reached(fpe, config):
    return config.max_full_passes is not None and fpe >= config.max_full_passes


def cabcd(model, data, config, plan, use_caratheodory=True, oracle=None, theta0=None):
    """Block coordinate descent, optionally recombination-accelerated.

    Trace rows are written at full-measure evaluations only; reduced block
    phases contribute their (support/N) cost to the full-pass counter and
    their control sequences to ``trace.phases``.
    """
    data.validate(for_logistic=model.family == "logistic")
    if isinstance(plan, NutiniPlan):
        return _cabcd_nutini(model, data, config, plan, use_caratheodory, theta0)
    if oracle is None:
        oracle = neg_gradient()
    oracle = oracle.clone()
    theta = np.zeros(data.d) if theta0 is None else np.array(theta0, dtype=np.float64)
    oracle.reset(data.d)
    rng = np.random.default_rng(config.seed)
    n = data.n
    trace = Trace()
    t0 = time.perf_counter()
    now = lambda: time.perf_counter() - t0
    fpe = 1.0
    recombs = 0
    step = 0
    _, g, loss_cur = _full_eval(model, data, theta)
    _check_finite_bcd(loss_cur, theta)
    trace.append(step, loss_cur, np.linalg.norm(g), fpe, now(), recombs, theta)
    while (
        not _stop(np.linalg.norm(g), loss_cur, config)
        and step < config.it_max
        and not _budget_reached(fpe, config)
    ):
        # full-coordinate oracle step, then regroup on the fresh gradient
        theta_new = theta + config.gamma * direction(oracle, g)
        step += 1
        scale, g_new, loss_new = _full_eval(model, data, theta_new)
        fpe += 1.0
        _check_finite_bcd(loss_new, theta_new)
        trace.append(step, loss_new, np.linalg.norm(g_new), fpe, now(), recombs, theta_new)
        if not use_caratheodory:
            theta, g, loss_cur = theta_new, g_new, loss_new
            continue
        if isinstance(plan, GSPlan):
            blocks = gs_blocks(g_new, plan.percentage, plan.s)
        elif isinstance(plan, RandomPlan):
            blocks = _random_blocks(data.d, plan.fraction, plan.s, rng)
        else:
            raise TypeError(f"unsupported plan {plan!r}")
        trace.tau_events.append(step)
        theta_sync = theta_new.copy()
        accepted_total = 0
        for block in blocks:
            coords = np.asarray(block.coords, dtype=np.int64)
            hess = _secant_or_zero(
                (g_new - g)[coords], (theta_new - theta)[coords], config.zero_guard
            )
            Fb = np.ascontiguousarray(scale[:, None] * data.X[:, coords])
            result = recombine_hierarchical(
                Fb, DiscreteMeasure.uniform(n), config.recomb_tol
            )
            recombs += 1
            sup = result.measure.support
            phase = run_reduced_phase(
                model,
                data,
                sup,
                result.measure.weights,
                theta_new,
                g_new[coords],
                hess,
                config.gamma,
                config.it_max_ca,
                oracle,
                strict=False,
                half_quad=False,
                coords=coords,
            )
            fpe += phase.gradient_evaluations * sup.size / n
            accepted_total += phase.accepted
            if phase.accepted:
                theta_sync[coords] = phase.thetas[phase.accepted - 1]
            trace.phases.append(
                PhaseLog(
                    step,
                    sup.size,
                    phase.deltas,
                    phase.rejected_delta,
                    phase.ended_by,
                    phase.evaluations,
                    block.coords,
                )
            )
        step += accepted_total
        theta = theta_sync
        _, g, loss_cur = _full_eval(model, data, theta)
        fpe += 1.0
        _check_finite_bcd(loss_cur, theta)
        trace.append(step, loss_cur, np.linalg.norm(g), fpe, now(), recombs, theta)
    return trace


def _check_finite_bcd(loss_value, theta):
    if not math.isfinite(loss_value) or not np.all(np.isfinite(theta)):
        raise Diverged(f"non-finite loss {loss_value!r}")


def _select_block(rule, plan_blocks, g, block_lip, rng, cycle_pos):
    if rule == "Random":
        return plan_blocks[int(rng.integers(len(plan_blocks)))]
    if rule == "Cyclic":
        return plan_blocks[cycle_pos % len(plan_blocks)]
    if rule == "GS":
        norms = [float(np.linalg.norm(g[list(b.coords)])) for b in plan_blocks]
        return plan_blocks[int(np.argmax(norms))]
    if rule == "Lipschitz":
        p = np.asarray(block_lip, dtype=np.float64)
        p = p / p.sum()
        return plan_blocks[int(rng.choice(len(plan_blocks), p=p))]
    raise ValueError(f"unknown selection rule {rule!r}")


def _variable_block(rule, g, coord_lip, s, d, rng, cycle_pos):
    if rule == "Random":
        return Block(tuple(rng.choice(d, size=min(s, d), replace=False).tolist()))
    if rule == "Cyclic":
        start = (cycle_pos * s) % d
        return Block(tuple((start + i) % d for i in range(min(s, d))))
    if rule == "GS":
        order = np.argsort(-np.abs(g), kind="stable")
        return Block(tuple(order[: min(s, d)].tolist()))
    if rule == "Lipschitz":
        p = coord_lip / coord_lip.sum()
        return Block(tuple(rng.choice(d, size=min(s, d), replace=False, p=p).tolist()))
    raise ValueError(f"unknown selection rule {rule!r}")


def _cabcd_nutini(model, data, config, plan, use_caratheodory, theta0):
    rule = parse_rule_id(plan.rule_id)
    use_ca = use_caratheodory or rule.ca
    _require_least_squares(model, "the restricted rule grid")
    d, n = data.d, data.n
    s = plan.s
    coord_lip = coordinate_lipschitz_ls(data)
    if rule.partition == "VB":
        fixed_blocks, block_lip = None, None
    else:
        fixed_blocks = partition_plan(rule.partition, coord_lip, s, d).blocks
        block_lip = [block_lipschitz_ls(data, b) for b in fixed_blocks]
    rng = np.random.default_rng(config.seed)
    theta = np.zeros(d) if theta0 is None else np.array(theta0, dtype=np.float64)
    trace = Trace()
    t0 = time.perf_counter()
    now = lambda: time.perf_counter() - t0
    fpe = 0.0
    recombs = 0
    step = 0
    cycle_pos = 0
    theta_prev = None
    g_prev = None
    oracle = neg_gradient()
    oracle.reset(d)
    while True:
        scale, g, loss_cur = _full_eval(model, data, theta)
        fpe += 1.0
        _check_finite_bcd(loss_cur, theta)
        trace.append(step, loss_cur, np.linalg.norm(g), fpe, now(), recombs, theta)
        if (
            _stop(np.linalg.norm(g), loss_cur, config)
            or step >= config.it_max
            or _budget_reached(fpe, config)
        ):
            return trace
        if rule.partition == "VB":
            block = _variable_block(rule.selection, g, coord_lip, s, d, rng, cycle_pos)
            lip_b = block_lipschitz_ls(data, block) if rule.direction == "Lb" else None
        else:
            block = _select_block(rule.selection, fixed_blocks, g, block_lip, rng, cycle_pos)
            lip_b = block_lip[fixed_blocks.index(block)]
        cycle_pos += 1
        coords = np.asarray(block.coords, dtype=np.int64)
        if not use_ca:
            u = block_direction(
                rule.direction, model, data, theta, block, lip_b, g_block=g[coords]
            )
            theta = theta.copy()
            theta[coords] -= u
            step += 1
            continue
        # reduced phase on the selected block; the Lb/Hb factor premultiplies
        # the reduced gradient inside the kernel
        if rule.direction == "Lb":
            gmat = np.eye(len(coords)) / lip_b
        else:
            gmat = _block_hessian_inverse(data, coords.tolist())
        if theta_prev is None:
            hess = ConstantHessian(0.0)
        else:
            hess = _secant_or_zero(
                (g - g_prev)[coords], (theta - theta_prev)[coords], config.zero_guard
            )
        Fb = np.ascontiguousarray(scale[:, None] * data.X[:, coords])
        result = recombine_hierarchical(Fb, DiscreteMeasure.uniform(n), config.recomb_tol)
        recombs += 1
        sup = result.measure.support
        oracle.velocity[:] = 0.0  # rule-grid runs carry no momentum
        phase = run_reduced_phase(
            model,
            data,
            sup,
            result.measure.weights,
            theta,
            g[coords],
            hess,
            config.gamma,
            config.it_max_ca,
            oracle,
            strict=False,
            half_quad=False,
            coords=coords,
            gmat=gmat,
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
                block.coords,
            )
        )
        fpe += phase.gradient_evaluations * sup.size / n
        theta_prev, g_prev = theta, g
        theta = theta.copy()
        if phase.accepted:
            theta[coords] = phase.thetas[phase.accepted - 1]
        step += max(phase.accepted, 1)
