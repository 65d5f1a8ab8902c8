"""Discrete measure reduction (recombination).

Given N atoms carrying a probability measure and n test functions tabulated
in a moment matrix, build a measure supported on at most n+1 of the atoms
with the same expectations.  Two routes with the same contract:

* :func:`recombine` repeatedly solves one constrained linear system per
  eliminated atom (sliding (n+2)-atom window).
* :func:`recombine_hierarchical` reduces weighted group centroids and pushes
  the surviving mass back to members, halving the support per round; this is
  the O(N n + log(N/n) n^3)-class variant used inside the optimizers.
"""

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import DimensionMismatch, NumericalBreakdown

DEFAULT_TOL = 1e-9
MASS_TOL = 1e-12


@dataclass(frozen=True)
class DiscreteMeasure:
    """Atom indices into an external dataset plus probability weights."""

    support: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        object.__setattr__(
            self, "support", np.ascontiguousarray(self.support, dtype=np.int64)
        )
        object.__setattr__(
            self, "weights", np.ascontiguousarray(self.weights, dtype=np.float64)
        )

    def validate(self):
        if self.support.ndim != 1 or self.weights.ndim != 1:
            raise DimensionMismatch("support and weights must be 1-d")
        if self.support.shape != self.weights.shape:
            raise DimensionMismatch("support and weights must have equal length")
        if self.support.size == 0:
            raise ValueError("measure must have at least one atom")
        if np.unique(self.support).size != self.support.size:
            raise ValueError("support indices must be distinct")
        if np.any(self.weights < 0):
            raise ValueError("weights must be nonnegative")
        if abs(self.weights.sum() - 1.0) > MASS_TOL:
            raise ValueError("weights must sum to 1 within 1e-12")

    @property
    def size(self):
        return int(self.support.size)

    @classmethod
    def uniform(cls, n_atoms):
        return cls(np.arange(n_atoms), np.full(n_atoms, 1.0 / n_atoms))


@dataclass(frozen=True)
class RecombinationResult:
    measure: DiscreteMeasure
    eliminations: int
    moment_residual: float


def _check_moment_matrix(F):
    F = np.ascontiguousarray(F, dtype=np.float64)
    if F.ndim != 2:
        raise DimensionMismatch("moment matrix must be 2-d (N x n)")
    if F.shape[0] < 1 or F.shape[1] < 1:
        raise DimensionMismatch("moment matrix needs N >= 1 rows and n >= 1 columns")
    if not np.all(np.isfinite(F)):
        raise ValueError("moment matrix entries must be finite")
    return F


def moments(F, measure):
    """Expectation of each column of F under the measure."""
    return F[measure.support].T @ measure.weights


def relative_moment_residual(F, mu, candidate):
    target = moments(F, mu)
    got = moments(F, candidate)
    return float(np.max(np.abs(got - target) / (1.0 + np.abs(target))))


def _run_reduction(kernel, F, mu, tol):
    F = _check_moment_matrix(F)
    mu.validate()
    N, n = F.shape
    if mu.support.max() >= N or mu.support.min() < 0:
        raise DimensionMismatch("measure support indexes rows outside the matrix")
    if tol <= 0:
        raise ValueError("tol must be positive")
    if mu.size <= n + 1:
        return RecombinationResult(mu, 0, relative_moment_residual(F, mu, mu))
    w = np.zeros(N)
    w[mu.support] = mu.weights
    try:
        status = kernel(F, w)
    except Exception as exc:  # LAPACK non-convergence inside the kernel
        raise NumericalBreakdown(f"factorization failed during elimination: {exc}")
    if status != _kernels.STATUS_OK:
        raise NumericalBreakdown(
            "no kernel vector with a positive component on an over-sized support"
        )
    # final global snap + renormalization against drift over many eliminations
    w[w <= _kernels.SNAP_REL * w.max()] = 0.0
    support = np.nonzero(w)[0]
    new = DiscreteMeasure(support, w[support] / w[support].sum())
    residual = relative_moment_residual(F, mu, new)
    if new.size > n + 1 or residual > tol:
        raise NumericalBreakdown(
            f"reduction left support {new.size} (bound {n + 1}) "
            f"with residual {residual:.3e} (tol {tol:.3e})"
        )
    return RecombinationResult(new, mu.size - new.size, residual)


def recombine(F, mu, tol=DEFAULT_TOL):
    """Reduce ``mu`` to at most n+1 atoms matching all column expectations of F."""
    n_plus_1 = np.asarray(F).shape[1] + 1
    return _run_reduction(
        lambda Fc, w: _kernels.eliminate_to_target(Fc, w, n_plus_1), F, mu, tol
    )


def recombine_hierarchical(F, mu, tol=DEFAULT_TOL):
    """Same contract as :func:`recombine` via centroid divide-and-conquer."""
    return _run_reduction(_kernels.hier_reduce, F, mu, tol)


def eliminate_one(F_active, w_active):
    """One elimination step: remove mass along a kernel vector of the stacked
    system [F^T; 1^T] so that at least one weight becomes exactly zero.

    Preserves total mass and all column moments up to arithmetic.  Requires
    k >= n + 2 active atoms so the kernel is nonempty.
    """
    F = _check_moment_matrix(F_active)
    w = np.ascontiguousarray(w_active, dtype=np.float64).copy()
    k, n = F.shape
    if w.shape != (k,):
        raise DimensionMismatch("weights must have one entry per matrix row")
    if np.any(w < 0):
        raise ValueError("weights must be nonnegative")
    if k < n + 2:
        raise DimensionMismatch(f"need at least n + 2 = {n + 2} atoms, got {k}")
    A = np.vstack([F.T, np.ones((1, k))])
    vt = np.linalg.svd(A)[2]
    v = vt[-1].copy()
    big = int(np.argmax(np.abs(v)))
    if abs(v[big]) < 1e-250:
        raise NumericalBreakdown("kernel vector vanished; system is degenerate")
    if v[big] < 0:
        v = -v
    pos = np.nonzero(v > 0)[0]
    if pos.size == 0:
        raise NumericalBreakdown("kernel vector has no positive component")
    ratios = w[pos] / v[pos]
    best = pos[int(np.argmin(ratios))]
    alpha = w[best] / v[best]
    w -= alpha * v
    w[best] = 0.0
    w[w <= _kernels.SNAP_REL * w.max()] = 0.0
    return w


def verify_recombination(F, mu, result, tol=DEFAULT_TOL):
    """True iff the result satisfies every recombination invariant at tol."""
    F = _check_moment_matrix(F)
    n = F.shape[1]
    m = result.measure
    if m.support.ndim != 1 or m.support.size > n + 1:
        return False
    if np.unique(m.support).size != m.support.size:
        return False
    if np.any(m.weights < 0):
        return False
    if abs(m.weights.sum() - 1.0) > MASS_TOL:
        return False
    return relative_moment_residual(F, mu, m) <= tol
