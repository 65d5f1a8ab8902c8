"""Synthetic dataset generators and the CSV ingestion pipeline.

All generators are pure functions of (sizes, seed) via ``numpy.random
.default_rng``.  The three 2-d classification generators mirror the logistic
benchmark setups; ``gen_dataset_A`` builds the sparse least-squares design
with deliberately uneven column scales used by the block-rule experiments.
"""

import csv as _csv
import math
from dataclasses import dataclass
from itertools import combinations_with_replacement

import numpy as np

from .errors import FeatureCountExceeded, MissingColumn, ParseError
from .models import Dataset


@dataclass(frozen=True)
class PipelineSpec:
    """Feature pipeline: tensor-power expansion, scaling, PCA."""

    tensor_power_alpha: int = 1
    scale: bool = False
    pca_components: int | None = None


@dataclass(frozen=True)
class CsvLoadResult:
    dataset: Dataset
    rows_dropped: int

    @property
    def drop_fraction(self):
        total = self.dataset.n + self.rows_dropped
        return self.rows_dropped / total if total else 0.0


def gen_uniform_sine(n, seed):
    """x ~ Uniform([-1,1]^2), label 1 iff x2 lies above sin(pi * x1)."""
    rng = np.random.default_rng(seed)
    X = rng.uniform(-1.0, 1.0, size=(n, 2))
    y = (X[:, 1] > np.sin(np.pi * X[:, 0])).astype(np.float64)
    return Dataset(X, y)


def gen_exp_octant(n, seed):
    """x = Exp(1) - 1 per coordinate, label 1 iff both coordinates < 0."""
    rng = np.random.default_rng(seed)
    X = rng.exponential(1.0, size=(n, 2)) - 1.0
    y = ((X[:, 0] < 0) & (X[:, 1] < 0)).astype(np.float64)
    return Dataset(X, y)


def gen_logistic_2d(n, seed, theta_true=(-5.0, 2.0)):
    """x ~ Uniform([-1,1]^2), y ~ Bernoulli(sigmoid(x . theta_true))."""
    rng = np.random.default_rng(seed)
    X = rng.uniform(-1.0, 1.0, size=(n, 2))
    t = X @ np.asarray(theta_true, dtype=np.float64)
    p = 1.0 / (1.0 + np.exp(-t))
    y = (rng.random(n) < p).astype(np.float64)
    return Dataset(X, y)


def gen_dataset_A(n, d, seed):
    """Sparse least-squares design with uneven column scales.

    Entries are standard normal plus 1, each column is scaled by 10 times a
    standard normal draw, and each entry is kept nonzero with probability
    10 log(n)/n.  The ground-truth coefficient vector has floor(0.9 d) zeros;
    targets add unit-variance noise.  Returns (dataset, theta_cross).
    """
    rng = np.random.default_rng(seed)
    Z = rng.standard_normal((n, d)) + 1.0
    col_scale = 10.0 * rng.standard_normal(d)
    keep_p = min(1.0, 10.0 * math.log(n) / n) if n > 1 else 1.0
    keep = rng.random((n, d)) < keep_p
    X = Z * col_scale * keep
    theta_cross = rng.standard_normal(d)
    n_zero = int(math.floor(0.9 * d))
    zero_idx = rng.choice(d, size=n_zero, replace=False)
    theta_cross[zero_idx] = 0.0
    y = X @ theta_cross + rng.standard_normal(n)
    return Dataset(X, y), theta_cross


GENERATORS = {
    "gen_uniform_sine": gen_uniform_sine,
    "gen_exp_octant": gen_exp_octant,
    "gen_logistic_2d": gen_logistic_2d,
}


def add_intercept(X):
    """Append a constant-1 column."""
    return np.hstack([X, np.ones((X.shape[0], 1))])


def tensor_power_count(d, alpha):
    return math.comb(d + alpha, alpha) - 1


def tensor_power_features(X, alpha, max_columns=10_000):
    """All monomials of total degree 1..alpha over the input columns,
    ordered by degree then lexicographically by index tuple."""
    if alpha < 1:
        raise ValueError("alpha must be >= 1")
    X = np.asarray(X, dtype=np.float64)
    d = X.shape[1]
    count = tensor_power_count(d, alpha)
    if count > max_columns:
        raise FeatureCountExceeded(
            f"expansion would create {count} columns (cap {max_columns})"
        )
    cols = []
    for degree in range(1, alpha + 1):
        for combo in combinations_with_replacement(range(d), degree):
            col = X[:, combo[0]].copy()
            for j in combo[1:]:
                col *= X[:, j]
            cols.append(col)
    return np.column_stack(cols)


def standard_scale(X):
    """Per-column zero mean / unit variance; zero-variance columns go to 0."""
    X = np.asarray(X, dtype=np.float64)
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    out = X - mean
    nz = std > 0
    out[:, nz] /= std[nz]
    out[:, ~nz] = 0.0
    return out


def pca_reduce(X, k):
    """Project centered X onto its top-k principal directions.

    Returns (projected matrix, per-component explained variance ratios).
    Component signs are fixed so the largest-magnitude loading is positive.
    """
    X = np.asarray(X, dtype=np.float64)
    if k > X.shape[1]:
        raise ValueError("k exceeds the number of columns")
    Xc = X - X.mean(axis=0)
    _, s, vt = np.linalg.svd(Xc, full_matrices=False)
    for i in range(vt.shape[0]):
        j = np.argmax(np.abs(vt[i]))
        if vt[i, j] < 0:
            vt[i] = -vt[i]
    total = float((s**2).sum())
    ratios = (s[:k] ** 2) / total if total > 0 else np.zeros(k)
    return Xc @ vt[:k].T, ratios


def apply_pipeline(X, spec):
    if spec.tensor_power_alpha > 1:
        X = tensor_power_features(X, spec.tensor_power_alpha)
    if spec.scale:
        X = standard_scale(X)
    if spec.pca_components is not None:
        X, _ = pca_reduce(X, spec.pca_components)
    return X


def load_csv(path, feature_columns, target_column, outlier_threshold=None):
    """Read a numeric CSV (header row required) into a Dataset.

    Rows whose target exceeds ``outlier_threshold`` are dropped; the count of
    dropped rows is reported in the result.  Row order is preserved.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = _csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file, header row required")
        col_idx = {}
        for name in list(feature_columns) + [target_column]:
            if name not in header:
                raise MissingColumn(f"{path}: column {name!r} not in header")
            col_idx[name] = header.index(name)
        feats, targets = [], []
        dropped = 0
        for rownum, row in enumerate(reader, start=2):
            values = {}
            for name, idx in col_idx.items():
                if idx >= len(row):
                    raise ParseError(f"{path}: row {rownum} is missing column {name!r}")
                try:
                    v = float(row[idx])
                except ValueError:
                    raise ParseError(
                        f"{path}: row {rownum}, column {name!r}: "
                        f"cannot parse {row[idx]!r} as a number"
                    )
                if not math.isfinite(v):
                    raise ParseError(
                        f"{path}: row {rownum}, column {name!r}: non-finite value"
                    )
                values[name] = v
            yv = values[target_column]
            if outlier_threshold is not None and yv > outlier_threshold:
                dropped += 1
                continue
            feats.append([values[name] for name in feature_columns])
            targets.append(yv)
    if not feats:
        raise ParseError(f"{path}: no usable data rows")
    return CsvLoadResult(Dataset(np.asarray(feats), np.asarray(targets)), dropped)
