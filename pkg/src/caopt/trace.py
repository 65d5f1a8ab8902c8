"""Per-step optimization logs and their CSV serialization.

A trace holds one record per retained step.  ``grad_norm`` is NaN on rows
where no full-measure gradient was computed (reduced-measure steps); on those
rows ``loss`` is the reduced-measure loss, so instrumentation never adds full
passes.  Reduced-phase internals (control-statistic sequences, rollbacks) are
kept in :class:`PhaseLog` entries for analysis and are not serialized.

CSV column order is fixed: step, loss, grad_norm, full_pass_equivalent,
wall_clock_s, recombinations.  Wall clock lives in its own column so the
deterministic columns of two runs can be compared byte for byte.
"""

import csv as _csv
import math
import os
import tempfile
from dataclasses import dataclass, field

import numpy as np

CSV_COLUMNS = (
    "step",
    "loss",
    "grad_norm",
    "full_pass_equivalent",
    "wall_clock_s",
    "recombinations",
)


@dataclass
class PhaseLog:
    """One reduced-measure phase: its anchor, retained controls, and outcome.

    ended_by is "rollback" (control statistic stopped decreasing; last
    evaluation discarded), "cap" (evaluation budget reached), or "converged"
    (a stopping threshold fired on the reduced measure mid-phase).
    """

    anchor_step: int
    support_size: int
    deltas: np.ndarray  # control statistic at each retained step
    rejected_delta: float  # NaN unless ended_by == "rollback"
    ended_by: str
    evaluations: int  # retained steps plus the rejected one, if any
    block: tuple | None = None


@dataclass
class Trace:
    steps: list = field(default_factory=list)
    losses: list = field(default_factory=list)
    grad_norms: list = field(default_factory=list)
    full_passes: list = field(default_factory=list)
    wall_clocks: list = field(default_factory=list)
    recombinations: list = field(default_factory=list)
    thetas: list = field(default_factory=list)
    tau_events: list = field(default_factory=list)
    phases: list = field(default_factory=list)

    def append(self, step, loss, grad_norm, full_pass, wall, recombs, theta):
        self.steps.append(int(step))
        self.losses.append(float(loss))
        self.grad_norms.append(float(grad_norm))
        self.full_passes.append(float(full_pass))
        self.wall_clocks.append(float(wall))
        self.recombinations.append(int(recombs))
        self.thetas.append(np.array(theta, dtype=np.float64, copy=True))

    def amend_last(self, loss=None, grad_norm=None, full_pass=None, wall=None):
        # used when a reduced-step row is promoted to an anchor row
        if loss is not None:
            self.losses[-1] = float(loss)
        if grad_norm is not None:
            self.grad_norms[-1] = float(grad_norm)
        if full_pass is not None:
            self.full_passes[-1] = float(full_pass)
        if wall is not None:
            self.wall_clocks[-1] = float(wall)

    def truncate(self, n_rows):
        # drop trailing rows (iterates past a detected stopping point)
        for name in (
            "steps",
            "losses",
            "grad_norms",
            "full_passes",
            "wall_clocks",
            "recombinations",
            "thetas",
        ):
            setattr(self, name, getattr(self, name)[:n_rows])

    def __len__(self):
        return len(self.steps)

    @property
    def final_theta(self):
        return self.thetas[-1]

    @property
    def final_loss(self):
        return self.losses[-1]

    @property
    def final_grad_norm(self):
        for g in reversed(self.grad_norms):
            if not math.isnan(g):
                return g
        return math.nan

    @property
    def total_wall(self):
        return self.wall_clocks[-1] if self.wall_clocks else 0.0

    @property
    def total_full_passes(self):
        return self.full_passes[-1] if self.full_passes else 0.0

    @property
    def total_recombinations(self):
        return self.recombinations[-1] if self.recombinations else 0

    def full_passes_to_grad_tol(self, eps):
        """Full-pass count at the first record with grad_norm <= eps."""
        for g, fp in zip(self.grad_norms, self.full_passes):
            if not math.isnan(g) and g <= eps:
                return fp
        return None

    def validate(self):
        fp = self.full_passes
        assert all(b >= a for a, b in zip(fp, fp[1:])), "full passes must not decrease"
        taus = self.tau_events
        assert all(b > a for a, b in zip(taus, taus[1:])), "tau events must increase"

    def rows(self):
        for i in range(len(self.steps)):
            yield (
                self.steps[i],
                self.losses[i],
                self.grad_norms[i],
                self.full_passes[i],
                self.wall_clocks[i],
                self.recombinations[i],
            )

    def to_csv(self, path):
        """Atomic write (temp file + rename); floats use shortest round-trip repr."""
        directory = os.path.dirname(os.path.abspath(path))
        os.makedirs(directory, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
        try:
            with os.fdopen(fd, "w", newline="") as fh:
                writer = _csv.writer(fh, lineterminator="\n")
                writer.writerow(CSV_COLUMNS)
                for step, loss, gn, fp, wall, rec in self.rows():
                    writer.writerow([step, repr(loss), repr(gn), repr(fp), repr(wall), rec])
            os.replace(tmp, path)
        finally:
            if os.path.exists(tmp):
                os.unlink(tmp)

    @classmethod
    def from_csv(cls, path):
        trace = cls()
        with open(path, newline="") as fh:
            reader = _csv.reader(fh)
            header = tuple(next(reader))
            if header != CSV_COLUMNS:
                raise ValueError(f"unexpected trace columns {header}")
            for row in reader:
                trace.steps.append(int(row[0]))
                trace.losses.append(float(row[1]))
                trace.grad_norms.append(float(row[2]))
                trace.full_passes.append(float(row[3]))
                trace.wall_clocks.append(float(row[4]))
                trace.recombinations.append(int(row[5]))
        return trace

def csv_bytes_without_wall(path):
    """Trace file content with the wall-clock column projected out (for
    byte-identity comparison between reruns)."""
    out = []
    with open(path, newline="") as fh:
        for row in _csv.reader(fh):
            out.append(",".join(row[:4] + row[5:]))
    return "\n".join(out).encode()
