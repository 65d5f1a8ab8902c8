"""Figure builders: optimizer trace curves and ratio-vs-step-size curves."""

import math
import os
from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .io import load_aggregate, load_trace

X_CHOICES = ("full_pass_equivalent", "wall_clock_s", "step")
Y_CHOICES = ("loss", "grad_norm", "ratio")


@dataclass
class PlotSpec:
    inputs: list
    out: str
    kind: str = "traces"  # or "ratio"
    x: str = "full_pass_equivalent"
    y: str = "loss"
    logx: bool = False
    logy: bool = True
    title: str = ""

    def validate(self):
        if self.kind not in ("traces", "ratio"):
            raise ValueError(f"kind must be traces|ratio, got {self.kind!r}")
        if not self.inputs:
            raise ValueError("at least one input file is required")
        if self.kind == "traces":
            if self.x not in X_CHOICES:
                raise ValueError(f"x must be one of {X_CHOICES}")
            if self.y not in ("loss", "grad_norm"):
                raise ValueError("y must be loss or grad_norm for trace plots")


def _label(path):
    return os.path.splitext(os.path.basename(path))[0]


def plot_traces(spec):
    """One line per trace file; legend from file names; writes a raster image."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for path in spec.inputs:
        data = load_trace(path)
        xs, ys = [], []
        for xv, yv in zip(data[spec.x], data[spec.y]):
            if not (math.isnan(xv) or math.isnan(yv)):
                xs.append(xv)
                ys.append(yv)
        ax.plot(xs, ys, label=_label(path))
    ax.set_xlabel(spec.x)
    ax.set_ylabel(spec.y)
    if spec.logx:
        ax.set_xscale("log")
    if spec.logy:
        ax.set_yscale("log")
    if spec.title:
        ax.set_title(spec.title)
    ax.legend()
    fig.tight_layout()
    fig.savefig(spec.out, dpi=150)
    plt.close(fig)
    return spec.out


def plot_ratio_curves(spec):
    """Runtime-ratio vs step-size curves from a sweep aggregate, one line
    per sample size n."""
    rows = []
    for path in spec.inputs:
        rows.extend(load_aggregate(path))
    by_n = {}
    for row in rows:
        by_n.setdefault(row["n"], []).append((row["gamma"], row["ratio"]))
    fig, ax = plt.subplots(figsize=(6, 4))
    for n in sorted(by_n):
        points = sorted(by_n[n])
        ax.plot(
            [p[0] for p in points],
            [p[1] for p in points],
            marker="o",
            label=f"N = {int(n)}",
        )
    ax.set_xlabel("step size")
    ax.set_ylabel("runtime ratio")
    ax.set_xscale("log")
    if spec.logy:
        ax.set_yscale("log")
    if spec.title:
        ax.set_title(spec.title)
    ax.legend()
    fig.tight_layout()
    fig.savefig(spec.out, dpi=150)
    plt.close(fig)
    return spec.out


def render(spec):
    spec.validate()
    if spec.kind == "ratio":
        return plot_ratio_curves(spec)
    return plot_traces(spec)
