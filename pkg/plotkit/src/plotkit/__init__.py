"""Render optimizer trace CSVs and sweep aggregates as figures.

Reads only the documented file schemas (trace CSV columns: step, loss,
grad_norm, full_pass_equivalent, wall_clock_s, recombinations; aggregate
CSV keyed by gamma and n with a ratio column); no coupling to the optimizer
package internals.
"""

from .io import SchemaError, load_aggregate, load_trace
from .plots import PlotSpec, plot_ratio_curves, plot_traces, render

__version__ = "0.1.0"

__all__ = [
    "SchemaError",
    "load_aggregate",
    "load_trace",
    "PlotSpec",
    "plot_ratio_curves",
    "plot_traces",
    "render",
]
