"""Schema-checked loaders for trace and aggregate CSVs."""

import csv
import math

TRACE_COLUMNS = (
    "step",
    "loss",
    "grad_norm",
    "full_pass_equivalent",
    "wall_clock_s",
    "recombinations",
)
AGGREGATE_REQUIRED = ("gamma", "n", "ratio")


class SchemaError(Exception):
    """Input file does not match the documented schema; message names the
    offending column."""


def _read_rows(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file, expected a header row")
        rows = list(reader)
    return header, rows


def load_trace(path):
    """Parse one trace CSV into a dict of float lists keyed by column."""
    header, rows = _read_rows(path)
    if tuple(header) != TRACE_COLUMNS:
        missing = [c for c in TRACE_COLUMNS if c not in header]
        extra = [c for c in header if c not in TRACE_COLUMNS]
        detail = []
        if missing:
            detail.append(f"missing column(s) {missing}")
        if extra:
            detail.append(f"unexpected column(s) {extra}")
        if not detail:
            detail.append(f"column order must be {list(TRACE_COLUMNS)}")
        raise SchemaError(f"{path}: {'; '.join(detail)}")
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    data = {c: [] for c in TRACE_COLUMNS}
    for i, row in enumerate(rows, start=2):
        if len(row) != len(TRACE_COLUMNS):
            raise SchemaError(f"{path}: row {i} has {len(row)} fields")
        for col, value in zip(TRACE_COLUMNS, row):
            try:
                data[col].append(float(value))
            except ValueError:
                raise SchemaError(
                    f"{path}: row {i}, column '{col}': {value!r} is not numeric"
                )
    return data


def load_aggregate(path):
    """Parse a sweep aggregate CSV; needs gamma, n and ratio columns."""
    header, rows = _read_rows(path)
    for col in AGGREGATE_REQUIRED:
        if col not in header:
            raise SchemaError(f"{path}: missing column '{col}'")
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    idx = {c: header.index(c) for c in header}
    out = []
    for i, row in enumerate(rows, start=2):
        entry = {}
        for col in header:
            value = row[idx[col]] if idx[col] < len(row) else ""
            try:
                entry[col] = float(value)
            except ValueError:
                raise SchemaError(
                    f"{path}: row {i}, column '{col}': {value!r} is not numeric"
                )
        if math.isnan(entry["ratio"]):
            continue  # failed grid points are recorded as nan by the harness
        out.append(entry)
    if not out:
        raise SchemaError(f"{path}: no usable rows (all ratios nan)")
    return out
