"""Configuration-driven experiment runner.

Experiments are described by one YAML file (schema version 1, unknown keys
rejected).  ``run`` executes every optimizer in the config on the same
dataset and writes one trace CSV per optimizer plus a summary JSON with
speedup ratios against the first optimizer listed.  ``sweep`` repeats a
gd-vs-cagd style config over a (gamma, n) grid and aggregates runtime
ratios.  Wall clock is measured around the optimizer loops only, so ratios
are comparable across machines; all randomness is seeded in the config.
"""

import json
import math
import os
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import yaml

from . import data as data_mod
from .baselines import SGDConfig, adam, sag
from .bcd import CaBCDConfig, GSPlan, NutiniPlan, RandomPlan, cabcd
from .errors import ConfigError
from .models import Dataset, ModelSpec
from .optimizers import CaGDConfig, cagd, gd, momentum, neg_gradient

SCHEMA_VERSION = 1

_DATASET_KEYS = {"kind", "name", "params", "add_intercept", "csv", "pipeline"}
_CSV_KEYS = {"path", "feature_columns", "target_column", "outlier_threshold"}
_PIPELINE_KEYS = {"tensor_power_alpha", "scale", "pca_components"}
_MODEL_KEYS = {"family", "l1_lambda"}
_OPT_COMMON = {"name", "kind", "seed"}
_OPT_KEYS = {
    "gd": _OPT_COMMON | {"gamma", "eps_grad", "eps_loss", "it_max"},
    "cagd": _OPT_COMMON
    | {
        "gamma",
        "eps_grad",
        "eps_loss",
        "it_max",
        "it_max_ca",
        "hessian_mode",
        "hessian_c",
        "oracle",
    },
    "cabcd": _OPT_COMMON
    | {
        "gamma",
        "eps_grad",
        "eps_loss",
        "it_max",
        "it_max_ca",
        "max_full_passes",
        "plan",
        "use_caratheodory",
        "oracle",
    },
    "sag": _OPT_COMMON | {"learning_rate", "batch_size", "it_max"},
    "adam": _OPT_COMMON
    | {"learning_rate", "batch_size", "it_max", "beta1", "beta2", "eps_stability"},
}
_PLAN_KEYS = {"type", "s", "percentage", "fraction", "rule_id"}
_TOP_KEYS = {"version", "dataset", "model", "optimizers", "output_dir", "sweep"}
_SWEEP_KEYS = {"gamma", "n"}


def _reject_unknown(mapping, allowed, path):
    for key in mapping:
        if key not in allowed:
            raise ConfigError(f"{path}.{key}: unknown key")


def _require(mapping, key, path, types=None):
    if key not in mapping:
        raise ConfigError(f"{path}.{key}: required key missing")
    value = mapping[key]
    if types is not None and not isinstance(value, types):
        raise ConfigError(f"{path}.{key}: expected {types}, got {type(value).__name__}")
    return value


def load_config(path):
    with open(path) as fh:
        raw = yaml.safe_load(fh)
    return validate_config(raw)


def validate_config(raw):
    if not isinstance(raw, dict):
        raise ConfigError("config: top level must be a mapping")
    _reject_unknown(raw, _TOP_KEYS, "config")
    version = _require(raw, "version", "config", int)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"config.version: expected {SCHEMA_VERSION}, got {version}")
    dataset = _require(raw, "dataset", "config", dict)
    _reject_unknown(dataset, _DATASET_KEYS, "config.dataset")
    kind = _require(dataset, "kind", "config.dataset", str)
    if kind == "generator":
        name = _require(dataset, "name", "config.dataset", str)
        if name not in data_mod.GENERATORS and name != "gen_dataset_A":
            raise ConfigError(f"config.dataset.name: unknown generator {name!r}")
        params = _require(dataset, "params", "config.dataset", dict)
        if "seed" not in params:
            raise ConfigError("config.dataset.params.seed: seeds must be explicit")
    elif kind == "csv":
        csv_spec = _require(dataset, "csv", "config.dataset", dict)
        _reject_unknown(csv_spec, _CSV_KEYS, "config.dataset.csv")
        _require(csv_spec, "path", "config.dataset.csv", str)
        _require(csv_spec, "feature_columns", "config.dataset.csv", list)
        _require(csv_spec, "target_column", "config.dataset.csv", str)
        if "pipeline" in dataset:
            _reject_unknown(dataset["pipeline"], _PIPELINE_KEYS, "config.dataset.pipeline")
    else:
        raise ConfigError(f"config.dataset.kind: expected generator|csv, got {kind!r}")
    model = _require(raw, "model", "config", dict)
    _reject_unknown(model, _MODEL_KEYS, "config.model")
    family = _require(model, "family", "config.model", str)
    if family not in ("logistic", "least_squares"):
        raise ConfigError(f"config.model.family: unknown family {family!r}")
    optimizers = _require(raw, "optimizers", "config", list)
    if not optimizers:
        raise ConfigError("config.optimizers: at least one optimizer is required")
    seen_names = set()
    for i, opt in enumerate(optimizers):
        path = f"config.optimizers[{i}]"
        if not isinstance(opt, dict):
            raise ConfigError(f"{path}: expected a mapping")
        kind = _require(opt, "kind", path, str)
        if kind not in _OPT_KEYS:
            raise ConfigError(f"{path}.kind: unknown optimizer {kind!r}")
        _reject_unknown(opt, _OPT_KEYS[kind], path)
        name = opt.get("name", kind)
        if name in seen_names:
            raise ConfigError(f"{path}.name: duplicate optimizer name {name!r}")
        seen_names.add(name)
        if kind in ("sag", "adam") and "seed" not in opt:
            raise ConfigError(f"{path}.seed: seeds must be explicit for {kind}")
        if "plan" in opt:
            _reject_unknown(opt["plan"], _PLAN_KEYS, f"{path}.plan")
    _require(raw, "output_dir", "config", str)
    if "sweep" in raw:
        _reject_unknown(raw["sweep"], _SWEEP_KEYS, "config.sweep")
        for key in _SWEEP_KEYS:
            values = _require(raw["sweep"], key, "config.sweep", list)
            if not values:
                raise ConfigError(f"config.sweep.{key}: must be a nonempty list")
    return raw


def build_dataset(cfg, n_override=None):
    spec = cfg["dataset"]
    if spec["kind"] == "generator":
        params = dict(spec["params"])
        if n_override is not None:
            params["n"] = n_override
        name = spec["name"]
        if name == "gen_dataset_A":
            ds, _theta = data_mod.gen_dataset_A(**params)
        else:
            ds = data_mod.GENERATORS[name](**params)
    else:
        csv_spec = spec["csv"]
        result = data_mod.load_csv(
            csv_spec["path"],
            csv_spec["feature_columns"],
            csv_spec["target_column"],
            csv_spec.get("outlier_threshold"),
        )
        ds = result.dataset
        if "pipeline" in spec:
            pl = spec["pipeline"]
            X = data_mod.apply_pipeline(
                ds.X,
                data_mod.PipelineSpec(
                    tensor_power_alpha=pl.get("tensor_power_alpha", 1),
                    scale=pl.get("scale", False),
                    pca_components=pl.get("pca_components"),
                ),
            )
            ds = Dataset(X, ds.y)
    if spec.get("add_intercept", False):
        ds = Dataset(data_mod.add_intercept(ds.X), ds.y)
    return ds


def _build_oracle(spec):
    if spec is None or spec == "neg_gradient":
        return neg_gradient()
    if isinstance(spec, dict) and "momentum" in spec:
        return momentum(float(spec["momentum"]))
    raise ConfigError(f"oracle spec {spec!r} not understood")


def _build_plan(spec):
    plan_type = spec.get("type", "gs")
    s = int(spec.get("s", 2))
    if plan_type == "gs":
        return GSPlan(s=s, percentage=float(spec.get("percentage", 0.75)))
    if plan_type == "random":
        return RandomPlan(s=s, fraction=float(spec.get("fraction", 0.5)))
    if plan_type == "nutini":
        return NutiniPlan(spec["rule_id"], s=s)
    raise ConfigError(f"plan type {plan_type!r} not understood")


def run_optimizer(opt, model, ds, seed_override=None):
    kind = opt["kind"]
    seed = seed_override if seed_override is not None else opt.get("seed", 0)
    if kind == "gd":
        cfg = CaGDConfig(
            gamma=float(opt["gamma"]),
            eps_grad=float(opt.get("eps_grad", 1e-3)),
            eps_loss=float(opt.get("eps_loss", 0.0)),
            it_max=int(opt.get("it_max", 10_000)),
        )
        return gd(model, ds, cfg)
    if kind == "cagd":
        cfg = CaGDConfig(
            gamma=float(opt["gamma"]),
            eps_grad=float(opt.get("eps_grad", 1e-3)),
            eps_loss=float(opt.get("eps_loss", 0.0)),
            it_max=int(opt.get("it_max", 10_000)),
            it_max_ca=opt.get("it_max_ca"),
            hessian_mode=opt.get("hessian_mode", "rank1"),
            hessian_c=float(opt.get("hessian_c", 1.0)),
        )
        return cagd(model, ds, cfg, oracle=_build_oracle(opt.get("oracle")))
    if kind == "cabcd":
        cfg = CaBCDConfig(
            gamma=float(opt["gamma"]),
            eps_grad=float(opt.get("eps_grad", 1e-3)),
            eps_loss=float(opt.get("eps_loss", 0.0)),
            it_max=int(opt.get("it_max", 1_000)),
            it_max_ca=int(opt.get("it_max_ca", 100)),
            max_full_passes=opt.get("max_full_passes"),
            seed=int(seed),
        )
        return cabcd(
            model,
            ds,
            cfg,
            _build_plan(opt.get("plan", {})),
            use_caratheodory=bool(opt.get("use_caratheodory", True)),
            oracle=_build_oracle(opt.get("oracle")),
        )
    if kind in ("sag", "adam"):
        cfg = SGDConfig(
            learning_rate=float(opt["learning_rate"]),
            batch_size=int(opt.get("batch_size", 256)),
            it_max=int(opt.get("it_max", 1_000)),
            seed=int(seed),
            beta1=float(opt.get("beta1", 0.9)),
            beta2=float(opt.get("beta2", 0.999)),
            eps_stability=float(opt.get("eps_stability", 1e-8)),
        )
        return sag(model, ds, cfg) if kind == "sag" else adam(model, ds, cfg)
    raise ConfigError(f"unknown optimizer kind {kind!r}")


def _atomic_write_json(payload, path):
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)


def run(cfg, out_dir=None, seed_override=None, n_override=None):
    """Execute every optimizer in the config; returns the summary dict.

    Per-optimizer errors are recorded in the summary without aborting the
    remaining optimizers.
    """
    out_dir = out_dir or cfg["output_dir"]
    os.makedirs(out_dir, exist_ok=True)
    ds = build_dataset(cfg, n_override=n_override)
    model = ModelSpec(cfg["model"]["family"], float(cfg["model"].get("l1_lambda", 0.0)))
    summary = {"schema_version": SCHEMA_VERSION, "optimizers": []}
    first = None
    for opt in cfg["optimizers"]:
        name = opt.get("name", opt["kind"])
        entry = {"name": name, "kind": opt["kind"]}
        try:
            t0 = time.perf_counter()
            trace = run_optimizer(opt, model, ds, seed_override=seed_override)
            wall = time.perf_counter() - t0
            trace.to_csv(os.path.join(out_dir, f"{name}.csv"))
            entry.update(
                final_loss=trace.final_loss,
                final_grad_norm=_nan_to_none(trace.final_grad_norm),
                wall_time_s=wall,
                total_recombinations=trace.total_recombinations,
                full_pass_equivalent=trace.total_full_passes,
            )
            if first is None:
                first = entry
            elif "wall_time_s" in first:
                entry["wall_ratio_vs_first"] = first["wall_time_s"] / wall
                entry["fpe_ratio_vs_first"] = (
                    first["full_pass_equivalent"] / entry["full_pass_equivalent"]
                )
        except Exception as exc:
            entry["error"] = f"{type(exc).__name__}: {exc}"
        summary["optimizers"].append(entry)
    _atomic_write_json(summary, os.path.join(out_dir, "summary.json"))
    return summary


def _nan_to_none(x):
    return None if (x is None or math.isnan(x)) else x


def sweep(cfg, out_dir=None, seed_override=None, threads=1):
    """Run the config once per (gamma, n) grid point and aggregate ratios.

    The ratio column is wall time of the first optimizer over the second,
    mirroring the gd/cagd runtime comparison; full-pass ratios are emitted
    alongside.  Grid points are independent and may run in worker threads.
    """
    if "sweep" not in cfg:
        raise ConfigError("config.sweep: section required for sweep runs")
    out_dir = out_dir or cfg["output_dir"]
    os.makedirs(out_dir, exist_ok=True)
    grid = [(g, n) for g in cfg["sweep"]["gamma"] for n in cfg["sweep"]["n"]]

    def one(point):
        gamma, n = point
        sub = {
            **cfg,
            "optimizers": [
                {**opt, "gamma": gamma} if "gamma" in opt else dict(opt)
                for opt in cfg["optimizers"]
            ],
        }
        sub.pop("sweep")
        subdir = os.path.join(out_dir, f"gamma_{gamma}_n_{n}")
        summary = run(sub, out_dir=subdir, seed_override=seed_override, n_override=n)
        return gamma, n, summary

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, grid))
    else:
        results = [one(p) for p in grid]

    names = [opt.get("name", opt["kind"]) for opt in cfg["optimizers"]]
    lines = []
    header = ["gamma", "n"]
    for name in names:
        header += [f"{name}_wall_s", f"{name}_full_passes"]
    if len(names) >= 2:
        header.append("ratio")
        header += [f"fpe_ratio_{name}" for name in names[1:]]
    lines.append(",".join(header))
    for gamma, n, summary in results:
        by_name = {e["name"]: e for e in summary["optimizers"]}
        row = [repr(float(gamma)), str(n)]
        for name in names:
            entry = by_name[name]
            if "error" in entry:
                row += ["nan", "nan"]
            else:
                row += [repr(entry["wall_time_s"]), repr(entry["full_pass_equivalent"])]
        if len(names) >= 2:
            e0, e1 = by_name[names[0]], by_name[names[1]]
            if "error" in e0 or "error" in e1:
                row.append("nan")
            else:
                row.append(repr(e0["wall_time_s"] / e1["wall_time_s"]))
            for name in names[1:]:
                ek = by_name[name]
                if "error" in e0 or "error" in ek:
                    row.append("nan")
                else:
                    row.append(
                        repr(e0["full_pass_equivalent"] / ek["full_pass_equivalent"])
                    )
        lines.append(",".join(row))
    agg_path = os.path.join(out_dir, "aggregate.csv")
    fd, tmp = tempfile.mkstemp(dir=out_dir, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write("\n".join(lines) + "\n")
        os.replace(tmp, agg_path)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)
    return agg_path


def write_dataset_csv(ds, path):
    header = [f"x{i}" for i in range(ds.d)] + ["y"]
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(",".join(header) + "\n")
            for i in range(ds.n):
                row = [repr(float(v)) for v in ds.X[i]] + [repr(float(ds.y[i]))]
                fh.write(",".join(row) + "\n")
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)
