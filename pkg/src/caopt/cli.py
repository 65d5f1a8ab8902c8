"""Command line interface: run / sweep / verify / gen-data."""

import argparse
import sys

import numpy as np

from . import bench, data as data_mod
from .errors import CaoptError
from .measure import DiscreteMeasure, eliminate_one, recombine, recombine_hierarchical, verify_recombination
from .models import Dataset, ModelSpec, loss, mean_gradient


def _cmd_run(args):
    cfg = bench.load_config(args.config)
    summary = bench.run(cfg, out_dir=args.out, seed_override=args.seed)
    failures = [e for e in summary["optimizers"] if "error" in e]
    for entry in summary["optimizers"]:
        if "error" in entry:
            print(f"{entry['name']}: ERROR {entry['error']}")
        else:
            print(
                f"{entry['name']}: loss={entry['final_loss']:.6g} "
                f"wall={entry['wall_time_s']:.3f}s "
                f"full_passes={entry['full_pass_equivalent']:.3f}"
            )
    return 1 if failures else 0


def _cmd_sweep(args):
    cfg = bench.load_config(args.config)
    path = bench.sweep(cfg, out_dir=args.out, seed_override=args.seed, threads=args.threads)
    print(f"aggregate written to {path}")
    return 0


def _check(name, ok, failures):
    print(f"{'PASS' if ok else 'FAIL'}: {name}")
    if not ok:
        failures.append(name)


def _cmd_verify(args):
    """Seeded invariant battery: recombination contracts and gradient checks."""
    failures = []
    rng = np.random.default_rng(2024)
    for N in (10, 100, 1000):
        for n in (1, 2, 3, 5):
            F = rng.standard_normal((N, n))
            mu = DiscreteMeasure.uniform(N)
            for fn in (recombine, recombine_hierarchical):
                res = fn(F, mu)
                _check(
                    f"{fn.__name__} N={N} n={n}: support<=n+1, moments within 1e-9",
                    res.measure.size <= n + 1 and verify_recombination(F, mu, res, 1e-9),
                    failures,
                )
    F = rng.standard_normal((8, 2))
    w = np.full(8, 1.0 / 8)
    w2 = eliminate_one(F, w)
    _check(
        "eliminate_one preserves mass and moments, zeroes an atom",
        (w2 == 0).any()
        and abs(w2.sum() - 1.0) < 1e-12
        and np.allclose(F.T @ w2, F.T @ w, atol=1e-12),
        failures,
    )
    for family in ("logistic", "least_squares"):
        model = ModelSpec(family)
        X = rng.standard_normal((40, 3))
        y = (rng.random(40) < 0.5).astype(float) if family == "logistic" else rng.standard_normal(40)
        ds = Dataset(X, y)
        theta = rng.standard_normal(3)
        g = mean_gradient(model, theta, ds)
        h = 1e-6
        fd = np.empty(3)
        for j in range(3):
            e = np.zeros(3)
            e[j] = h
            fd[j] = (loss(model, theta + e, ds) - loss(model, theta - e, ds)) / (2 * h)
        _check(
            f"finite-difference gradient match ({family})",
            np.allclose(g, fd, rtol=1e-6, atol=1e-8),
            failures,
        )
    print(f"{'OK' if not failures else 'FAILED'}: {len(failures)} failures")
    return 1 if failures else 0


def _cmd_gen_data(args):
    if args.generator == "gen_dataset_A":
        if args.d is None:
            print("gen_dataset_A requires --d", file=sys.stderr)
            return 2
        ds, _ = data_mod.gen_dataset_A(args.n, args.d, args.seed)
    elif args.generator in data_mod.GENERATORS:
        ds = data_mod.GENERATORS[args.generator](args.n, args.seed)
    else:
        print(f"unknown generator {args.generator!r}", file=sys.stderr)
        return 2
    bench.write_dataset_csv(ds, args.out)
    print(f"wrote {ds.n} rows x {ds.d} features to {args.out}")
    return 0


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="caopt",
        description="Measure-recombination optimization benchmark harness",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run every optimizer in a config")
    p_run.add_argument("config")
    p_run.add_argument("--out", default=None, help="override the config output_dir")
    p_run.add_argument("--seed", type=int, default=None, help="override optimizer seeds")
    p_run.set_defaults(func=_cmd_run)

    p_sweep = sub.add_parser("sweep", help="run a config over its (gamma, n) grid")
    p_sweep.add_argument("config")
    p_sweep.add_argument("--out", default=None)
    p_sweep.add_argument("--seed", type=int, default=None)
    p_sweep.add_argument("--threads", type=int, default=1)
    p_sweep.set_defaults(func=_cmd_sweep)

    p_verify = sub.add_parser("verify", help="run the seeded invariant battery")
    p_verify.set_defaults(func=_cmd_verify)

    p_gen = sub.add_parser("gen-data", help="write a generated dataset as CSV")
    p_gen.add_argument("generator")
    p_gen.add_argument("--n", type=int, required=True)
    p_gen.add_argument("--seed", type=int, required=True)
    p_gen.add_argument("--d", type=int, default=None)
    p_gen.add_argument("--out", required=True)
    p_gen.set_defaults(func=_cmd_gen_data)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CaoptError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
