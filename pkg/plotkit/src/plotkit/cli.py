"""Command line entry: a YAML spec file or flags mirroring PlotSpec."""

import argparse
import sys

import yaml

from .io import SchemaError
from .plots import PlotSpec, render

SPEC_KEYS = {"kind", "inputs", "out", "x", "y", "logx", "logy", "title"}


def spec_from_file(path):
    with open(path) as fh:
        raw = yaml.safe_load(fh)
    if not isinstance(raw, dict):
        raise ValueError(f"{path}: spec must be a mapping")
    unknown = set(raw) - SPEC_KEYS
    if unknown:
        raise ValueError(f"{path}: unknown spec key(s) {sorted(unknown)}")
    if "inputs" not in raw or "out" not in raw:
        raise ValueError(f"{path}: spec needs 'inputs' and 'out'")
    return PlotSpec(**raw)


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="plotkit",
        description="Render optimizer trace CSVs / sweep aggregates as figures",
    )
    parser.add_argument("spec", nargs="?", help="YAML spec file")
    parser.add_argument("inputs", nargs="*", help="input CSV files (flag mode)")
    parser.add_argument("--kind", choices=("traces", "ratio"), default="traces")
    parser.add_argument("--x", default="full_pass_equivalent")
    parser.add_argument("--y", default="loss")
    parser.add_argument("--logx", action="store_true")
    parser.add_argument("--no-logy", dest="logy", action="store_false")
    parser.add_argument("--title", default="")
    parser.add_argument("--out", default=None)
    args = parser.parse_args(argv)

    try:
        if args.spec and args.spec.endswith((".yaml", ".yml")):
            spec = spec_from_file(args.spec)
        else:
            inputs = ([args.spec] if args.spec else []) + list(args.inputs)
            if not args.out:
                parser.error("--out is required in flag mode")
            spec = PlotSpec(
                inputs=inputs,
                out=args.out,
                kind=args.kind,
                x=args.x,
                y=args.y,
                logx=args.logx,
                logy=args.logy,
                title=args.title,
            )
        out = render(spec)
    except (SchemaError, ValueError, OSError) as exc:
        print(f"plotkit: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
