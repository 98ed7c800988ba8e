"""Command line entry point.

    ranslice run config.toml [--seed N] [--reps N] [--out DIR]
    ranslice run --preset fig9 --reps 20 --out results/
    ranslice presets

A config file holds the :class:`ExperimentSpec` fields at top level with
``[grid]``, ``[base]`` and ``[options]`` tables::

    kind = "poa_vs_ratio"
    repetitions = 50
    seed = 7
    [grid]
    n_rrhs = [4, 8, 12, 16]
    [base]
    n_mvnos = 4
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from .experiments import PRESETS, ExperimentSpec, preset, run_experiment
from .ingest import IngestError, ScenarioError

log = logging.getLogger("ranslice")


def load_config(path) -> dict:
    with open(path, "rb") as fh:
        return tomllib.load(fh)


def build_spec(args) -> ExperimentSpec:
    overrides = {
        "seed": args.seed,
        "repetitions": args.reps,
        "out_dir": args.out,
        "towers": args.towers,
        "workers": args.workers,
    }
    if args.preset:
        spec = preset(args.preset, **overrides)
        if args.config:
            raise ValueError("give either a config file or --preset, not both")
        return spec
    if not args.config:
        raise ValueError("need a config file or --preset")
    cfg = load_config(args.config)
    cfg.setdefault("name", Path(args.config).stem)
    cfg.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentSpec(**cfg)


def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ranslice", description="RAN slicing game experiments")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run an experiment")
    run.add_argument("config", nargs="?", help="TOML experiment config")
    run.add_argument("--preset", choices=sorted(PRESETS, key=lambda s: int(s[3:])))
    run.add_argument("--seed", type=int)
    run.add_argument("--reps", type=int)
    run.add_argument("--out")
    run.add_argument("--towers", help="OpenCellID CSV (default: bundled Boston fixture)")
    run.add_argument("--workers", type=int)
    run.add_argument("--no-plot", action="store_true")
    sub.add_parser("presets", help="list presets")
    return p


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.command == "presets":
        for name, kw in PRESETS.items():
            print(f"{name}\t{kw['kind']}\t{kw['grid']}")
        return 0
    try:
        spec = build_spec(args)
        result = run_experiment(spec, plot=not args.no_plot)
    except (OSError, ValueError, KeyError, TypeError, tomllib.TOMLDecodeError, IngestError, ScenarioError) as exc:
        print(f"ranslice: error: {exc}", file=sys.stderr)
        return 2
    bad = sum(r["nonconverged"] for r in result.rows)
    print(f"{spec.name}: {len(result.rows)} grid points x {spec.repetitions} reps -> {result.csv_path}")
    if bad:
        print(f"{spec.name}: {bad} trials did not converge (see nonconverged column)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
