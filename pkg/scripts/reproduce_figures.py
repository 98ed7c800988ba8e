"""Run every figure preset and print a one-line summary per grid point.

    python scripts/reproduce_figures.py [--out results] [--reps N] [fig9 fig12 ...]

Without figure names all presets run in order; ``--reps`` shrinks them for a
quick look. Tables, JSON summaries and SVG plots land in ``--out``.
"""

import argparse
import time

from ranslice.experiments import PRESETS, preset, run_experiment

SKIP = {"spec_hash", "seed", "trials", "failed", "nonconverged_reps"}


def summarise(row, grid_keys):
    point = " ".join(f"{k}={row[k]}" for k in grid_keys)
    metrics = " ".join(
        f"{k}={row[k]:.4g}"
        for k in row
        if k not in SKIP and k not in grid_keys and not k.endswith(("_ci95", "_std")) and isinstance(row[k], float)
    )
    return f"  {point}  {metrics}  nonconverged={row['nonconverged']}"


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("figures", nargs="*", default=list(PRESETS))
    ap.add_argument("--out", default="results")
    ap.add_argument("--reps", type=int)
    ap.add_argument("--seed", type=int)
    ap.add_argument("--workers", type=int)
    args = ap.parse_args()
    overrides = {k: v for k, v in (("repetitions", args.reps), ("seed", args.seed), ("workers", args.workers)) if v is not None}
    for name in args.figures:
        spec = preset(name, out_dir=args.out, **overrides)
        start = time.perf_counter()
        result = run_experiment(spec)
        print(f"{name} ({spec.kind}, {spec.repetitions} reps, {time.perf_counter() - start:.0f}s) -> {result.csv_path}")
        for row in result.rows:
            print(summarise(row, list(spec.grid)))


if __name__ == "__main__":
    main()
