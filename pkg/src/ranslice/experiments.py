"""Seeded desk-scale experiments: trial functions, presets and the runner.

Each experiment kind maps a grid point and a repetition index to a dict of
metrics. Repetition ``k`` draws from ``SeedSequence([seed, k])`` at every
grid point, so neighbouring grid points share their random draws (common
random numbers) and trends are not buried in between-scenario noise.
"""

from __future__ import annotations

import csv
import hashlib
import io
import itertools
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from functools import lru_cache
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import __version__
from .costs import congestion_levels, deployment_costs
from .equilibrium import (
    FixedStep,
    LearnerState,
    default_fixed_step,
    learning_step,
    price_of_anarchy,
    softmax_policy,
    solve_brd,
    solve_learning,
    solve_social_optimum,
)
from .ingest import (
    BOSTON,
    Region,
    ScenarioConfig,
    build_cluster,
    bundled_towers,
    generate_scenario,
    parse_towers,
)
from .plotting import emit_plot
from .pricing import PricingState, make_policy, profit, served_load, update_prices

log = logging.getLogger(__name__)

KINDS = (
    "poa_vs_ratio",
    "poa_vs_weight",
    "runtime_compare",
    "stepsize_sweep",
    "congestion_vs_ratio",
    "congestion_vs_mu",
    "congestion_vs_weight",
    "profit_vs_price",
    "dynamic_tracking",
)

# grid keys that are not ScenarioConfig fields
_EXTRA_KEYS = {"ratio", "step_factor", "policy"}


@dataclass
class ExperimentSpec:
    """One experiment: a kind, a product grid and fixed settings.

    ``base`` overrides :class:`ScenarioConfig` defaults; ``options`` holds
    kind-specific knobs (solver tolerances, slot counts, ...). ``x`` and
    ``series`` name the grid keys used for the plot.
    """

    kind: str
    grid: dict[str, list]
    repetitions: int = 50
    seed: int = 0
    out_dir: str = "results"
    name: str = ""
    base: dict[str, Any] = field(default_factory=dict)
    options: dict[str, Any] = field(default_factory=dict)
    x: str | None = None
    series: str | None = None
    y: str | None = None
    towers: str | None = None
    workers: int = 1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown experiment kind {self.kind!r}")
        if self.repetitions < 1:
            raise ValueError("repetitions must be at least 1")
        if not self.grid or any(len(v) == 0 for v in self.grid.values()):
            raise ValueError("grid must be nonempty")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")
        bad = set(self.grid) - _EXTRA_KEYS - set(ScenarioConfig.__dataclass_fields__)
        if bad:
            raise ValueError(f"unknown grid keys {sorted(bad)}")
        self.grid = {k: list(v) for k, v in self.grid.items()}
        self.name = self.name or self.kind

    def points(self) -> list[dict[str, Any]]:
        keys = list(self.grid)
        return [dict(zip(keys, combo)) for combo in itertools.product(*(self.grid[k] for k in keys))]

    def canonical(self) -> dict:
        """Fields that determine the numbers (not where they are written)."""
        return {
            "kind": self.kind,
            "grid": self.grid,
            "repetitions": self.repetitions,
            "seed": self.seed,
            "base": self.base,
            "options": self.options,
            "towers": _towers_digest(self.towers),
        }

    @property
    def spec_hash(self) -> str:
        blob = json.dumps(self.canonical(), sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def _towers_digest(path) -> str:
    p = Path(path) if path else bundled_towers()
    return hashlib.sha256(p.read_bytes()).hexdigest()[:16]


# --------------------------------------------------------------------------
# presets (desk-scale versions of the evaluation figures)

PRESETS: dict[str, dict] = {
    "fig5": dict(
        kind="poa_vs_ratio",
        grid={"n_mvnos": [4, 10, 20], "ratio": [1, 2, 3, 5], "sinr_min_db": [-5.0, 5.0]},
        base={"mu": 0.8},
        repetitions=20,
        x="ratio",
        series="n_mvnos",
        y="poa",
    ),
    "fig6": dict(
        kind="poa_vs_weight",
        grid={"price_weight_max": [5e-4, 5e-3, 5e-2, 5e-1], "n_rrhs": [20, 60]},
        base={"mu": 0.8, "n_mvnos": 10},
        repetitions=20,
        x="price_weight_max",
        series="n_rrhs",
        y="poa",
    ),
    "fig7": dict(
        kind="runtime_compare",
        grid={"n_rrhs": [10, 20, 40, 60, 80, 100]},
        base={"mu": 0.8, "n_mvnos": 10},
        repetitions=5,
        x="n_rrhs",
        y="brd_iterations",
    ),
    "fig8": dict(
        kind="stepsize_sweep",
        grid={"step_factor": [0.25, 0.5, 1.0, 2.0], "n_rrhs": [20, 40]},
        base={"mu": 0.8, "n_mvnos": 10},
        repetitions=20,
        x="step_factor",
        series="n_rrhs",
        y="iterations",
    ),
    "fig9": dict(
        kind="congestion_vs_ratio",
        grid={"ratio": [1, 2, 3, 4, 5], "sinr_min_db": [-5.0, 5.0]},
        base={"mu": 0.8, "n_mvnos": 20, "price_weight_max": 5e-2},
        repetitions=50,
        x="ratio",
        series="sinr_min_db",
        y="congestion",
    ),
    "fig10": dict(
        kind="congestion_vs_mu",
        grid={"mu": [0.2, 0.4, 0.6, 0.8, 1.0], "sinr_min_db": [-5.0, 5.0]},
        base={"n_mvnos": 20, "n_rrhs": 40},
        repetitions=50,
        x="mu",
        series="sinr_min_db",
        y="congestion",
    ),
    "fig11": dict(
        kind="congestion_vs_weight",
        grid={"price_weight_max": [5e-4, 5e-3, 5e-2, 5e-1], "sinr_min_db": [-5.0, 5.0]},
        base={"mu": 0.8, "n_mvnos": 20, "n_rrhs": 40},
        repetitions=50,
        x="price_weight_max",
        series="sinr_min_db",
        y="congestion",
    ),
    "fig12": dict(
        kind="profit_vs_price",
        grid={"price_mean": [5.0, 10.0, 15.0, 20.0], "policy": ["uniform", "weighted", "adaptive"]},
        base={"mu": 0.8, "n_mvnos": 10, "n_rrhs": 20},
        options={"slots": 20, "brd_tol": 1e-6},
        repetitions=100,
        x="price_mean",
        series="policy",
        y="profit",
    ),
    "fig14": dict(
        kind="dynamic_tracking",
        grid={"n_rrhs": [10]},
        base={"mu": 0.8, "n_mvnos": 3},
        options={"segments": 10, "segment_length": 50},
        repetitions=20,
        x="n_rrhs",
        y="reconverged",
    ),
}


def preset(name: str, **overrides) -> ExperimentSpec:
    if name not in PRESETS:
        raise KeyError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    kw = dict(PRESETS[name])
    kw["name"] = name
    kw.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentSpec(**kw)


# --------------------------------------------------------------------------
# trials


@dataclass(frozen=True)
class TrialContext:
    kind: str
    point: tuple  # sorted (key, value) pairs
    rep: int
    seed: int
    base: tuple
    options: tuple
    towers: str | None


@lru_cache(maxsize=8)
def _load_towers(path: str | None):
    return parse_towers(path or bundled_towers())


def _config(ctx: TrialContext) -> tuple[ScenarioConfig, dict]:
    params = dict(ctx.base)
    point = dict(ctx.point)
    params.update({k: v for k, v in point.items() if k not in _EXTRA_KEYS})
    if "ratio" in point:
        params["n_rrhs"] = int(round(point["ratio"] * params.get("n_mvnos", ScenarioConfig.n_mvnos)))
    return ScenarioConfig(**params), point


def _scenario(cfg: ScenarioConfig, rng: np.random.Generator, region: Region = BOSTON, towers=None):
    cluster = build_cluster(_load_towers(towers), region, cfg.n_rrhs, seed=int(rng.integers(2**63)))
    return cluster, generate_scenario(cluster, cfg, rng)


def _equilibrium_metrics(game, xi) -> dict:
    phi = congestion_levels(game, xi)
    load = xi.sum(axis=0)
    return {
        "congestion": float(phi.mean()),
        "congestion_weighted": float((load * phi).sum() / max(load.sum(), 1e-300)),
        "deployment_cost": float(deployment_costs(game, xi).mean()),
        "n_rrhs_used": game.n_rrhs,
    }


def _trial_poa(ctx, cfg, point, rng, opts):
    _, scen = _scenario(cfg, rng, towers=ctx.towers)
    res = price_of_anarchy(scen.game, brd_tol=opts.get("brd_tol", 1e-10), opt_tol=opts.get("opt_tol", 1e-9))
    return {
        "poa": res.poa,
        "bound": res.bound,
        "cost_ne": res.cost_ne,
        "cost_opt": res.cost_opt,
    }, bool(res.ne.converged and res.opt.converged)


def _trial_congestion(ctx, cfg, point, rng, opts):
    _, scen = _scenario(cfg, rng, towers=ctx.towers)
    rep = solve_brd(scen.game, tol=opts.get("brd_tol", 1e-10), max_rounds=int(opts.get("max_rounds", 1000)))
    return _equilibrium_metrics(scen.game, rep.final_policy), rep.converged


def _trial_runtime(ctx, cfg, point, rng, opts):
    _, scen = _scenario(cfg, rng, towers=ctx.towers)
    game = scen.game
    t0 = time.perf_counter()
    brd = solve_brd(game, tol=opts.get("brd_tol", 1e-8))
    t1 = time.perf_counter()
    learn = solve_learning(game, tol=opts.get("learning_tol", 1e-6), max_iters=opts.get("max_iters", 200_000))
    t2 = time.perf_counter()
    opt = solve_social_optimum(game)
    t3 = time.perf_counter()
    metrics = {
        "brd_iterations": brd.iterations,
        "learning_iterations": learn.iterations,
        "opt_iterations": opt.iterations,
    }
    timing = {"brd_seconds": t1 - t0, "learning_seconds": t2 - t1, "opt_seconds": t3 - t2}
    return metrics, bool(brd.converged and learn.converged and opt.converged), timing


def _trial_stepsize(ctx, cfg, point, rng, opts):
    _, scen = _scenario(cfg, rng, towers=ctx.towers)
    game = scen.game
    gamma = default_fixed_step(game, factor=0.5 * point.get("step_factor", 1.0))
    rep = solve_learning(
        game,
        step_rule=FixedStep(gamma),
        tol=opts.get("learning_tol", 1e-6),
        max_iters=opts.get("max_iters", 100_000),
        criterion="rate",
    )
    return {"iterations": rep.iterations, "step": gamma}, rep.converged


def _resample_game(base_game, base_users, rng, spread):
    """New slot: MU counts and RRH coverage (hence N_r) jitter around their base values."""
    users = base_users * rng.uniform(1 - spread, 1 + spread, base_game.n_mvnos)
    caps = base_game.capacities
    qoe = np.minimum(base_game.qoe_users * rng.uniform(1 - spread, 1 + spread, base_game.n_rrhs), caps)
    return base_game.__class__.from_arrays(
        qoe, users, base_game.prices, base_game.price_weights, capacity=caps
    )


def _trial_profit(ctx, cfg, point, rng, opts):
    _, scen = _scenario(cfg, rng, towers=ctx.towers)
    slots = int(opts.get("slots", 20))
    spread = float(opts.get("spread", 0.3))
    sigma = float(opts.get("sigma", 0.1))
    c0 = float(opts.get("to_cost_coeff", 1.0))
    kind = point.get("policy", "uniform")
    mean_price = float(cfg.price_mean)
    base_users = scen.game.user_counts.copy()
    state = None
    xi = None
    profits = []
    converged = True
    for _ in range(slots):
        game = _resample_game(scen.game, base_users, rng, spread)
        if state is None:
            state = PricingState(make_policy(kind, game, mean_price), sigma=sigma, to_cost_coeff=c0)
        elif kind == "weighted":
            state = replace(state, prices=make_policy(kind, game, mean_price))
        game = game.with_prices(state.prices)
        # MVNOs re-slice from last slot's split, rescaled to the new demand
        xi0 = None if xi is None else xi * (game.user_counts / xi.sum(axis=1))[:, None]
        rep = solve_brd(game, xi0=xi0, tol=opts.get("brd_tol", 1e-6))
        xi = rep.final_policy
        converged &= rep.converged
        load = served_load(game, rep.final_policy)
        profits.append(profit(state, load))
        if kind == "adaptive":
            state = update_prices(state, load)
    tail = profits[len(profits) // 2:]
    return {"profit": float(np.mean(tail)), "final_mean_price": float(state.prices.mean())}, converged


def _trial_tracking(ctx, cfg, point, rng, opts):
    _, scen = _scenario(cfg, rng, towers=ctx.towers)
    segments = int(opts.get("segments", 10))
    length = int(opts.get("segment_length", 50))
    spread = float(opts.get("spread", 0.3))
    step_factor = float(opts.get("step_factor", 5.0))
    tol = float(opts.get("neighborhood", 1e-3))
    base_users = scen.game.user_counts.copy()
    game = scen.game
    state = None
    hits = []
    series = []
    converged = True
    for s in range(segments):
        if s > 0:
            game = _resample_game(scen.game, base_users, rng, spread)
        ne = solve_brd(game, tol=1e-12)
        converged &= ne.converged
        gamma = default_fixed_step(game, factor=0.5 * step_factor)
        if state is None:
            state = LearnerState.initial(game, FixedStep(gamma))
        else:
            state = LearnerState(state.scores, FixedStep(gamma), 0)
        xi = softmax_policy(state.scores, game.user_counts)
        scale = np.maximum(1.0, game.user_counts)[:, None]
        ne_phi = float(congestion_levels(game, ne.final_policy).mean())
        for _ in range(length):
            state, xi = learning_step(game, state, xi)
            series.append((s, float(congestion_levels(game, xi).mean()), ne_phi))
        err = float((np.abs(xi - ne.final_policy) / scale).max())
        if s > 0:
            hits.append(err <= tol)
    frac = float(np.mean(hits)) if hits else 1.0
    return {"reconverged": frac, "segments_checked": len(hits)}, converged, None, series


TRIALS: dict[str, Callable] = {
    "poa_vs_ratio": _trial_poa,
    "poa_vs_weight": _trial_poa,
    "runtime_compare": _trial_runtime,
    "stepsize_sweep": _trial_stepsize,
    "congestion_vs_ratio": _trial_congestion,
    "congestion_vs_mu": _trial_congestion,
    "congestion_vs_weight": _trial_congestion,
    "profit_vs_price": _trial_profit,
    "dynamic_tracking": _trial_tracking,
}


@dataclass
class TrialResult:
    point_index: int
    rep: int
    metrics: dict
    converged: bool
    timing: dict | None = None
    series: list | None = None
    error: str | None = None


def run_trial(index: int, ctx: TrialContext) -> TrialResult:
    rng = np.random.default_rng(np.random.SeedSequence([ctx.seed, ctx.rep]))
    cfg, point = _config(ctx)
    try:
        out = TRIALS[ctx.kind](ctx, cfg, point, rng, dict(ctx.options))
    except (ValueError, ArithmeticError) as exc:
        log.warning("trial %s rep %d failed: %s", dict(ctx.point), ctx.rep, exc)
        return TrialResult(index, ctx.rep, {}, False, error=f"{type(exc).__name__}: {exc}")
    metrics, converged = out[0], out[1]
    timing = out[2] if len(out) > 2 else None
    series = out[3] if len(out) > 3 else None
    return TrialResult(index, ctx.rep, metrics, bool(converged), timing, series)


# --------------------------------------------------------------------------
# aggregation and output


def mean_ci(values) -> tuple[float, float]:
    """Mean and 95% normal-approximation half-width."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        return float("nan"), float("nan")
    if v.size == 1:
        return float(v[0]), 0.0
    return float(v.mean()), float(1.96 * v.std(ddof=1) / np.sqrt(v.size))


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".10g")
    return str(v)


@dataclass
class ExperimentResult:
    spec: ExperimentSpec
    rows: list[dict]
    csv_path: Path
    json_path: Path
    svg_path: Path | None
    trials: list[TrialResult]


def aggregate(spec: ExperimentSpec, trials: list[TrialResult]) -> list[dict]:
    points = spec.points()
    by_point: dict[int, list[TrialResult]] = {i: [] for i in range(len(points))}
    for t in sorted(trials, key=lambda t: (t.point_index, t.rep)):
        by_point[t.point_index].append(t)
    rows = []
    for i, point in enumerate(points):
        ts = by_point[i]
        ok = [t for t in ts if t.error is None]
        metric_names = sorted({k for t in ok for k in t.metrics})
        row = {"spec_hash": spec.spec_hash, "seed": spec.seed}
        row.update(point)
        row["trials"] = len(ts)
        row["failed"] = sum(t.error is not None for t in ts)
        row["nonconverged"] = sum(not t.converged for t in ts)
        row["nonconverged_reps"] = " ".join(str(t.rep) for t in ts if not t.converged)
        for name in metric_names:
            mean, ci = mean_ci([t.metrics[name] for t in ok if name in t.metrics])
            row[f"{name}"] = mean
            row[f"{name}_ci95"] = ci
            row[f"{name}_std"] = float(np.std([t.metrics[name] for t in ok], ddof=1)) if len(ok) > 1 else 0.0
        rows.append(row)
    return rows


def write_csv(rows: list[dict], path: Path) -> Path:
    """RFC-4180 CSV (CRLF line ends, minimal quoting)."""
    fields: list[str] = []
    for row in rows:
        fields.extend(k for k in row if k not in fields)
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\r\n", restval="")
    w.writeheader()
    for row in rows:
        w.writerow({k: _fmt(v) for k, v in row.items()})
    path.write_bytes(buf.getvalue().encode("utf-8"))
    return path


def _contexts(spec: ExperimentSpec) -> list[tuple[int, TrialContext]]:
    base = tuple(sorted(spec.base.items()))
    options = tuple(sorted(spec.options.items()))
    out = []
    for i, point in enumerate(spec.points()):
        for rep in range(spec.repetitions):
            ctx = TrialContext(spec.kind, tuple(sorted(point.items())), rep, spec.seed, base, options, spec.towers)
            out.append((i, ctx))
    return out


def run_experiment(spec: ExperimentSpec, plot: bool = True) -> ExperimentResult:
    """Run every trial, then write ``<name>.csv``, ``<name>.json`` and ``<name>.svg``."""
    out_dir = Path(spec.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    jobs = _contexts(spec)
    started = time.perf_counter()
    if spec.workers > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            trials = list(pool.map(run_trial, *zip(*jobs)))
    else:
        trials = [run_trial(i, ctx) for i, ctx in jobs]
    elapsed = time.perf_counter() - started
    trials.sort(key=lambda t: (t.point_index, t.rep))
    rows = aggregate(spec, trials)

    stem = out_dir / spec.name
    csv_path = write_csv(rows, stem.with_suffix(".csv"))

    extras = {}
    timings = [t for t in trials if t.timing]
    if timings:
        # wall-clock varies run to run, so it stays out of the CSV
        per_point = {}
        for t in timings:
            per_point.setdefault(t.point_index, []).append(t.timing)
        extras["wall_clock_seconds"] = [
            {**spec.points()[i], **{k: mean_ci([d[k] for d in ds])[0] for k in ds[0]}}
            for i, ds in sorted(per_point.items())
        ]
    series = [t for t in trials if t.series]
    if series:
        first = series[0]
        series_path = out_dir / f"{spec.name}_series.csv"
        series_rows = [
            {"spec_hash": spec.spec_hash, "seed": spec.seed, "rep": first.rep, "iteration": k + 1,
             "segment": s, "congestion": c, "ne_congestion": ne}
            for k, (s, c, ne) in enumerate(first.series)
        ]
        write_csv(series_rows, series_path)
        extras["series_csv"] = series_path.name
        if plot:
            emit_plot(series_rows, "iteration", "congestion", out_dir / f"{spec.name}_series.svg",
                      title=f"{spec.name}: mean congestion", note=_note(spec))

    summary = {
        "spec": asdict(spec),
        "spec_hash": spec.spec_hash,
        "seed": spec.seed,
        "package_version": __version__,
        "rows": rows,
        "failures": [
            {"point": spec.points()[t.point_index], "rep": t.rep, "error": t.error}
            for t in trials if t.error
        ],
        "elapsed_seconds": elapsed,
        **extras,
    }
    json_path = stem.with_suffix(".json")
    json_path.write_text(json.dumps(summary, indent=2, sort_keys=True, default=_json_default) + "\n")

    svg_path = None
    if plot:
        y = spec.y or _default_y(rows)
        x = spec.x or next(iter(spec.grid))
        plot_rows = [r for r in rows if y in r]
        if plot_rows:
            svg_path = emit_plot(plot_rows, x, y, stem.with_suffix(".svg"), series=spec.series,
                                 title=f"{spec.name}: {y} vs {x}", note=_note(spec))
    return ExperimentResult(spec, rows, csv_path, json_path, svg_path, trials)


def _note(spec: ExperimentSpec) -> str:
    return f"spec_hash={spec.spec_hash} seed={spec.seed} repetitions={spec.repetitions}"


def _default_y(rows):
    skip = {"spec_hash", "seed", "trials", "failed", "nonconverged", "nonconverged_reps"}
    for k in rows[0]:
        if k not in skip and not k.endswith(("_ci95", "_std")) and isinstance(rows[0][k], float):
            return k
    raise ValueError("no numeric column to plot")


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, Path):
        return str(o)
    raise TypeError(f"cannot serialise {type(o).__name__}")
