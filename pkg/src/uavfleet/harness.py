"""Experiment harness: seeded Monte Carlo batches, sweeps, and CSV emission.

Trial seeds derive solely from (base_seed, scenario, trial index), never
from the sizing method, so every method faces identical site layouts and
travel-time draws. Workers return rows keyed by trial index and results are
emitted in seed order, so output bytes do not depend on scheduling.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, geometry, stats, streams
from .engine import TrialResult, layout_fingerprint, run_trial
from .scenario import ConfigError, ScenarioConfig, check_feasibility, derive_mission, load_scenario, with_wind_cv
from .sizing import FleetPlan, Rule, compounding_reference, size_fleet

SUMMARY_COLUMNS = [
    "scenario", "method", "m", "r", "k", "n_trials", "success_rate", "wilson_lb",
    "mean_handovers", "burst_concentration", "p90_concurrent", "p90_window_demand",
]
TRIAL_COLUMNS = [
    "scenario", "method", "trial", "m", "r", "k", "success", "sites_scanned",
    "site_count", "handover_count", "request_count", "exhaustion_count",
    "exhaustions_in_top_decile", "max_window_demand", "first_exhaustion_time",
    "duration", "min_battery", "layout_hash", "concurrency_histogram",
]
SWEEP_COLUMNS = ["cv", "method", "success_rate", "wilson_lb"]
REFERENCE_COLUMNS = ["h", "success_probability"]
COMPARISON_COLUMNS = ["scenario", "erlang_b_success", "mean_handovers_proposed", "independence_reference"]

DEFAULT_METHODS = [Rule.NAIVE, Rule.DUTY_CYCLE, Rule.ERLANG_B, Rule.PROPOSED]


@dataclass(frozen=True)
class ExperimentSpec:
    scenario_files: list[str]
    methods: list[Rule] = field(default_factory=lambda: list(DEFAULT_METHODS))
    n_trials: int = 1000
    base_seed: int = 20240917
    epsilon: float = 0.01
    cv_sweep: list[float] | None = None
    output_dir: str = "out"
    jobs: int = 0  # 0 = available parallelism
    dump_sites: bool = False
    event_log: bool = False

    def __post_init__(self):
        if self.n_trials < 1:
            raise ConfigError("n_trials must be at least 1")
        if not self.methods:
            raise ConfigError("methods must be non-empty")


@dataclass
class TrialRecord:
    """Per-method outcome of one trial, plus the shared-layout fingerprint."""

    trial: int
    layout_hash: str
    results: dict[Rule, TrialResult]


def make_trial_inputs(cfg: ScenarioConfig, m: int, base_seed: int, trial: int):
    """Layout, routes, and noise for one trial (method-independent)."""
    layout_seed = streams.trial_seed_sequence(base_seed, cfg.name, trial, streams.STREAM_LAYOUT)
    part_seed = streams.trial_seed_sequence(base_seed, cfg.name, trial, streams.STREAM_PARTITION)
    common_seed = streams.trial_seed_sequence(base_seed, cfg.name, trial, streams.STREAM_COMMON)
    layout = geometry.generate_sites(cfg, layout_seed)
    layout = geometry.partition_sites(layout, m, part_seed)
    routes = geometry.build_all_routes(layout, m, cfg.base_position)
    noise = geometry.make_travel_noise(cfg, common_seed, streams.trial_leg_key(base_seed, cfg.name, trial))
    return layout, routes, noise


def run_one_trial(args) -> TrialRecord:
    cfg, plans, base_seed, trial, collect_events = args
    m = next(iter(plans.values())).m
    layout, routes, noise = make_trial_inputs(cfg, m, base_seed, trial)
    report = check_feasibility(cfg, layout.sites)
    if not report.feasible:
        raise ConfigError(
            f"scenario {cfg.name!r} trial {trial}: sites out of reach: {report.offending_sites}"
        )
    results = {
        rule: run_trial(cfg, plan, layout, routes, noise, collect_events=collect_events)
        for rule, plan in plans.items()
    }
    return TrialRecord(trial=trial, layout_hash=layout_fingerprint(layout, routes, noise), results=results)


def run_scenario(
    cfg: ScenarioConfig,
    methods: list[Rule],
    n_trials: int,
    base_seed: int,
    epsilon: float = 0.01,
    jobs: int = 0,
    collect_events: bool = False,
) -> tuple[dict[Rule, FleetPlan], list[TrialRecord]]:
    """All trials for one scenario; records come back in trial order."""
    mission = derive_mission(cfg)
    plans = {rule: size_fleet(rule, mission.m, mission.r, epsilon) for rule in methods}
    args = [(cfg, plans, base_seed, t, collect_events) for t in range(n_trials)]
    n_jobs = jobs if jobs > 0 else (os.cpu_count() or 1)
    if n_jobs <= 1 or n_trials < 4:
        records = [run_one_trial(a) for a in args]
    else:
        chunk = max(1, n_trials // (n_jobs * 8))
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            records = list(pool.map(run_one_trial, args, chunksize=chunk))
    return plans, records


def trial_row(cfg: ScenarioConfig, plan: FleetPlan, rec: TrialRecord, rule: Rule) -> dict:
    res = rec.results[rule]
    inside, total = stats.exhaustions_in_top_decile(res.exhaustion_times, res.request_times, res.duration)
    hist = np.bincount(res.concurrency_trace, minlength=1)
    first_exh = res.exhaustion_times[0] if res.exhaustion_times else ""
    return {
        "scenario": cfg.name,
        "method": rule.value,
        "trial": rec.trial,
        "m": plan.m,
        "r": repr(plan.r),
        "k": plan.k,
        "success": int(res.success),
        "sites_scanned": res.sites_scanned,
        "site_count": res.site_count,
        "handover_count": res.handover_count,
        "request_count": len(res.request_times),
        "exhaustion_count": total,
        "exhaustions_in_top_decile": inside,
        "max_window_demand": stats.max_window_demand(res.request_times, res.duration, res.timestep),
        "first_exhaustion_time": first_exh,
        "duration": repr(res.duration),
        "min_battery": repr(res.min_battery),
        "layout_hash": rec.layout_hash,
        "concurrency_histogram": ";".join(str(int(c)) for c in hist),
    }


def summary_row(cfg: ScenarioConfig, plan: FleetPlan, agg: stats.AggregateStats) -> dict:
    return {
        "scenario": cfg.name,
        "method": plan.rule.value,
        "m": plan.m,
        "r": repr(plan.r),
        "k": plan.k,
        "n_trials": agg.n_trials,
        "success_rate": repr(agg.success_rate),
        "wilson_lb": repr(agg.wilson_lb),
        "mean_handovers": "" if agg.mean_handovers != agg.mean_handovers else repr(agg.mean_handovers),
        "burst_concentration": "" if agg.burst_concentration is None else repr(agg.burst_concentration),
        "p90_concurrent": repr(agg.p90_concurrent_recovery),
        "p90_window_demand": repr(agg.p90_window_demand),
    }


def write_csv(path: Path, columns: list[str], rows: list[dict]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)


def config_digest(paths: list[str]) -> str:
    h = hashlib.sha256()
    for p in sorted(paths):
        h.update(Path(p).read_bytes())
    return h.hexdigest()[:16]


def write_manifest(out: Path, spec: ExperimentSpec, extra: dict | None = None) -> None:
    manifest = {
        "tool_version": __version__,
        "base_seed": spec.base_seed,
        "n_trials": spec.n_trials,
        "methods": [m.value for m in spec.methods],
        "epsilon": spec.epsilon,
        "scenario_files": [str(p) for p in spec.scenario_files],
        "config_digest": config_digest(spec.scenario_files),
    }
    if extra:
        manifest.update(extra)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "run_manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def dump_sites_csv(out: Path, cfg: ScenarioConfig, m: int, base_seed: int) -> None:
    layout, routes, _ = make_trial_inputs(cfg, m, base_seed, 0)
    rows = [
        {"site_id": i, "x": repr(float(layout.sites[i, 0])), "y": repr(float(layout.sites[i, 1])),
         "uav": int(layout.cluster_assignment[i])}
        for i in range(len(layout.sites))
    ]
    write_csv(out / f"sites_{cfg.name}_trial0.csv", ["site_id", "x", "y", "uav"], rows)


def dump_event_log(out: Path, cfg: ScenarioConfig, plans: dict[Rule, FleetPlan], base_seed: int) -> None:
    m = next(iter(plans.values())).m
    layout, routes, noise = make_trial_inputs(cfg, m, base_seed, 0)
    from .engine import EVENT_NAMES

    for rule, plan in plans.items():
        res = run_trial(cfg, plan, layout, routes, noise, collect_events=True)
        rows = [
            {"time": repr(float(t)), "event_type": EVENT_NAMES[code], "uav_id": int(v), "detail": int(d)}
            for t, code, v, d in res.events
        ]
        write_csv(out / f"events_{cfg.name}_{rule.value}_trial0.csv",
                  ["time", "event_type", "uav_id", "detail"], rows)


def cmd_run(spec: ExperimentSpec) -> Path:
    """Run the Monte Carlo batch; writes trials.csv, summary.csv, manifest."""
    out = Path(spec.output_dir)
    trial_rows: list[dict] = []
    summary_rows: list[dict] = []
    comparison_rows: list[dict] = []
    for path in spec.scenario_files:
        cfg = load_scenario(path)
        plans, records = run_scenario(
            cfg, spec.methods, spec.n_trials, spec.base_seed, spec.epsilon, spec.jobs
        )
        per_method_aggregates = {}
        for rule in spec.methods:
            plan = plans[rule]
            results = [rec.results[rule] for rec in records]
            agg = stats.aggregate(results)
            per_method_aggregates[rule] = agg
            summary_rows.append(summary_row(cfg, plan, agg))
            trial_rows.extend(trial_row(cfg, plan, rec, rule) for rec in records)
        if Rule.ERLANG_B in per_method_aggregates and Rule.PROPOSED in per_method_aggregates:
            h_bar = per_method_aggregates[Rule.PROPOSED].mean_handovers
            if h_bar == h_bar:  # has successful trials
                comparison_rows.append({
                    "scenario": cfg.name,
                    "erlang_b_success": repr(per_method_aggregates[Rule.ERLANG_B].success_rate),
                    "mean_handovers_proposed": repr(h_bar),
                    "independence_reference": repr(compounding_reference(spec.epsilon, h_bar)),
                })
        if spec.dump_sites:
            dump_sites_csv(out, cfg, plans[spec.methods[0]].m, spec.base_seed)
        if spec.event_log:
            dump_event_log(out, cfg, plans, spec.base_seed)

    write_csv(out / "trials.csv", TRIAL_COLUMNS, trial_rows)
    write_csv(out / "summary.csv", SUMMARY_COLUMNS, summary_rows)
    if comparison_rows:
        write_csv(out / "erlang_reference.csv", COMPARISON_COLUMNS, comparison_rows)
    write_manifest(out, spec)
    return out


def cmd_sweep(spec: ExperimentSpec) -> Path:
    """Wind-CV sweep on the given scenarios; writes sweep.csv."""
    if not spec.cv_sweep:
        raise ConfigError("sweep requires a non-empty cv list")
    for cv in spec.cv_sweep:
        if cv < 0:
            raise ConfigError("wind CV values must be non-negative")
    out = Path(spec.output_dir)
    rows: list[dict] = []
    for path in spec.scenario_files:
        base_cfg = load_scenario(path)
        for cv in spec.cv_sweep:
            cfg = with_wind_cv(base_cfg, cv)
            plans, records = run_scenario(
                cfg, spec.methods, spec.n_trials, spec.base_seed, spec.epsilon, spec.jobs
            )
            for rule in spec.methods:
                results = [rec.results[rule] for rec in records]
                agg = stats.aggregate(results)
                rows.append({
                    "cv": repr(float(cv)),
                    "method": rule.value,
                    "success_rate": repr(agg.success_rate),
                    "wilson_lb": repr(agg.wilson_lb),
                })
    write_csv(out / "sweep.csv", SWEEP_COLUMNS, rows)
    write_manifest(out, spec, {"cv_sweep": [float(c) for c in spec.cv_sweep]})
    return out


def cmd_reference(epsilon: float, h_values, out_path: Path) -> Path:
    """Tabulate the independence reference (1-eps)^h for plotting."""
    rows = [
        {"h": repr(float(h)), "success_probability": repr(compounding_reference(epsilon, float(h)))}
        for h in h_values
    ]
    write_csv(out_path, REFERENCE_COLUMNS, rows)
    return out_path


def recompute_summary_from_trials(trial_rows: list[dict]) -> list[dict]:
    """Rebuild summary rows from per-trial rows (consistency contract).

    Uses only per-trial CSV fields; must reproduce cmd_run's summary exactly.
    """
    by_cell: dict[tuple[str, str], list[dict]] = {}
    order: list[tuple[str, str]] = []
    for row in trial_rows:
        cell = (row["scenario"], row["method"])
        if cell not in by_cell:
            by_cell[cell] = []
            order.append(cell)
        by_cell[cell].append(row)

    out = []
    for cell in order:
        rows = sorted(by_cell[cell], key=lambda r: int(r["trial"]))
        n = len(rows)
        n_succ = sum(int(r["success"]) for r in rows)
        handovers = [int(r["handover_count"]) for r in rows if int(r["success"])]
        mean_h = sum(handovers) / len(handovers) if handovers else float("nan")
        inside = sum(int(r["exhaustions_in_top_decile"]) for r in rows)
        total = sum(int(r["exhaustion_count"]) for r in rows)
        pooled: list[int] = []
        for r in rows:
            for level, count in enumerate(r["concurrency_histogram"].split(";")):
                pooled.extend([level] * int(count))
        p90_c = float(stats.nearest_rank(pooled, 0.9)) if pooled else 0.0
        p90_w = float(stats.nearest_rank([int(r["max_window_demand"]) for r in rows], 0.9))
        out.append({
            "scenario": cell[0],
            "method": cell[1],
            "m": int(rows[0]["m"]),
            "r": rows[0]["r"],
            "k": int(rows[0]["k"]),
            "n_trials": n,
            "success_rate": repr(n_succ / n),
            "wilson_lb": repr(stats.wilson_lower_bound(n_succ, n)),
            "mean_handovers": "" if mean_h != mean_h else repr(mean_h),
            "burst_concentration": "" if total == 0 else repr(inside / total),
            "p90_concurrent": repr(p90_c),
            "p90_window_demand": repr(p90_w),
        })
    return out
