"""Command-line front end: size / run / sweep / reference / oracle.

Exit codes: 0 = completed, 1 = usage or configuration error,
2 = internal invariant violation in the engine.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .engine import EngineInvariantError
from .harness import DEFAULT_METHODS, ExperimentSpec, cmd_reference, cmd_run, cmd_sweep
from .scenario import ConfigError, builtin_scenario_path
from .sizing import Rule, size_all, staggered_oracle, worst_case_oracle

_METHOD_ALIASES = {
    "naive": Rule.NAIVE,
    "duty_cycle": Rule.DUTY_CYCLE,
    "duty-cycle": Rule.DUTY_CYCLE,
    "erlang_b": Rule.ERLANG_B,
    "erlang-b": Rule.ERLANG_B,
    "proposed": Rule.PROPOSED,
    "all": None,
}


def _parse_methods(text: str) -> list[Rule]:
    methods: list[Rule] = []
    for token in text.split(","):
        token = token.strip().lower()
        if not token:
            continue
        if token == "all":
            return list(DEFAULT_METHODS)
        if token not in _METHOD_ALIASES:
            raise ConfigError(f"unknown method {token!r}; choose from naive, duty_cycle, erlang_b, proposed")
        methods.append(_METHOD_ALIASES[token])
    if not methods:
        raise ConfigError("no methods given")
    return methods


def _resolve_scenarios(values: list[str]) -> list[str]:
    paths = []
    for v in values:
        p = Path(v)
        paths.append(str(p) if p.exists() else str(builtin_scenario_path(v)))
    return paths


def _add_common_run_args(sub):
    sub.add_argument("--scenario", action="append", required=True,
                     help="scenario file path or built-in name (s1..s5); repeatable")
    sub.add_argument("--methods", default="all", help="comma-separated subset of sizing rules")
    sub.add_argument("--trials", type=int, default=1000)
    sub.add_argument("--seed", type=int, default=20240917)
    sub.add_argument("--epsilon", type=float, default=0.01)
    sub.add_argument("--out", default="out", help="output directory")
    sub.add_argument("--jobs", type=int, default=0, help="worker processes (0 = all cores)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="uavfleet", description=__doc__)
    subs = parser.add_subparsers(dest="command", required=True)

    p_size = subs.add_parser("size", help="print spare counts under all four sizing rules")
    p_size.add_argument("--m", type=int, required=True)
    p_size.add_argument("--r", type=float, required=True)
    p_size.add_argument("--epsilon", type=float, default=0.01)

    p_run = subs.add_parser("run", help="Monte Carlo batch over scenarios")
    _add_common_run_args(p_run)
    p_run.add_argument("--dump-sites", action="store_true", help="write trial-0 site layout CSVs")
    p_run.add_argument("--event-log", action="store_true", help="write trial-0 event log CSVs")

    p_sweep = subs.add_parser("sweep", help="wind-variability sweep")
    _add_common_run_args(p_sweep)
    p_sweep.add_argument("--cv-list", required=True, help="comma-separated wind CV values")

    p_ref = subs.add_parser("reference", help="tabulate the independence reference (1-eps)^h")
    p_ref.add_argument("--epsilon", type=float, default=0.01)
    p_ref.add_argument("--h-max", type=int, default=100)
    p_ref.add_argument("--out", default="out/reference.csv")

    p_orc = subs.add_parser("oracle", help="deterministic phase-alignment oracle printout")
    p_orc.add_argument("--m", type=int, required=True)
    p_orc.add_argument("--r", type=float, required=True)
    p_orc.add_argument("--k", type=int, required=True)
    p_orc.add_argument("--waves", type=int, default=10)
    p_orc.add_argument("--mode", choices=["worst_case", "staggered"], default="worst_case")
    return parser


def _cmd_size(args) -> int:
    plans = size_all(args.m, args.r, args.epsilon)
    print(f"m={args.m} r={args.r} epsilon={args.epsilon}")
    print(f"{'rule':<12} k")
    for rule, plan in plans.items():
        print(f"{rule.value:<12} {plan.k}")
    return 0


def _cmd_oracle(args) -> int:
    oracle = worst_case_oracle if args.mode == "worst_case" else staggered_oracle
    trace = oracle(args.m, args.r, args.k, args.waves)
    print(f"{args.mode} oracle: m={args.m} r={args.r} k={args.k} waves={args.waves}")
    print(f"{'t/T_active':>10}  {'in_recovery':>11}  {'flight_ready':>12}")
    for t, c, f in zip(trace.times, trace.in_recovery, trace.flight_ready):
        print(f"{t:>10.4f}  {c:>11d}  {f:>12d}")
    if trace.exhausted_at is None:
        print("no spare exhaustion")
    else:
        print(f"spare exhaustion at t = {trace.exhausted_at:.4f} x T_active")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "size":
            return _cmd_size(args)
        if args.command == "oracle":
            return _cmd_oracle(args)
        if args.command == "reference":
            out = cmd_reference(args.epsilon, range(1, args.h_max + 1), Path(args.out))
            print(f"wrote {out}")
            return 0
        if args.command == "run":
            spec = ExperimentSpec(
                scenario_files=_resolve_scenarios(args.scenario),
                methods=_parse_methods(args.methods),
                n_trials=args.trials,
                base_seed=args.seed,
                epsilon=args.epsilon,
                output_dir=args.out,
                jobs=args.jobs,
                dump_sites=args.dump_sites,
                event_log=args.event_log,
            )
            out = cmd_run(spec)
            print(f"wrote {out / 'summary.csv'}")
            return 0
        if args.command == "sweep":
            spec = ExperimentSpec(
                scenario_files=_resolve_scenarios(args.scenario),
                methods=_parse_methods(args.methods),
                n_trials=args.trials,
                base_seed=args.seed,
                epsilon=args.epsilon,
                cv_sweep=[float(c) for c in args.cv_list.split(",") if c.strip()],
                output_dir=args.out,
                jobs=args.jobs,
            )
            out = cmd_sweep(spec)
            print(f"wrote {out / 'sweep.csv'}")
            return 0
        raise ConfigError(f"unknown command {args.command!r}")
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except EngineInvariantError as exc:
        print(f"engine invariant violation: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
