"""Benchmark: compiled simulation kernel vs pure-Python fallback.

Runs identical trials through both kernels, checks the outputs are
bit-identical, and reports the speedup. Usage:

    python benchmarks/bench_kernel.py [--scenario s5] [--trials 20]
"""

import argparse
import time

import numpy as np

from uavfleet.engine import KERNEL_COMPILED, load_pure_kernel, run_trial
from uavfleet.engine import _kernel as default_kernel
from uavfleet.harness import make_trial_inputs
from uavfleet.scenario import builtin_scenario_path, derive_mission, load_scenario
from uavfleet.sizing import Rule, size_fleet


def bench(kernel, label, cfg, plan, inputs, repeats):
    t0 = time.perf_counter()
    results = []
    for layout, routes, noise in inputs:
        for _ in range(repeats):
            results.append(run_trial(cfg, plan, layout, routes, noise, kernel=kernel))
    elapsed = time.perf_counter() - t0
    per_trial = elapsed / len(results)
    print(f"{label:<22} {elapsed:8.3f} s total   {per_trial * 1000:8.2f} ms/trial")
    return results, per_trial


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--scenario", default="s5")
    parser.add_argument("--trials", type=int, default=10)
    parser.add_argument("--repeats", type=int, default=1)
    args = parser.parse_args()

    cfg = load_scenario(builtin_scenario_path(args.scenario))
    mission = derive_mission(cfg)
    plan = size_fleet(Rule.PROPOSED, mission.m, mission.r)
    inputs = [make_trial_inputs(cfg, mission.m, 1234, t) for t in range(args.trials)]

    print(f"scenario={args.scenario} m={plan.m} k={plan.k} trials={args.trials} "
          f"(default kernel compiled: {KERNEL_COMPILED})")

    pure = load_pure_kernel()
    fast_results, fast_t = bench(default_kernel, "default kernel", cfg, plan, inputs, args.repeats)
    pure_results, pure_t = bench(pure, "pure-Python kernel", cfg, plan, inputs, args.repeats)

    for a, b in zip(fast_results, pure_results):
        assert a.success == b.success
        assert a.request_times == [float(t) for t in b.request_times]
        assert a.duration == float(b.duration)
        assert a.min_battery == float(b.min_battery)
        assert np.array_equal(a.concurrency_trace, b.concurrency_trace)
    print(f"outputs bit-identical across kernels; speedup x{pure_t / fast_t:.1f}")


if __name__ == "__main__":
    main()
