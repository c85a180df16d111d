"""Aggregation of trial outcomes into reliability and synchronization metrics."""

from __future__ import annotations

import math
from dataclasses import dataclass

WILSON_Z = 1.96          # two-sided 95% interval, lower endpoint reported
WINDOW_MINUTES = 5.0     # demand windows for burst metrics
TOP_DECILE = 0.10


@dataclass(frozen=True)
class AggregateStats:
    n_trials: int
    n_success: int
    success_rate: float
    wilson_lb: float
    mean_handovers: float            # over successful trials; nan if none
    burst_concentration: float | None  # None = no exhaustion events observed
    p90_concurrent_recovery: float
    p90_window_demand: float


def wilson_lower_bound(successes: int, n: int, z: float = WILSON_Z) -> float:
    """Lower endpoint of the two-sided 95% Wilson score interval.

    (p + z^2/2n - z*sqrt(p(1-p)/n + z^2/4n^2)) / (1 + z^2/n)
    """
    if n < 1:
        raise ValueError("n must be a positive integer")
    if not (0 <= successes <= n):
        raise ValueError("successes must lie in [0, n]")
    p = successes / n
    z2 = z * z
    center = p + z2 / (2 * n)
    half = z * math.sqrt(p * (1 - p) / n + z2 / (4 * n * n))
    return (center - half) / (1 + z2 / n)


def certify(wilson_lb: float, threshold: float = 0.95) -> bool:
    """Reliability certification: Wilson lower bound at or above threshold."""
    return wilson_lb >= threshold


def nearest_rank(values, q: float) -> float:
    """Nearest-rank quantile: ceil(q*n)-th smallest value."""
    vals = sorted(values)
    if not vals:
        raise ValueError("cannot take a quantile of an empty sequence")
    rank = max(1, math.ceil(q * len(vals)))
    return vals[rank - 1]


def demand_windows(requests, duration: float) -> list[int]:
    """Request counts per non-overlapping 5-minute window over [0, duration]."""
    n_windows = max(1, math.ceil(duration / WINDOW_MINUTES))
    counts = [0] * n_windows
    for t in requests:
        idx = min(int(t / WINDOW_MINUTES), n_windows - 1)
        counts[idx] += 1
    return counts


def top_decile_windows(window_counts: list[int]) -> set[int]:
    """Indices of the busiest ceil(10%) windows; ties favor earlier windows."""
    n = len(window_counts)
    n_top = max(1, math.ceil(TOP_DECILE * n))
    ranked = sorted(range(n), key=lambda i: (-window_counts[i], i))
    return set(ranked[:n_top])


def exhaustions_in_top_decile(exhaustions, requests, duration: float) -> tuple[int, int]:
    """(events inside top-decile windows, total events) for one trial."""
    if not exhaustions:
        return 0, 0
    counts = demand_windows(requests, duration)
    top = top_decile_windows(counts)
    n_windows = len(counts)
    inside = 0
    for t in exhaustions:
        idx = min(int(t / WINDOW_MINUTES), n_windows - 1)
        if idx in top:
            inside += 1
    return inside, len(exhaustions)


def burst_concentration(exhaustions, requests, duration: float) -> float | None:
    """Fraction of exhaustion events inside top-decile demand windows."""
    inside, total = exhaustions_in_top_decile(exhaustions, requests, duration)
    if total == 0:
        return None
    return inside / total


def max_window_demand(requests, duration: float, timestep: float) -> int:
    """Largest request count in any 5-minute sliding window (step = timestep)."""
    if not requests:
        return 0
    reqs = sorted(requests)
    n_steps = max(0, math.ceil((duration - WINDOW_MINUTES) / timestep)) + 1
    best = 0
    lo = 0
    hi = 0
    n = len(reqs)
    for s in range(n_steps):
        start = s * timestep
        end = start + WINDOW_MINUTES
        while lo < n and reqs[lo] < start:
            lo += 1
        if hi < lo:
            hi = lo
        while hi < n and reqs[hi] <= end:
            hi += 1
        if hi - lo > best:
            best = hi - lo
    return best


def percentile_metrics(trials, q: float = 0.9) -> tuple[float, float]:
    """(q-quantile of pooled concurrency traces, q-quantile of per-trial max
    sliding-window request counts) over a list of TrialResult-like objects."""
    if not trials:
        raise ValueError("percentile_metrics requires at least one trial")
    pooled = []
    per_trial_max = []
    for t in trials:
        pooled.extend(int(c) for c in t.concurrency_trace)
        per_trial_max.append(max_window_demand(t.request_times, t.duration, t.timestep))
    if not pooled:
        pooled = [0]
    return float(nearest_rank(pooled, q)), float(nearest_rank(per_trial_max, q))


def aggregate(trials, q: float = 0.9) -> AggregateStats:
    """Fold a list of TrialResult-like objects into one stats row."""
    n = len(trials)
    if n == 0:
        raise ValueError("cannot aggregate zero trials")
    n_success = sum(1 for t in trials if t.success)
    handovers = [t.handover_count for t in trials if t.success]
    mean_h = sum(handovers) / len(handovers) if handovers else float("nan")

    inside = 0
    total = 0
    for t in trials:
        i, tot = exhaustions_in_top_decile(t.exhaustion_times, t.request_times, t.duration)
        inside += i
        total += tot
    conc = (inside / total) if total else None

    p90_c, p90_w = percentile_metrics(trials, q)
    return AggregateStats(
        n_trials=n,
        n_success=n_success,
        success_rate=n_success / n,
        wilson_lb=wilson_lower_bound(n_success, n),
        mean_handovers=mean_h,
        burst_concentration=conc,
        p90_concurrent_recovery=p90_c,
        p90_window_demand=p90_w,
    )
