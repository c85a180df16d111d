"""Fleet-sizing rules, Erlang-B loss model, and worst-case occupancy oracles."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum


class Rule(str, Enum):
    NAIVE = "naive"
    DUTY_CYCLE = "duty_cycle"
    ERLANG_B = "erlang_b"
    PROPOSED = "proposed"


@dataclass(frozen=True)
class FleetPlan:
    rule: Rule
    m: int
    r: float
    k: int


@dataclass(frozen=True)
class OccupancyTrace:
    """Wave-by-wave recovery occupancy from a deterministic oracle run.

    C(t) counts vehicles in recovery at each recorded instant, including the
    cohort that depletes at that instant; F(t) = k - C(t) is the flight-ready
    count the incoming wave can draw on. A wave whose size exceeds F(t) marks
    spare exhaustion.
    """

    times: list[float]
    in_recovery: list[int]
    flight_ready: list[int]
    exhausted_at: float | None


def erlang_b_blocking(k: int, a: float) -> float:
    """Blocking probability B(k, a), by the stable ascending recursion.

    B(0, a) = 1;  B(j, a) = a B(j-1, a) / (j + a B(j-1, a)).
    """
    if k < 0:
        raise ValueError("server count k must be non-negative")
    if a < 0:
        raise ValueError("offered load a must be non-negative")
    b = 1.0
    for j in range(1, k + 1):
        b = a * b / (j + a * b)
    return b


def erlang_b_required(a: float, epsilon: float) -> int:
    """Smallest k with B(k, a) <= epsilon, found by incrementing from 0."""
    if not (0 < epsilon < 1):
        raise ValueError("epsilon must be in (0, 1)")
    k = 0
    b = 1.0
    while b > epsilon:
        k += 1
        b = a * b / (k + a * b)
    return k


def size_fleet(rule: Rule, m: int, r: float, epsilon: float = 0.01) -> FleetPlan:
    """Spare count k for one sizing rule at (m, r)."""
    if m < 1:
        raise ValueError("m must be a positive integer")
    if r <= 0:
        raise ValueError("recovery ratio r must be positive")
    rule = Rule(rule)
    if rule is Rule.NAIVE:
        k = m
    elif rule is Rule.DUTY_CYCLE:
        k = m * math.ceil(r)
    elif rule is Rule.PROPOSED:
        k = m * (math.ceil(r) + 1)
    else:
        k = erlang_b_required(m * r, epsilon)
    return FleetPlan(rule=rule, m=m, r=r, k=k)


def size_all(m: int, r: float, epsilon: float = 0.01) -> dict[Rule, FleetPlan]:
    return {rule: size_fleet(rule, m, r, epsilon) for rule in Rule}


def compounding_reference(epsilon: float, h: float) -> float:
    """Mission success under independent per-request blocking: (1-eps)^h."""
    if not (0 <= epsilon < 1):
        raise ValueError("epsilon must be in [0, 1)")
    if h < 0:
        raise ValueError("handover count h must be non-negative")
    return (1.0 - epsilon) ** h


def _run_cohort_oracle(
    m: int, r: float, k: int, waves: int, t_active: float,
    request_events: list[tuple[float, int]],
) -> OccupancyTrace:
    """Shared dynamics for both oracles.

    Events are (time, cohort_size) request groups in chronological order.
    At each event: recovery completions due at or before the instant are
    processed first (a cohort recovering for exactly r*t_active is available
    again); the depleting cohort then enters recovery; the group is served
    only if the flight-ready count F = k - C covers it.
    """
    eps = 1e-9
    pending: list[tuple[float, int]] = []  # (exit_time, size), FIFO by entry
    c = 0
    times: list[float] = []
    in_recovery: list[int] = []
    flight_ready: list[int] = []
    exhausted_at: float | None = None

    for t, size in request_events:
        while pending and pending[0][0] <= t + eps:
            c -= pending.pop(0)[1]
        pending.append((t + r * t_active, size))
        c += size
        f = k - c
        if f < size and exhausted_at is None:
            exhausted_at = t
        times.append(t)
        in_recovery.append(c)
        flight_ready.append(f)
    return OccupancyTrace(times, in_recovery, flight_ready, exhausted_at)


def _check_oracle_args(m: int, r: float, k: int, waves: int) -> None:
    if m < 1:
        raise ValueError("m must be a positive integer")
    if r <= 0:
        raise ValueError("recovery ratio r must be positive")
    if k < 0:
        raise ValueError("spare count k must be non-negative")
    if waves < math.ceil(r) + 2:
        raise ValueError("waves must be at least ceil(r) + 2 to cover the boundary burst")


def worst_case_oracle(m: int, r: float, k: int, waves: int, t_active: float = 1.0) -> OccupancyTrace:
    """Fully phase-aligned replacement demand: a cohort of m every t_active.

    Executable form of the worst-case occupancy bound (C never exceeds
    m*ceil(r)) and of the boundary burst: with k = m*ceil(r) and non-integer
    r > 1 the first unserved wave is exactly wave ceil(r), while
    k = m*(ceil(r) + 1) keeps every wave served.
    """
    _check_oracle_args(m, r, k, waves)
    events = [(j * t_active, m) for j in range(1, waves + 1)]
    return _run_cohort_oracle(m, r, k, waves, t_active, events)


def staggered_oracle(m: int, r: float, k: int, waves: int, t_active: float = 1.0) -> OccupancyTrace:
    """Same dynamics with positions offset by t_active / ceil(r).

    Position p requests at j*t_active + (p mod ceil(r)) * t_active/ceil(r);
    positions sharing an offset form one request group.
    """
    _check_oracle_args(m, r, k, waves)
    phases = math.ceil(r)
    group_size = [0] * phases
    for p in range(m):
        group_size[p % phases] += 1
    events = []
    for j in range(1, waves + 1):
        for c in range(phases):
            if group_size[c]:
                events.append((j * t_active + c * t_active / phases, group_size[c]))
    events.sort(key=lambda e: e[0])
    return _run_cohort_oracle(m, r, k, waves, t_active, events)
