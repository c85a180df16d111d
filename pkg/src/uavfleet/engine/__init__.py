"""Mission trial engine: state assembly around the timestep kernel.

The kernel import prefers the compiled extension built by setup.py; the
same source runs interpreted as a fallback (or when UAVFLEET_PURE_KERNEL=1
is set). `load_pure_kernel()` loads the interpreted variant explicitly so
benchmarks and tests can compare both on identical inputs.
"""

from __future__ import annotations

import importlib.util
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import streams
from ..geometry import Route, SiteLayout, TravelNoise
from ..scenario import ScenarioConfig
from ..sizing import FleetPlan
from . import _kernel as _default_kernel


class EngineInvariantError(RuntimeError):
    """A conservation or bound audit failed inside the kernel."""


def load_pure_kernel():
    """Import the interpreted (non-compiled) kernel under a private name."""
    path = Path(__file__).parent / "_kernel.py"
    spec = importlib.util.spec_from_file_location("uavfleet.engine._kernel_pure", path)
    mod = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(mod)
    return mod


if os.environ.get("UAVFLEET_PURE_KERNEL"):
    _kernel = load_pure_kernel()
else:
    _kernel = _default_kernel

KERNEL_COMPILED = bool(getattr(_kernel, "COMPILED", False))

# role names indexed by kernel role codes
ROLE_NAMES = ("ACTIVE", "RETURNING", "CHARGING", "READY", "TRANSIT_TO_HANDOVER", "REMOVED")
EVENT_NAMES = {
    _kernel.EV_REQUEST: "request",
    _kernel.EV_DISPATCH: "dispatch",
    _kernel.EV_EXHAUST: "exhaustion",
    _kernel.EV_ARRIVE: "handover_arrival",
    _kernel.EV_LAND: "land",
    _kernel.EV_READY: "ready",
    _kernel.EV_SCAN: "scan_complete",
    _kernel.EV_POSITION_DONE: "route_complete",
}


@dataclass
class UAVState:
    """Snapshot of one vehicle (diagnostic view over the state arrays)."""

    id: int
    role: str
    battery_remaining: float
    position: tuple[float, float]
    route_cursor: int
    scan_progress: float


@dataclass
class MissionState:
    """Complete resumable state of one trial."""

    cfg: ScenarioConfig
    m: int
    k: int
    n: int
    site_count: int
    istate: np.ndarray
    fstate: np.ndarray
    role: np.ndarray
    battery: np.ndarray
    pos_of: np.ndarray
    leg_total: np.ndarray
    leg_rem: np.ndarray
    charge_rem: np.ndarray
    pstat: np.ndarray
    vehicle_of: np.ndarray
    cursor: np.ndarray
    in_scan: np.ndarray
    scan_rem: np.ndarray
    wx: np.ndarray
    wy: np.ndarray
    in_leg: np.ndarray
    wleg_ox: np.ndarray
    wleg_oy: np.ndarray
    wleg_tx: np.ndarray
    wleg_ty: np.ndarray
    wleg_total: np.ndarray
    wleg_rem: np.ndarray
    ret_count: np.ndarray
    trans_count: np.ndarray
    route_x: np.ndarray
    route_y: np.ndarray
    route_off: np.ndarray
    scan_count: np.ndarray
    common: float
    halfwidth: float
    trial_key: int
    max_steps: int
    request_times: list = field(default_factory=list)
    handover_times: list = field(default_factory=list)
    exhaustion_times: list = field(default_factory=list)
    exhaustion_ids: list = field(default_factory=list)
    concurrency: list = field(default_factory=list)
    events: list | None = None

    @property
    def time(self) -> float:
        return float(self.istate[0]) * self.cfg.timestep

    @property
    def finished(self) -> bool:
        return bool(self.istate[3])

    def uav_states(self) -> list[UAVState]:
        out = []
        for v in range(self.n):
            p = int(self.pos_of[v])
            if p >= 0:
                pos = (float(self.wx[p]), float(self.wy[p]))
                cur = int(self.cursor[p])
                prog = self.cfg.t_scan - float(self.scan_rem[p]) if self.in_scan[p] else 0.0
            else:
                pos = self.cfg.base_position
                cur, prog = -1, 0.0
            out.append(UAVState(v, ROLE_NAMES[int(self.role[v])], float(self.battery[v]), pos, cur, prog))
        return out


@dataclass(frozen=True)
class TrialResult:
    """Outcome of one seeded mission trial."""

    success: bool
    exhaustion_events: list[tuple[float, int]]
    handover_count: int
    handover_times: list[float]
    sites_scanned: int
    site_count: int
    concurrency_trace: np.ndarray
    request_times: list[float]
    duration: float
    timestep: float
    m: int
    k: int
    min_battery: float
    scan_counts: np.ndarray
    events: list | None = None

    @property
    def exhaustion_times(self) -> list[float]:
        return [t for t, _ in self.exhaustion_events]


def _default_max_time(cfg: ScenarioConfig, site_count: int, m: int) -> float:
    diag = (cfg.area_width**2 + cfg.area_height**2) ** 0.5
    per_site = cfg.t_scan + 2.0 * diag / cfg.flight_speed
    return 4.0 * site_count * per_site / max(m, 1) + 200.0 * (cfg.t_active + cfg.t_charge)


def init_state(
    cfg: ScenarioConfig,
    plan: FleetPlan,
    layout: SiteLayout,
    routes: list[Route],
    noise: TravelNoise,
    collect_events: bool = False,
    max_time: float | None = None,
) -> MissionState:
    """Assemble kernel arrays for one trial (launch happens on first step)."""
    m, k = plan.m, plan.k
    n = m + k
    if len(routes) != m:
        raise ValueError(f"expected {m} routes, got {len(routes)}")
    order = np.concatenate([r.ordered_sites for r in routes])
    site_count = len(layout.sites)
    if len(order) != site_count or len(set(order.tolist())) != site_count:
        raise ValueError("routes must cover every site exactly once")
    route_x = np.ascontiguousarray(layout.sites[order, 0], dtype=np.float64)
    route_y = np.ascontiguousarray(layout.sites[order, 1], dtype=np.float64)
    route_off = np.zeros(m + 1, dtype=np.int32)
    for p, r in enumerate(routes):
        route_off[p + 1] = route_off[p] + len(r.ordered_sites)

    if max_time is None:
        max_time = _default_max_time(cfg, site_count, m)
    max_steps = int(np.ceil(max_time / cfg.timestep))

    f8 = lambda size: np.zeros(size, dtype=np.float64)
    i8 = lambda size: np.zeros(size, dtype=np.int64)
    i4 = lambda size: np.zeros(size, dtype=np.int32)

    state = MissionState(
        cfg=cfg, m=m, k=k, n=n, site_count=site_count,
        istate=i8(8), fstate=f8(4),
        role=i8(n), battery=f8(n), pos_of=i4(n) - 1,
        leg_total=f8(n), leg_rem=f8(n), charge_rem=f8(n),
        pstat=i8(m), vehicle_of=i4(m) - 1, cursor=i4(m),
        in_scan=i8(m), scan_rem=f8(m), wx=f8(m), wy=f8(m),
        in_leg=i8(m), wleg_ox=f8(m), wleg_oy=f8(m), wleg_tx=f8(m), wleg_ty=f8(m),
        wleg_total=f8(m), wleg_rem=f8(m),
        ret_count=i4(m), trans_count=i4(m),
        route_x=route_x, route_y=route_y, route_off=route_off,
        scan_count=i8(site_count),
        common=noise.common_mode_factor,
        halfwidth=noise.per_leg_halfwidth,
        trial_key=noise.trial_key,
        max_steps=max_steps,
        events=[] if collect_events else None,
    )
    state.fstate[0] = cfg.t_active  # min battery starts at full charge
    return state


def _advance(state: MissionState, budget: int, kernel=None) -> bool:
    kern = kernel if kernel is not None else _kernel
    cfg = state.cfg
    try:
        done = kern.run_kernel(
            state.istate, state.fstate,
            state.role, state.battery, state.pos_of,
            state.leg_total, state.leg_rem, state.charge_rem,
            state.pstat, state.vehicle_of, state.cursor,
            state.in_scan, state.scan_rem, state.wx, state.wy,
            state.in_leg, state.wleg_ox, state.wleg_oy, state.wleg_tx, state.wleg_ty,
            state.wleg_total, state.wleg_rem,
            state.ret_count, state.trans_count,
            state.route_x, state.route_y, state.route_off, state.scan_count,
            state.m, state.n,
            cfg.timestep, cfg.t_active, cfg.t_charge, cfg.t_scan,
            cfg.reserve_time, cfg.flight_speed,
            cfg.base_position[0], cfg.base_position[1],
            state.common, state.halfwidth, state.trial_key,
            state.max_steps, budget,
            state.request_times, state.handover_times,
            state.exhaustion_times, state.exhaustion_ids,
            state.concurrency, state.events,
        )
    except RuntimeError as exc:
        raise EngineInvariantError(str(exc)) from None
    return bool(done)


def step(state: MissionState, kernel=None) -> MissionState:
    """Advance exactly one timestep (mutates and returns the state)."""
    _advance(state, 1, kernel)
    return state


def accounting_check(state: MissionState) -> bool:
    """Role-count conservation: every vehicle is in exactly one role."""
    roles = np.asarray(state.role)
    valid = np.all((roles >= 0) & (roles <= 5))
    return bool(valid) and len(roles) == state.m + state.k


def result_from_state(state: MissionState) -> TrialResult:
    scans = int(state.istate[2])
    exhaustions = [(float(t), int(i)) for t, i in zip(state.exhaustion_times, state.exhaustion_ids)]
    duration = float(state.fstate[1]) if state.finished else state.time
    return TrialResult(
        success=(scans == state.site_count) and not exhaustions,
        exhaustion_events=exhaustions,
        handover_count=len(state.handover_times),
        handover_times=[float(t) for t in state.handover_times],
        sites_scanned=scans,
        site_count=state.site_count,
        concurrency_trace=np.asarray(state.concurrency, dtype=np.int32),
        request_times=[float(t) for t in state.request_times],
        duration=duration,
        timestep=state.cfg.timestep,
        m=state.m,
        k=state.k,
        min_battery=float(state.fstate[0]),
        scan_counts=np.asarray(state.scan_count).copy(),
        events=state.events,
    )


def run_trial(
    cfg: ScenarioConfig,
    plan: FleetPlan,
    layout: SiteLayout,
    routes: list[Route],
    noise: TravelNoise,
    collect_events: bool = False,
    max_time: float | None = None,
    kernel=None,
) -> TrialResult:
    """Execute one complete mission trial and package the outcome."""
    state = init_state(cfg, plan, layout, routes, noise, collect_events, max_time)
    _advance(state, -1, kernel)
    return result_from_state(state)


def layout_fingerprint(layout: SiteLayout, routes: list[Route], noise: TravelNoise) -> str:
    """Digest of everything shared across methods for one trial.

    Covers site coordinates, the partition, route orders, the common-mode
    wind factor, and every route-leg noise factor, so equality across
    methods certifies bit-identical shared randomness.
    """
    import hashlib

    h = hashlib.sha256()
    h.update(np.ascontiguousarray(layout.sites, dtype=np.float64).tobytes())
    if layout.cluster_assignment is not None:
        h.update(np.ascontiguousarray(layout.cluster_assignment, dtype=np.int32).tobytes())
    slot = 0
    for r in routes:
        h.update(np.ascontiguousarray(r.ordered_sites, dtype=np.int64).tobytes())
        for _ in r.ordered_sites:
            f = streams.leg_factor(noise.trial_key, r.uav_index, streams.KIND_ROUTE, slot, noise.per_leg_halfwidth)
            h.update(np.float64(f).tobytes())
            slot += 1
    h.update(np.float64(noise.common_mode_factor).tobytes())
    return h.hexdigest()[:16]
