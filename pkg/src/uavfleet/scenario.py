"""Mission scenario definition, derived fleet quantities, and feasibility.

Distances are kilometres, durations minutes, speeds km/min throughout.
"""

from __future__ import annotations

import math

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from dataclasses import dataclass, field, replace
from pathlib import Path


class ConfigError(ValueError):
    """Invalid scenario configuration or scenario file."""


@dataclass(frozen=True)
class ScenarioConfig:
    """Physical mission parameters plus noise settings for one scenario."""

    name: str
    site_count: int
    area_width: float
    area_height: float
    base_position: tuple[float, float]
    t_active: float
    t_charge: float
    t_scan: float
    flight_speed: float
    reserve_fraction: float = 0.15
    timestep: float = 0.5
    wind_cv: float = 0.15
    per_leg_noise_halfwidth: float = 0.10
    cluster_sigma: float = 0.2
    m_override: int | None = None
    r_override: float | None = None

    def __post_init__(self):
        if self.site_count < 1:
            raise ConfigError("site_count must be a positive integer")
        if self.area_width <= 0 or self.area_height <= 0:
            raise ConfigError("area dimensions must be positive")
        bx, by = self.base_position
        if not (0 <= bx <= self.area_width and 0 <= by <= self.area_height):
            raise ConfigError("base_position must lie inside the operating area")
        if self.t_active <= 0:
            raise ConfigError("t_active must be positive")
        if self.t_charge <= 0:
            raise ConfigError("t_charge must be positive")
        if self.t_scan < 0:
            raise ConfigError("t_scan must be non-negative")
        if self.flight_speed <= 0:
            raise ConfigError("flight_speed must be positive")
        if not (0 <= self.reserve_fraction < 1):
            raise ConfigError("reserve_fraction must be in [0, 1)")
        if not (0 < self.timestep <= self.t_active):
            raise ConfigError("timestep must be positive and at most t_active")
        if self.wind_cv < 0:
            raise ConfigError("wind_cv must be non-negative")
        if not (0 <= self.per_leg_noise_halfwidth < 1):
            raise ConfigError("per_leg_noise_halfwidth must be in [0, 1)")
        if self.cluster_sigma < 0:
            raise ConfigError("cluster_sigma must be non-negative")
        if self.m_override is not None and self.m_override < 1:
            raise ConfigError("m_override must be a positive integer")
        if self.r_override is not None and self.r_override <= 0:
            raise ConfigError("r_override must be positive")

    @property
    def reserve_time(self) -> float:
        return self.reserve_fraction * self.t_active

    @property
    def sortie_capacity(self) -> float:
        """Usable flight minutes per sortie after the energy reserve."""
        return (1.0 - self.reserve_fraction) * self.t_active


@dataclass(frozen=True)
class DerivedMission:
    """Quantities the sizing rules consume: m active UAVs and recovery ratio."""

    m: int
    r: float
    nominal_return_time: float


@dataclass(frozen=True)
class FeasibilityReport:
    feasible: bool
    offending_sites: list[int] = field(default_factory=list)


def nominal_return_time(cfg: ScenarioConfig) -> float:
    """Return-flight time from the farthest area corner (conservative)."""
    bx, by = cfg.base_position
    corners = ((0.0, 0.0), (cfg.area_width, 0.0), (0.0, cfg.area_height), (cfg.area_width, cfg.area_height))
    far = max(math.hypot(cx - bx, cy - by) for cx, cy in corners)
    return far / cfg.flight_speed


def estimate_workload(cfg: ScenarioConfig) -> float:
    """Transit-aware total inspection workload estimate, in minutes.

    Scan time for every site plus one mean nearest-neighbor hop per site,
    with the hop length taken from the uniform-density approximation
    0.5 * sqrt(area / n). Deliberately simple; m_override bypasses it.
    """
    area = cfg.area_width * cfg.area_height
    hop_km = 0.5 * math.sqrt(area / cfg.site_count)
    return cfg.site_count * (cfg.t_scan + hop_km / cfg.flight_speed)


def derive_active_count(cfg: ScenarioConfig, workload_estimate: float) -> int:
    """Number of active UAVs: ceil(workload / per-sortie capacity)."""
    if cfg.m_override is not None:
        return cfg.m_override
    if workload_estimate <= 0:
        raise ConfigError("workload estimate must be positive")
    capacity = cfg.sortie_capacity
    if capacity <= 0:
        raise ConfigError("per-sortie capacity is zero; check t_active and reserve_fraction")
    return math.ceil(workload_estimate / capacity)


def derive_recovery_ratio(cfg: ScenarioConfig) -> float:
    """Recovery ratio R = (t_charge + nominal return time) / t_active."""
    if cfg.r_override is not None:
        return cfg.r_override
    r = (cfg.t_charge + nominal_return_time(cfg)) / cfg.t_active
    if r <= 0:
        raise ConfigError("recovery ratio must be positive")
    return r


def derive_mission(cfg: ScenarioConfig) -> DerivedMission:
    return DerivedMission(
        m=derive_active_count(cfg, estimate_workload(cfg)),
        r=derive_recovery_ratio(cfg),
        nominal_return_time=nominal_return_time(cfg),
    )


def check_feasibility(cfg: ScenarioConfig, sites) -> FeasibilityReport:
    """Every site must fit round trip plus one scan inside the sortie budget."""
    n = len(sites)
    if n == 0:
        raise ConfigError("site list is empty")
    bx, by = cfg.base_position
    budget = cfg.sortie_capacity
    bad = []
    for i in range(n):
        x, y = sites[i][0], sites[i][1]
        round_trip = 2.0 * math.hypot(x - bx, y - by) / cfg.flight_speed
        if round_trip + cfg.t_scan > budget:
            bad.append(i)
    return FeasibilityReport(feasible=not bad, offending_sites=bad)


_REQUIRED_KEYS = {
    "name", "site_count", "area_width", "area_height", "base_position",
    "t_active", "t_charge", "t_scan", "flight_speed",
}
_OPTIONAL_KEYS = {
    "reserve_fraction", "timestep", "wind_cv", "per_leg_noise_halfwidth",
    "cluster_sigma", "m_override", "r_override",
}


def load_scenario(path: str | Path) -> ScenarioConfig:
    """Load one scenario from a TOML file (schema: docs/scenario-schema.md)."""
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"{path}: scenario file not found") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None

    keys = set(raw)
    missing = _REQUIRED_KEYS - keys
    if missing:
        raise ConfigError(f"{path}: missing required keys: {', '.join(sorted(missing))}")
    unknown = keys - _REQUIRED_KEYS - _OPTIONAL_KEYS
    if unknown:
        raise ConfigError(f"{path}: unknown keys: {', '.join(sorted(unknown))}")

    base = raw.pop("base_position")
    if not (isinstance(base, list) and len(base) == 2):
        raise ConfigError(f"{path}: base_position must be a two-element [x, y] list")
    try:
        return ScenarioConfig(base_position=(float(base[0]), float(base[1])), **raw)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    except TypeError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def with_wind_cv(cfg: ScenarioConfig, wind_cv: float) -> ScenarioConfig:
    """Copy of cfg with the common-mode wind CV replaced (sweep support)."""
    return replace(cfg, wind_cv=wind_cv)


def builtin_scenario_path(name: str) -> Path:
    """Path of a shipped default scenario (s1..s5)."""
    p = Path(__file__).parent / "scenarios" / f"{name}.toml"
    if not p.exists():
        raise ConfigError(f"no built-in scenario named {name!r}")
    return p
