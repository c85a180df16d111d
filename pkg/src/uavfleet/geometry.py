"""Site generation, k-means task partitioning, routes, and travel noise."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import streams
from .scenario import ConfigError, ScenarioConfig, derive_mission


@dataclass(frozen=True)
class SiteLayout:
    """Inspection sites and (once partitioned) their UAV assignment."""

    sites: np.ndarray                      # (n, 2) float64, km
    cluster_assignment: np.ndarray | None  # (n,) int32 in [0, m), or None


@dataclass(frozen=True)
class Route:
    uav_index: int
    ordered_sites: np.ndarray  # permutation of this UAV's assigned site indices


@dataclass(frozen=True)
class TravelNoise:
    """Multiplicative travel-time noise for one trial.

    The common-mode factor is one log-normal draw shared by every leg of the
    trial; per-leg factors come from the counter-based stream keyed by
    (trial_key, position, kind, index) so they are method-independent.
    """

    common_mode_factor: float
    per_leg_halfwidth: float
    trial_key: int

    def per_leg_factor(self, uav_index: int, leg_index: int, kind: int = streams.KIND_ROUTE) -> float:
        return streams.leg_factor(self.trial_key, uav_index, kind, leg_index, self.per_leg_halfwidth)


def lognormal_params(cv: float) -> tuple[float, float]:
    """(mu, sigma) of a unit-mean log-normal with coefficient of variation cv."""
    sigma2 = math.log(1.0 + cv * cv)
    return -0.5 * sigma2, math.sqrt(sigma2)


def make_travel_noise(cfg: ScenarioConfig, common_seed, trial_key: int) -> TravelNoise:
    if cfg.wind_cv > 0:
        mu, sigma = lognormal_params(cfg.wind_cv)
        common = float(np.random.default_rng(common_seed).lognormal(mu, sigma))
    else:
        common = 1.0
    return TravelNoise(
        common_mode_factor=common,
        per_leg_halfwidth=cfg.per_leg_noise_halfwidth,
        trial_key=trial_key,
    )


def generate_sites(cfg: ScenarioConfig, seed) -> SiteLayout:
    """Clustered sites: uniform cluster centers, Gaussian scatter, clipped."""
    if cfg.site_count < 1:
        raise ConfigError("site_count must be positive")
    rng = np.random.default_rng(seed)
    n_centers = max(2, derive_mission(cfg).m)
    centers = rng.uniform((0.0, 0.0), (cfg.area_width, cfg.area_height), size=(n_centers, 2))
    which = np.arange(cfg.site_count) % n_centers  # balanced blob sizes
    pts = centers[which] + rng.normal(0.0, cfg.cluster_sigma, size=(cfg.site_count, 2))
    pts[:, 0] = np.clip(pts[:, 0], 0.0, cfg.area_width)
    pts[:, 1] = np.clip(pts[:, 1], 0.0, cfg.area_height)
    return SiteLayout(sites=pts, cluster_assignment=None)


def _repair_empty_clusters(points: np.ndarray, labels: np.ndarray, k: int) -> None:
    """Give each empty cluster the farthest point of the largest cluster."""
    for c in range(k):
        if np.any(labels == c):
            continue
        counts = np.bincount(labels, minlength=k)
        donor = int(np.argmax(counts))
        members = np.flatnonzero(labels == donor)
        center = points[members].mean(axis=0)
        d2 = ((points[members] - center) ** 2).sum(axis=1)
        labels[members[int(np.argmax(d2))]] = c


def partition_sites(layout: SiteLayout, m: int, seed, max_iter: int = 100) -> SiteLayout:
    """Seeded Lloyd's k-means (k-means++ init) over site coordinates."""
    points = layout.sites
    n = len(points)
    if n < m:
        raise ConfigError(f"cannot partition {n} sites among {m} UAVs")
    if m == 1:
        return SiteLayout(sites=points, cluster_assignment=np.zeros(n, dtype=np.int32))

    rng = np.random.default_rng(seed)
    centers = np.empty((m, 2))
    centers[0] = points[rng.integers(n)]
    d2 = ((points - centers[0]) ** 2).sum(axis=1)
    for j in range(1, m):
        total = d2.sum()
        if total > 0:
            centers[j] = points[rng.choice(n, p=d2 / total)]
        else:
            centers[j] = points[rng.integers(n)]
        d2 = np.minimum(d2, ((points - centers[j]) ** 2).sum(axis=1))

    labels = np.zeros(n, dtype=np.int64)
    for _ in range(max_iter):
        dist2 = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        new_labels = np.argmin(dist2, axis=1)
        _repair_empty_clusters(points, new_labels, m)
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for c in range(m):
            centers[c] = points[labels == c].mean(axis=0)
    return SiteLayout(sites=points, cluster_assignment=labels.astype(np.int32))


def build_route(layout: SiteLayout, uav_index: int, base: tuple[float, float]) -> Route:
    """Greedy nearest-neighbor route from the base; ties to the lowest index."""
    if layout.cluster_assignment is None:
        raise ValueError("layout has no cluster assignment; call partition_sites first")
    mine = np.flatnonzero(layout.cluster_assignment == uav_index)
    if len(mine) == 0:
        raise ValueError(f"UAV {uav_index} has no assigned sites")
    order = []
    remaining = list(mine)
    cx, cy = base
    while remaining:
        best, best_d = None, math.inf
        for idx in remaining:  # ascending index, so ties keep the lowest
            d = math.hypot(layout.sites[idx, 0] - cx, layout.sites[idx, 1] - cy)
            if d < best_d:
                best, best_d = idx, d
        order.append(best)
        remaining.remove(best)
        cx, cy = layout.sites[best]
    return Route(uav_index=uav_index, ordered_sites=np.asarray(order, dtype=np.int64))


def build_all_routes(layout: SiteLayout, m: int, base: tuple[float, float]) -> list[Route]:
    return [build_route(layout, p, base) for p in range(m)]


def leg_time(
    frm, to, cfg: ScenarioConfig, noise: TravelNoise,
    uav_index: int, leg_index: int, kind: int = streams.KIND_ROUTE,
) -> float:
    """Noisy flight time between two points for a keyed leg."""
    d = math.hypot(to[0] - frm[0], to[1] - frm[1])
    return (d / cfg.flight_speed) * noise.common_mode_factor * noise.per_leg_factor(uav_index, leg_index, kind)
