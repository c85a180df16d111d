"""Wilson bounds, burst windows, and percentile metrics."""

import math
import random
from dataclasses import dataclass, field

import pytest

from uavfleet import stats
from uavfleet.stats import (
    aggregate,
    burst_concentration,
    certify,
    demand_windows,
    exhaustions_in_top_decile,
    max_window_demand,
    nearest_rank,
    percentile_metrics,
    top_decile_windows,
    wilson_lower_bound,
)


@dataclass
class FakeTrial:
    success: bool = True
    handover_count: int = 0
    exhaustion_times: list = field(default_factory=list)
    request_times: list = field(default_factory=list)
    concurrency_trace: list = field(default_factory=list)
    duration: float = 100.0
    timestep: float = 0.5


class TestWilson:
    @pytest.mark.parametrize("successes,expected", [
        (1000, 0.996), (699, 0.670), (136, 0.116), (2, 0.001), (0, 0.000),
    ])
    def test_paper_table_values(self, successes, expected):
        assert wilson_lower_bound(successes, 1000) == pytest.approx(expected, abs=5e-4)

    def test_strictly_below_point_estimate(self):
        for s, n in ((1, 10), (5, 10), (10, 10), (500, 1000)):
            assert wilson_lower_bound(s, n) < s / n

    def test_approaches_point_estimate(self):
        gap_small = 0.7 - wilson_lower_bound(700, 1000)
        gap_large = 0.7 - wilson_lower_bound(700_000, 1_000_000)
        assert gap_large < gap_small / 10

    def test_monotone_in_successes(self):
        values = [wilson_lower_bound(s, 50) for s in range(51)]
        assert all(b >= a for a, b in zip(values, values[1:]))

    def test_domain_errors(self):
        with pytest.raises(ValueError):
            wilson_lower_bound(11, 10)
        with pytest.raises(ValueError):
            wilson_lower_bound(-1, 10)
        with pytest.raises(ValueError):
            wilson_lower_bound(0, 0)

    def test_certification_threshold_is_closed(self):
        assert certify(0.95)
        assert certify(0.996)
        assert not certify(0.9499)


class TestNearestRank:
    def test_matches_sort_based_oracle(self):
        rng = random.Random(5)
        for _ in range(50):
            values = [rng.uniform(0, 10) for _ in range(rng.randint(1, 40))]
            q = rng.choice([0.1, 0.5, 0.9, 0.99])
            expected = sorted(values)[max(1, math.ceil(q * len(values))) - 1]
            assert nearest_rank(values, q) == expected

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            nearest_rank([], 0.9)


class TestBurstWindows:
    def test_window_partition(self):
        counts = demand_windows([0.0, 4.9, 5.0, 12.0], duration=15.0)
        assert counts == [2, 1, 1]

    def test_event_at_duration_clamps_to_last_window(self):
        counts = demand_windows([15.0], duration=15.0)
        assert counts == [0, 0, 1]

    def test_top_decile_tie_prefers_earlier(self):
        counts = [3, 1, 3, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0]
        top = top_decile_windows(counts)
        assert top == {0, 2}  # ceil(0.1*20) = 2 windows; tie at count 3

    def test_hand_built_concentration(self):
        # 20 windows over 100 min; request counts rank windows 7 and 2 on top
        requests = [35.0] * 9 + [10.0] * 6 + [50.0] * 3 + [71.0]
        counts = demand_windows(requests, 100.0)
        assert counts[7] == 9 and counts[2] == 6
        top = top_decile_windows(counts)
        assert top == {7, 2}
        exhaustions = [36.0, 37.0, 12.0, 51.0, 72.0, 99.0, 38.0, 11.0, 13.0, 36.5]
        # by hand: windows 7 (36,37,38,36.5) and 2 (12,11,13) hold 7 of 10
        got = burst_concentration(exhaustions, requests, 100.0)
        assert got == pytest.approx(7 / 10)

    def test_absent_without_exhaustions(self):
        assert burst_concentration([], [1.0, 2.0], 10.0) is None
        assert exhaustions_in_top_decile([], [1.0], 10.0) == (0, 0)

    def test_all_in_busiest_window(self):
        requests = [2.0, 2.1, 2.2] + [30.0]
        assert burst_concentration([2.5, 3.0], requests, 60.0) == 1.0

    def test_translation_invariance_by_window_multiples(self):
        requests = [3.0, 8.0, 8.5, 33.0, 47.0]
        exhaustions = [8.2, 33.5]
        base = burst_concentration(exhaustions, requests, 50.0)
        for shift in (5.0, 10.0, 25.0):
            shifted = burst_concentration(
                [t + shift for t in exhaustions], [t + shift for t in requests], 50.0 + shift
            )
            assert shifted == base


class TestWindowDemand:
    def test_burst_of_five_in_five_minutes(self):
        assert max_window_demand([0.0, 1.0, 2.0, 3.0, 4.0], 10.0, 0.5) == 5

    def test_separated_waves_do_not_merge(self):
        requests = [60.0] * 4 + [120.0] * 4
        assert max_window_demand(requests, 180.0, 0.5) == 4

    def test_sliding_catches_straddling_cluster(self):
        # cluster crosses a 5-minute partition boundary; sliding window sees it
        requests = [4.0, 4.5, 5.5, 6.0]
        assert max_window_demand(requests, 20.0, 0.5) == 4

    def test_empty(self):
        assert max_window_demand([], 20.0, 0.5) == 0


class TestPercentileMetrics:
    def test_constant_trace(self):
        trials = [FakeTrial(concurrency_trace=[3] * 50, request_times=[1.0]) for _ in range(4)]
        p90c, p90w = percentile_metrics(trials)
        assert p90c == 3.0
        assert p90w == 1.0

    def test_pooled_quantile(self):
        t1 = FakeTrial(concurrency_trace=[0] * 90 + [10] * 10)
        t2 = FakeTrial(concurrency_trace=[0] * 100)
        p90c, _ = percentile_metrics([t1, t2])
        assert p90c == 0.0  # rank 180 of 200 pooled values

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            percentile_metrics([])


class TestAggregate:
    def test_counts_and_bounds(self):
        trials = [FakeTrial(success=i % 4 != 0, handover_count=10) for i in range(100)]
        agg = aggregate(trials)
        assert agg.n_trials == 100
        assert agg.n_success == 75
        assert agg.success_rate == 0.75
        assert 0 <= agg.wilson_lb <= agg.success_rate <= 1
        assert agg.mean_handovers == 10.0
        assert agg.burst_concentration is None

    def test_mean_handovers_successful_only(self):
        trials = [
            FakeTrial(success=True, handover_count=10),
            FakeTrial(success=False, handover_count=99),
            FakeTrial(success=True, handover_count=20),
        ]
        assert aggregate(trials).mean_handovers == 15.0

    def test_burst_concentration_pools_events_across_trials(self):
        t1 = FakeTrial(success=False, request_times=[10.0] * 5, exhaustion_times=[10.5], duration=50.0)
        t2 = FakeTrial(success=False, request_times=[10.0] * 5, exhaustion_times=[40.0], duration=50.0)
        agg = aggregate([t1, t2])
        assert agg.burst_concentration == 0.5
