import heapq

import numpy as np
import pytest

from ts3ra.domain import ServiceType
from ts3ra.engine import (
    ARRIVAL,
    AUTH,
    DELIVER,
    DROP,
    Engine,
    InvariantViolation,
    TRANSMIT,
    run_scenario,
)
from ts3ra.metrics import SliceCounters, derive_slice_metrics
from ts3ra.scenario import Scenario, ScenarioError


def small_scenario(**overrides) -> Scenario:
    base = dict(
        devices=36,
        duration=34.0,
        seed=11,
        train_samples=240,
        epochs=3,
        switches=4,
        arrival_window=0.15,
        flood_start=18.0,
        baseline_windows=10,
    )
    base.update(overrides)
    return Scenario(**base)


@pytest.fixture(scope="module")
def small_run():
    trace: list[str] = []
    detection: list[str] = []
    engine = Engine(
        small_scenario(), trace_sink=trace.append, detection_sink=detection.append
    )
    report = engine.run()
    return engine, report, trace, detection


class TestScenarioValidation:
    def test_zero_duration_rejected(self):
        with pytest.raises(ScenarioError, match="duration"):
            Scenario(duration=0).validate()

    def test_bad_mix_rejected(self):
        with pytest.raises(ScenarioError, match="mix"):
            Scenario(mix_embb=0.5, mix_urllc=0.5, mix_mmtc=0.5).validate()

    def test_error_raised_before_any_event(self):
        with pytest.raises(ScenarioError):
            run_scenario(Scenario(duration=-1.0))


class TestEmptyWorld:
    def test_zero_devices_zero_counters(self):
        report = run_scenario(
            Scenario(devices=0, duration=5.0, train_samples=60, epochs=1)
        )
        assert report.total.sent == 0
        assert report.total.delivered == 0
        assert report.total.degenerate
        for m in report.slices.values():
            assert m.ptr == 0.0 and m.plr == 0.0


class TestDeterminism:
    def test_identical_seed_identical_artifacts(self):
        def capture():
            trace: list[str] = []
            report = run_scenario(
                small_scenario(devices=20, duration=12.0), trace_sink=trace.append
            )
            return report.to_csv_rows(), trace

        rows_a, trace_a = capture()
        rows_b, trace_b = capture()
        assert rows_a == rows_b
        assert trace_a == trace_b


class TestPipelineSteps:
    def make_engine(self):
        return Engine(small_scenario(devices=4, duration=5.0, train_samples=60, epochs=1))

    def test_arrival_emits_auth_not_transmit(self):
        engine = self.make_engine()
        engine.heap.clear()
        engine._dispatch(ARRIVAL, 0)
        kinds = [item[1] for item in engine.heap]
        assert AUTH in kinds
        assert TRANSMIT not in kinds

    def test_deliver_increments_exactly_one_slice(self):
        engine = self.make_engine()
        rt = engine.dev[0]
        rt.decided = ServiceType.URLLC
        before = {st: engine.counters[st].delivered for st in ServiceType}
        engine.counters[ServiceType.URLLC].in_flight += 1
        engine._dispatch(DELIVER, (0, 4096, 1500))
        after = {st: engine.counters[st].delivered for st in ServiceType}
        deltas = [after[st] - before[st] for st in ServiceType]
        assert sorted(deltas) == [0, 0, 1]

    def test_transmit_on_blocked_source_emits_drop(self):
        engine = self.make_engine()
        rt = engine.dev[1]
        rt.decided = ServiceType.MMTC
        rt.quarantined = True
        rt.flow = engine._make_flow(rt, ServiceType.MMTC)
        rt.switch_id = "SW0"
        engine.heap.clear()
        engine._dispatch(TRANSMIT, (1, False, 0))
        kinds = [item[1] for item in engine.heap]
        assert DROP in kinds
        while engine.heap:
            engine.step_event(heapq.heappop(engine.heap))
        c = engine.counters[ServiceType.MMTC]
        assert c.blocked >= 1
        assert c.dropped >= 1

    def test_time_regression_is_fatal(self):
        engine = self.make_engine()
        engine.clock_us = 1000
        with pytest.raises(InvariantViolation):
            engine.step_event((500, TRANSMIT, 0, (0, False, 0)))


class TestConservationAndAttribution:
    def test_packet_conservation_exact(self, small_run):
        engine, report, _, _ = small_run
        for st in ServiceType:
            c = engine.counters[st]
            assert c.sent == c.delivered + c.dropped
            assert c.in_flight == 0

    def test_ratios_within_bounds(self, small_run):
        _, report, _, _ = small_run
        for m in report.slices.values():
            assert 0.0 <= m.ptr <= 1.0
            assert 0.0 <= m.plr <= 1.0
            assert m.ptr + m.plr <= 1.0 + 1e-9
            assert 0.0 <= m.acceptance_ratio <= 1.0

    def test_trace_times_nondecreasing(self, small_run):
        _, _, trace, _ = small_run
        times = [float(row.split(",")[0]) for row in trace[1:]]
        assert all(b >= a for a, b in zip(times, times[1:]))

    def test_deliveries_only_from_authenticated(self, small_run):
        engine, _, trace, _ = small_run
        authenticated = {
            rt.device.device_id for rt in engine.dev if rt.authenticated
        }
        for row in trace[1:]:
            cells = row.split(",")
            if cells[1] == "deliver":
                assert cells[2] in authenticated

    def test_no_delivery_after_quarantine(self, small_run):
        engine, _, trace, _ = small_run
        assert engine.quarantined, "scenario should quarantine its flooders"
        first_block: dict[str, float] = {}
        for row in trace[1:]:
            cells = row.split(",")
            if cells[1] == "drop" and cells[5] == "quarantined":
                first_block.setdefault(cells[2], float(cells[0]))
        assert first_block
        for row in trace[1:]:
            cells = row.split(",")
            if cells[1] == "deliver" and cells[2] in first_block:
                assert float(cells[0]) <= first_block[cells[2]]


class TestDetectionIntegration:
    def test_flooders_quarantined(self, small_run):
        engine, report, _, _ = small_run
        flooders = {
            rt.device.device_id
            for rt in engine.dev
            if not rt.device.legitimate and not rt.forged and rt.granted
        }
        assert flooders
        assert engine.quarantined <= flooders | {
            rt.device.device_id for rt in engine.dev if not rt.device.legitimate
        }
        assert report.quarantined_sources >= 1

    def test_detection_log_format(self, small_run):
        _, _, _, detection = small_run
        assert detection[0].startswith("window_start,switch_id,")
        assert len(detection) > 1

    def test_forged_devices_rejected_at_auth(self):
        report = run_scenario(
            small_scenario(
                devices=30,
                illegitimate_fraction=0.2,
                forged_fraction=0.5,
                train_samples=60,
                epochs=1,
                duration=10.0,
            )
        )
        assert report.auth_rejected >= 1
        assert report.auth_accepted + report.auth_rejected == 30


class TestRebalanceIntegration:
    def test_migrations_relieve_overload_without_detection(self):
        migrations: list[str] = []
        report = run_scenario(
            small_scenario(
                devices=48,
                duration=20.0,
                ddos_enabled=False,
                flood_start=6.0,
                switch_service_capacity=1.0e6,
                switch_transmission_rate=0.9e6,
                switches=4,
            ),
            migration_sink=migrations.append,
        )
        assert report.migrations > 0
        assert len(migrations) == report.migrations + 1  # header row


class TestMobility:
    def test_zero_speed_stays_put(self):
        engine = Engine(small_scenario(devices=5, duration=5.0, train_samples=60, epochs=1, speed_min=0.0, speed_max=0.0))
        before = engine.positions.copy()
        for _ in range(100):
            engine._dispatch(10, None)  # MOBILITY_TICK
        assert np.array_equal(engine.positions, before)

    def test_positions_stay_in_bounds(self):
        engine = Engine(small_scenario(devices=25, duration=5.0, train_samples=60, epochs=1, speed_max=40.0))
        for _ in range(10_000):
            engine._dispatch(10, None)
        assert np.all(engine.positions[:, 0] >= 0.0)
        assert np.all(engine.positions[:, 0] <= engine.sc.area_width)
        assert np.all(engine.positions[:, 1] >= 0.0)
        assert np.all(engine.positions[:, 1] <= engine.sc.area_height)

    def test_displacement_bounded_by_speed(self):
        engine = Engine(small_scenario(devices=25, duration=5.0, train_samples=60, epochs=1))
        for _ in range(200):
            before = engine.positions.copy()
            engine._dispatch(10, None)
            moved = np.linalg.norm(engine.positions - before, axis=1)
            assert np.all(moved <= engine.speeds * engine.sc.tick_interval + 1e-9)


class TestCollectMetrics:
    def test_ratio_definitions(self):
        c = SliceCounters(sent=100, delivered=90, dropped=10, delivered_bits=10**6)
        m = derive_slice_metrics("S1", c, duration=10.0, pool_comm=1.0)
        assert m.ptr == pytest.approx(0.9)
        assert m.plr == pytest.approx(0.1)
        assert m.throughput_bps == pytest.approx(1e5)

    def test_zero_sent_degenerate(self):
        m = derive_slice_metrics("S1", SliceCounters(), duration=10.0, pool_comm=1.0)
        assert m.degenerate
        assert m.ptr == 0.0 and m.plr == 0.0
