"""Deterministic discrete-event simulation of the full pipeline.

One run drives: device admission at the access point, dual-queue request
scheduling, neural slice selection, associative-memory resource
allocation, packet transmission across assigned switches, windowed
entropy-based flood detection with quarantine, and measured-overload flow
rebalancing.  The clock is integer microseconds; events are processed in
(time, kind rank, sequence) order, so a fixed scenario and seed reproduce
the run bit for bit.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import auth as auth_mod
from . import ddos as ddos_mod
from . import hopfield as hop_mod
from . import offload as off_mod
from . import sched as sched_mod
from . import slicenet as sn_mod
from .domain import (
    Device,
    Flow,
    Protocol,
    ServiceType,
    SwitchKind,
    SwitchProfile,
    qos_profile_of,
    stable_imsi,
)
from .metrics import (
    MetricsReport,
    SliceCounters,
    aggregate_total,
    derive_slice_metrics,
)
from .rng import RngHub
from .scenario import Scenario

# Event kinds, ranked for tie-breaking at equal timestamps.
ARRIVAL = 0
AUTH = 1
SCHEDULE_SLOT = 2
SLICE_DECIDE = 3
ALLOCATE = 4
TRANSMIT = 5
DELIVER = 6
DROP = 7
WINDOW_CLOSE = 8
REBALANCE = 9
MOBILITY_TICK = 10

KIND_NAMES = {
    ARRIVAL: "arrival",
    AUTH: "auth",
    SCHEDULE_SLOT: "schedule_slot",
    SLICE_DECIDE: "slice_decide",
    ALLOCATE: "allocate",
    TRANSMIT: "transmit",
    DELIVER: "deliver",
    DROP: "drop",
    WINDOW_CLOSE: "window_close",
    REBALANCE: "rebalance",
    MOBILITY_TICK: "mobility_tick",
}

# Per-slice value of service; modulates grant size only.
SLICE_VALUES = {
    ServiceType.EMBB: 0.7,
    ServiceType.URLLC: 1.0,
    ServiceType.MMTC: 0.4,
}

TRACE_HEADER = "time,kind,device,slice,switch,outcome"
DETECTION_HEADER = "window_start,switch_id,h_source,h_interarrival,h_size,verdict,blocked_sources"
MIGRATION_HEADER = "time,flow_id,from_switch,to_switch,reason"


class InvariantViolation(RuntimeError):
    """An engine-internal consistency rule was broken."""


def _us(seconds: float) -> int:
    return int(round(seconds * 1e6))


class _DeviceRt:
    """Mutable per-device simulation state."""

    __slots__ = (
        "index",
        "device",
        "password",
        "puf",
        "claimed",
        "decided",
        "forged",
        "authenticated",
        "granted",
        "request",
        "flow",
        "switch_id",
        "quarantined",
        "blocked_streak",
        "gave_up",
        "arrival_us",
    )

    def __init__(self, index: int, device: Device, password: bytes, puf, claimed: ServiceType, forged: bool):
        self.index = index
        self.device = device
        self.password = password
        self.puf = puf
        self.claimed = claimed
        self.decided: Optional[ServiceType] = None
        self.forged = forged
        self.authenticated = False
        self.granted = False
        self.request = None
        self.flow: Optional[Flow] = None
        self.switch_id: Optional[str] = None
        self.quarantined = False
        self.blocked_streak = 0
        self.gave_up = False
        self.arrival_us = 0


class _SwitchRt:
    """Mutable per-switch state: link occupancy and window accumulators."""

    __slots__ = (
        "profile",
        "nominal_load",
        "busy_until_us",
        "flows",
        "win_counts",
        "win_sizes",
        "win_interarrivals",
        "win_last_arrival_us",
        "win_bits",
        "interval_bits",
        "per_flow_bits",
        "baseline_triples",
        "usage_history",
        "predicted_bps",
    )

    def __init__(self, profile: SwitchProfile):
        self.profile = profile
        self.nominal_load = 0.0
        self.busy_until_us = 0
        self.flows: set[int] = set()
        self.win_counts: dict[str, int] = {}
        self.win_sizes: list[int] = []
        self.win_interarrivals: list[float] = []
        self.win_last_arrival_us: Optional[int] = None
        self.win_bits = 0
        self.interval_bits = 0
        self.per_flow_bits: dict[int, int] = {}
        self.baseline_triples: list[tuple[float, float, float]] = []
        self.usage_history: list[float] = []
        self.predicted_bps = 0.0

    def reset_window(self) -> None:
        self.win_counts = {}
        self.win_sizes = []
        self.win_interarrivals = []
        self.win_bits = 0

    def reset_interval(self) -> None:
        self.interval_bits = 0
        self.per_flow_bits = {}


Sink = Callable[[str], None]


class Engine:
    """One simulation run; construct, then :meth:`run`."""

    def __init__(
        self,
        scenario: Scenario,
        *,
        trace_sink: Optional[Sink] = None,
        detection_sink: Optional[Sink] = None,
        migration_sink: Optional[Sink] = None,
        sched_trace_sink: Optional[Sink] = None,
        model: Optional[sn_mod.SliceNetModel] = None,
    ):
        scenario.validate()
        self.sc = scenario
        self.hub = RngHub(scenario.seed)
        self.end_us = _us(scenario.duration)
        self.clock_us = 0
        self.heap: list = []
        self.seq = 0
        self.trace_sink = trace_sink
        self.detection_sink = detection_sink
        self.migration_sink = migration_sink
        self.sched_trace_sink = sched_trace_sink
        if trace_sink:
            trace_sink(TRACE_HEADER)
        if detection_sink:
            detection_sink(DETECTION_HEADER)
        if migration_sink:
            migration_sink(MIGRATION_HEADER)

        self._rng_loss = self.hub.substream("loss")
        self._rng_sizes = self.hub.substream("sizes")
        self._rng_sched = self.hub.substream("sched")
        self._rng_auth = self.hub.substream("auth")

        self.counters = {st: SliceCounters() for st in ServiceType}
        self.auth_accepted = 0
        self.auth_rejected = 0
        self.generated = 0
        self.migrations = 0
        self.rebalances = 0
        self.attack_windows = 0
        self.queue_dropped = 0
        self.quarantined: set[str] = set()
        self.loss_curve = None

        self._build_world(model)
        self._seed_events()

    # -- construction --------------------------------------------------------

    def _build_world(self, model) -> None:
        sc = self.sc
        n = sc.devices
        rng_world = self.hub.substream("world")
        n_illegit = int(round(n * sc.illegitimate_fraction))
        n_forged = int(round(n_illegit * sc.forged_fraction))
        illegit = set(rng_world.permutation(n)[:n_illegit].tolist())
        forged = set(sorted(illegit)[:n_forged])

        self.positions = np.column_stack(
            [
                rng_world.uniform(0, sc.area_width, size=n),
                rng_world.uniform(0, sc.area_height, size=n),
            ]
        ) if n else np.zeros((0, 2))
        self.waypoints = np.column_stack(
            [
                rng_world.uniform(0, sc.area_width, size=n),
                rng_world.uniform(0, sc.area_height, size=n),
            ]
        ) if n else np.zeros((0, 2))
        self.speeds = rng_world.uniform(sc.speed_min, sc.speed_max, size=n)
        fair_slas = rng_world.uniform(0.7, 1.0, size=n)

        mix = [sc.mix_embb, sc.mix_urllc, sc.mix_mmtc]
        services = rng_world.choice(3, size=n, p=mix)
        by_index = [ServiceType.EMBB, ServiceType.URLLC, ServiceType.MMTC]

        self.vap = auth_mod.VirtualAuthorityPool()
        rng_puf = self.hub.substream("puf")
        self.dev: list[_DeviceRt] = []
        self.dev_by_id: dict[str, _DeviceRt] = {}
        self.fair_slas = fair_slas
        for i in range(n):
            device_id = f"d{i:04d}"
            legitimate = i not in illegit
            claimed = by_index[int(services[i])] if legitimate else ServiceType.MMTC
            device = Device(
                device_id=device_id,
                imsi=stable_imsi(device_id),
                speed=float(self.speeds[i]),
                position=(float(self.positions[i, 0]), float(self.positions[i, 1])),
                waypoint=(float(self.waypoints[i, 0]), float(self.waypoints[i, 1])),
                legitimate=legitimate,
            )
            password = f"pw-{device_id}".encode()
            puf = auth_mod.SimulatedPuf(bytes(rng_puf.integers(0, 256, size=32, dtype=np.uint8)))
            rt = _DeviceRt(i, device, password, puf, claimed, forged=i in forged)
            if not rt.forged:
                va = self.vap.authority_for(device_id)
                auth_mod.register_device(va, device_id, password, puf, rng_puf)
            self.dev.append(rt)
            self.dev_by_id[device_id] = rt

        # switches
        self.switches: list[_SwitchRt] = []
        self.sw_by_id: dict[str, _SwitchRt] = {}
        for j in range(sc.switches):
            kind = SwitchKind.PHYSICAL if j < sc.physical_switches else SwitchKind.VIRTUAL
            profile = SwitchProfile(
                switch_id=f"SW{j}",
                kind=kind,
                service_capacity=sc.switch_service_capacity,
                transmission_rate=sc.switch_transmission_rate,
                loss_rate=sc.switch_loss_rate,
            )
            rt = _SwitchRt(profile)
            self.switches.append(rt)
            self.sw_by_id[profile.switch_id] = rt

        # access points, evenly spaced on the horizontal midline
        self.ap_positions = np.array(
            [
                [(k + 0.5) * sc.area_width / max(sc.aps, 1), sc.area_height / 2.0]
                for k in range(max(sc.aps, 1))
            ]
        )

        # scheduler
        self.qconfig = sched_mod.SchedulerConfig(
            mu1=sc.mu1,
            mu2=sc.mu2,
            delta=sc.delta,
            steps_per_service=sc.steps_per_service,
            continue_prob=sc.continue_prob,
            hp_capacity=sc.hp_capacity,
            lp_capacity=sc.lp_capacity,
        )
        sched_mod.validate_config(self.qconfig)
        self.qstate = sched_mod.DualQueueState()
        self.sched_active = False
        self.slot_us = _us(sc.slot_duration)

        # slice-selection model
        if model is not None:
            self.model = model
        elif sc.model_path:
            from .serialization import load_slicenet

            self.model = load_slicenet(sc.model_path)
        else:
            feats, labels = sn_mod.make_separable_dataset(
                sc.train_samples, self.hub.substream("slicenet-data")
            )
            self.model = sn_mod.SliceNetModel(
                d_model=sc.d_model, rng=self.hub.substream("slicenet-init")
            )
            self.loss_curve = sn_mod.train(
                self.model,
                feats,
                labels,
                epochs=sc.epochs,
                learning_rate=sc.learning_rate,
                rng=self.hub.substream("slicenet-train"),
                batch_size=32,
            )

        # resource pools, sized to expected demand with headroom
        expected = {st: 0.0 for st in ServiceType}
        n_legit = n - n_illegit
        for st in ServiceType:
            expected[st] = n_legit * sc.mix_fraction(st)
        expected[ServiceType.MMTC] += n_illegit
        self.pool_initial: dict[ServiceType, float] = {}
        self.pools: dict[ServiceType, hop_mod.ResourcePool] = {}
        for st in ServiceType:
            count = max(expected[st], 1.0)
            comm = count * qos_profile_of(st).min_bandwidth * sc.pool_headroom
            self.pool_initial[st] = comm
            self.pools[st] = hop_mod.ResourcePool(
                communication=comm,
                computation=count * sc.pool_headroom,
                caching=count * sc.pool_headroom,
            )
        self.allocator = hop_mod.HopfieldAllocator(
            demand_reference={st: self.sc.demand_slots(st) for st in ServiceType}
        )

        self.requests_seen = 0
        self.window_index = 0

    def _seed_events(self) -> None:
        sc = self.sc
        rng_arrivals = self.hub.substream("arrivals")
        window = sc.arrival_window * sc.duration
        for rt in self.dev:
            t = _us(float(rng_arrivals.uniform(0.0, window)))
            self._push(t, ARRIVAL, rt.index)
        if sc.devices:
            self._push(_us(sc.tick_interval), MOBILITY_TICK, None)
        if sc.ddos_enabled:
            self._push(_us(sc.window_duration), WINDOW_CLOSE, None)
        if sc.offload_enabled:
            self._push(_us(sc.rebalance_interval), REBALANCE, None)

    # -- event plumbing --------------------------------------------------------

    def _push(self, time_us: int, kind: int, payload) -> None:
        if time_us < self.clock_us:
            raise InvariantViolation(
                f"event {KIND_NAMES[kind]} scheduled at {time_us} before clock {self.clock_us}"
            )
        self.seq += 1
        heapq.heappush(self.heap, (time_us, kind, self.seq, payload))

    def _trace(self, kind: int, device: str, slice_id: str, switch: str, outcome: str) -> None:
        if self.trace_sink:
            self.trace_sink(
                f"{self.clock_us / 1e6:.6f},{KIND_NAMES[kind]},{device},{slice_id},{switch},{outcome}"
            )

    def step_event(self, event: tuple) -> None:
        """Process a single (time_us, kind, seq, payload) event."""
        time_us, kind, _, payload = event
        if time_us < self.clock_us:
            raise InvariantViolation("time regression in event stream")
        self.clock_us = time_us
        self._dispatch(kind, payload)

    def run(self) -> MetricsReport:
        while self.heap:
            self.step_event(heapq.heappop(self.heap))
        return self.collect_metrics()

    # -- handlers ---------------------------------------------------------------

    def _dispatch(self, kind: int, payload) -> None:
        if kind == TRANSMIT:
            self._on_transmit(payload)
        elif kind == DELIVER:
            self._on_deliver(payload)
        elif kind == DROP:
            self._on_drop(payload)
        elif kind == SCHEDULE_SLOT:
            self._on_schedule_slot()
        elif kind == ARRIVAL:
            self._on_arrival(payload)
        elif kind == AUTH:
            self._on_auth(payload)
        elif kind == SLICE_DECIDE:
            self._on_slice_decide(payload)
        elif kind == ALLOCATE:
            self._on_allocate(payload)
        elif kind == WINDOW_CLOSE:
            self._on_window_close()
        elif kind == REBALANCE:
            self._on_rebalance()
        elif kind == MOBILITY_TICK:
            self._on_mobility_tick()
        else:
            raise InvariantViolation(f"unknown event kind {kind}")

    def _on_arrival(self, di: int) -> None:
        rt = self.dev[di]
        rt.arrival_us = self.clock_us
        self._trace(ARRIVAL, rt.device.device_id, "", "", "request")
        self._push(self.clock_us + _us(self.sc.auth_delay), AUTH, di)

    def _on_auth(self, di: int) -> None:
        rt = self.dev[di]
        now_s = self.clock_us / 1e6
        va = self.vap.authority_for(rt.device.device_id)
        verdict = auth_mod.authenticate(
            va,
            rt.device.device_id,
            rt.password,
            timestamp=now_s,
            puf_response=rt.puf.respond,
            now=now_s,
            rng=self._rng_auth,
            freshness_window=self.sc.freshness_window,
        )
        if not verdict.accepted:
            self.auth_rejected += 1
            self._trace(AUTH, rt.device.device_id, "", "", f"rejected:{verdict.reason.value}")
            return
        self.auth_accepted += 1
        rt.authenticated = True
        self.requests_seen += 1
        service = rt.claimed
        from .domain import SliceRequest

        rt.request = SliceRequest(
            origin=rt.device.device_id,
            service_type=service,
            demand_slots=self.sc.demand_slots(service),
            fair_sla=float(self.fair_slas[di]),
            slice_capacity_hint=self.pool_initial[service],
            arrival_time=rt.arrival_us / 1e6,
        )
        # The AP classifies on the requested flow's parameters; the data-plane
        # flow is rebuilt later from the slice the controller actually decides.
        rt.flow = self._make_flow(rt, service)
        cls = sched_mod.classify_flow(rt.flow)
        accepted = sched_mod.enqueue(self.qstate, rt.request, cls, self.qconfig)
        self._trace(
            AUTH,
            rt.device.device_id,
            service.slice_id,
            "",
            f"accepted:{cls.value}" if accepted else "queue_full",
        )
        if not accepted:
            self.queue_dropped += 1
            return
        if not self.sched_active:
            self.sched_active = True
            self._push(self.clock_us + self.slot_us, SCHEDULE_SLOT, None)

    def _on_schedule_slot(self) -> None:
        result = sched_mod.step_slot(self.qstate, self.qconfig, self._rng_sched)
        if self.sched_trace_sink:
            self.sched_trace_sink(sched_mod.trace_row(result))
        for request in result.completions:
            rt = self.dev_by_id[request.origin]
            self._push(self.clock_us + _us(self.sc.decision_delay), SLICE_DECIDE, rt.index)
        if self.qstate.n_in_system > 0 or self.qstate.phase == sched_mod.GAMMA_VACANT:
            self._push(self.clock_us + self.slot_us, SCHEDULE_SLOT, None)
        else:
            self.sched_active = False

    def _features_for(self, rt: _DeviceRt) -> sn_mod.SliceFeatureVector:
        service = rt.claimed
        pool = self.pools[service]
        initial = self.pool_initial[service]
        capacity = min(max(pool.communication / initial, 0.0), 1.0) if initial else 0.0
        imsi_norm = (rt.device.imsi % (2**32)) / 2**32
        mobility = 0.0
        span = self.sc.speed_max - self.sc.speed_min
        if span > 0:
            mobility = (rt.device.speed - self.sc.speed_min) / span
        return sn_mod.SliceFeatureVector(
            service_type=service,
            fair_sla=rt.request.fair_sla,
            imsi_hash=imsi_norm,
            capacity=capacity,
            mobility=min(max(mobility, 0.0), 1.0),
        )

    def _make_flow(self, rt: _DeviceRt, service: ServiceType) -> Flow:
        return Flow(
            flow_id=f"{rt.device.device_id}-f",
            origin=rt.device.device_id,
            slice=service,
            rate=self.sc.nominal_flow_rate,
            packet_delay=self.sc.delay_bound(service),
            packet_length=self.sc.packet_length,
            protocol=self.sc.protocol(service),
        )

    def _on_slice_decide(self, di: int) -> None:
        rt = self.dev[di]
        decision = sn_mod.select_slice(self.model, self._features_for(rt))
        rt.decided = ServiceType.from_indicator(decision.indicator)
        self.counters[rt.decided].requests += 1
        if rt.decided is not rt.claimed:
            rt.flow = self._make_flow(rt, rt.decided)
        self._trace(
            SLICE_DECIDE,
            rt.device.device_id,
            decision.slice_id,
            "",
            f"confidence={decision.confidence:.4f}",
        )
        self._push(self.clock_us + _us(self.sc.decision_delay), ALLOCATE, di)

    def _sinr_db(self, di: int) -> float:
        pos = self.positions[di]
        d = float(np.min(np.linalg.norm(self.ap_positions - pos, axis=1)))
        return float(min(max(50.0 - 15.0 * math.log10(max(d, 1.0)), 0.0), 50.0))

    def _on_allocate(self, di: int) -> None:
        rt = self.dev[di]
        service = rt.decided or rt.claimed
        elapsed = max(self.clock_us / 1e6, 1e-9)
        c = self.counters[service]
        request = hop_mod.AllocationRequest(
            slice_indicator=service.indicator,
            sinr=self._sinr_db(di),
            throughput=c.delivered_bits / elapsed,
            fair_sla=rt.request.fair_sla,
            slice_capacity=self.pool_initial[service],
            arrival_rate=self.requests_seen / elapsed,
            slice_value=SLICE_VALUES[service],
            demand_slots=rt.request.demand_slots,
        )
        try:
            alloc = self.allocator.allocate_resources(request, self.pools[service])
        except hop_mod.PoolExhaustedError:
            c.rejected += 1
            self._trace(ALLOCATE, rt.device.device_id, service.slice_id, "", "rejected:pool")
            return
        c.granted += 1
        c.granted_comm += alloc.communication
        c.response_sum += (self.clock_us - rt.arrival_us) / 1e6
        rt.granted = True

        switch_id = self._assign_switch(rt)
        if switch_id is None:
            self._trace(ALLOCATE, rt.device.device_id, service.slice_id, "", "unroutable")
            return
        self._trace(ALLOCATE, rt.device.device_id, service.slice_id, switch_id, "granted")
        remaining_s = max(0.0, (self.end_us - self.clock_us) / 1e6)
        c.flow_active_bps_seconds += rt.flow.rate * remaining_s
        phase = float(self.hub.substream("phase").uniform(0.0, self.sc.packet_interval))
        first = self.clock_us + _us(phase)
        if first < self.end_us:
            self._push(first, TRANSMIT, (di, False, 0))

    def _assign_switch(self, rt: _DeviceRt) -> Optional[str]:
        best_id = None
        best_w = None
        for sw in self.switches:
            budget = sw.profile.service_capacity - sw.nominal_load
            if rt.flow.rate > budget:
                continue
            profile = sw.profile.with_load(sw.nominal_load)
            w = off_mod.edge_weight(rt.flow, profile, self._coeffs())
            if best_w is None or w > best_w:
                best_w = w
                best_id = sw.profile.switch_id
        if best_id is None:
            return None
        sw = self.sw_by_id[best_id]
        sw.flows.add(rt.index)
        sw.nominal_load += rt.flow.rate
        rt.switch_id = best_id
        return best_id

    def _coeffs(self) -> off_mod.WeightCoefficients:
        return off_mod.WeightCoefficients(
            alpha=self.sc.offload_alpha,
            beta=self.sc.offload_beta,
            gamma=self.sc.offload_gamma,
        )

    def _flooding(self, rt: _DeviceRt) -> bool:
        return (
            not rt.device.legitimate
            and not rt.forged
            and self.clock_us >= _us(self.sc.flood_start)
        )

    def _on_transmit(self, payload) -> None:
        di, is_retx, size = payload
        rt = self.dev[di]
        if rt.gave_up and not is_retx:
            return
        sc = self.sc
        flooding = self._flooding(rt)

        if not is_retx:
            self.generated += 1
            if flooding or not sc.size_jitter:
                size = sc.packet_length
            else:
                size = int(
                    self._rng_sizes.choice(
                        [sc.packet_length // 2, sc.packet_length, sc.packet_length * 2],
                        p=[0.25, 0.5, 0.25],
                    )
                )
            interval = sc.flood_packet_interval if flooding else sc.packet_interval
            nxt = self.clock_us + _us(interval)
            if nxt < self.end_us and not rt.gave_up:
                self._push(nxt, TRANSMIT, (di, False, 0))

        service = rt.decided or rt.claimed
        if rt.quarantined:
            rt.blocked_streak += 1
            if rt.blocked_streak >= sc.flood_giveup:
                rt.gave_up = True
            # a retransmission was already admitted and counted in flight
            self._push(self.clock_us, DROP, (di, "quarantined", is_retx))
            return
        rt.blocked_streak = 0

        sw = self.sw_by_id[rt.switch_id]
        c = self.counters[service]
        if not is_retx:
            c.sent += 1
            c.in_flight += 1

        # window accumulators observe everything arriving at the switch
        dev_id = rt.device.device_id
        sw.win_counts[dev_id] = sw.win_counts.get(dev_id, 0) + 1
        sw.win_sizes.append(size)
        if sw.win_last_arrival_us is not None:
            sw.win_interarrivals.append((self.clock_us - sw.win_last_arrival_us) / 1e6)
        sw.win_last_arrival_us = self.clock_us
        bits = size * 8
        sw.win_bits += bits
        sw.interval_bits += bits
        sw.per_flow_bits[di] = sw.per_flow_bits.get(di, 0) + bits

        reliable = rt.flow.protocol is Protocol.RELIABLE_STREAM
        lost = self._rng_loss.random() < sw.profile.loss_rate
        if not lost:
            backlog_us = max(0, sw.busy_until_us - self.clock_us)
            if backlog_us > _us(sc.queue_delay_bound):
                lost = True
                reason = "overflow"
            else:
                tx_us = int(round(bits / sw.profile.transmission_rate * 1e6))
                sw.busy_until_us = max(sw.busy_until_us, self.clock_us) + tx_us
                latency_us = _us(sc.processing_latency) + backlog_us + tx_us
                self._push(self.clock_us + latency_us, DELIVER, (di, bits, latency_us))
                return
        else:
            reason = "loss"

        if reliable and not is_retx:
            self._push(
                self.clock_us + _us(sc.retransmit_delay), TRANSMIT, (di, True, size)
            )
        else:
            self._push(self.clock_us, DROP, (di, reason, True))

    def _on_deliver(self, payload) -> None:
        di, bits, latency_us = payload
        rt = self.dev[di]
        service = rt.decided or rt.claimed
        c = self.counters[service]
        if rt.quarantined:
            # the AP revokes in-flight traffic of a quarantined source
            c.dropped += 1
            c.blocked += 1
            c.in_flight -= 1
            self._trace(DROP, rt.device.device_id, service.slice_id, rt.switch_id or "", "quarantined")
            return
        c.delivered += 1
        c.in_flight -= 1
        c.delivered_bits += bits
        c.latency_sum += latency_us / 1e6
        self._trace(DELIVER, rt.device.device_id, service.slice_id, rt.switch_id or "", "ok")

    def _on_drop(self, payload) -> None:
        di, reason, admitted = payload
        rt = self.dev[di]
        service = rt.decided or rt.claimed
        c = self.counters[service]
        if not admitted:
            c.sent += 1  # offered traffic stopped at the AP, never in flight
        else:
            c.in_flight -= 1
        c.dropped += 1
        if reason == "quarantined":
            c.blocked += 1
        self._trace(DROP, rt.device.device_id, service.slice_id, rt.switch_id or "", reason)

    # -- detection -----------------------------------------------------------

    def _on_window_close(self) -> None:
        if self.clock_us > self.end_us:
            return
        sc = self.sc
        start_s = self.clock_us / 1e6 - sc.window_duration
        self.window_index += 1
        for sw in self.switches:
            usage_bps = sw.win_bits / sc.window_duration
            sw.usage_history.append(usage_bps)
            sw.predicted_bps = ddos_mod.predict_bandwidth(
                sw.usage_history[-64:], smoothing=0.3, switch_id=sw.profile.switch_id
            ).predicted_usage

            window = ddos_mod.TrafficWindow(
                window_id=self.window_index,
                duration=sc.window_duration,
                source_counts=dict(sw.win_counts),
                interarrival_times=tuple(sw.win_interarrivals),
                packet_sizes=tuple(sw.win_sizes),
            )
            triple = ddos_mod.window_entropies(window, sc.ddos_alpha)
            blocked: list[str] = []
            if window.packet_count < sc.min_packets:
                verdict = ddos_mod.VERDICT_INCONCLUSIVE
            elif len(sw.baseline_triples) < sc.baseline_windows:
                verdict = "learning"
                sw.baseline_triples.append(triple)
            else:
                baseline = self._baseline_stats(sw)
                report = ddos_mod.classify_window(
                    window,
                    baseline,
                    alpha=sc.ddos_alpha,
                    k_sigma=sc.k_sigma,
                    min_packets=sc.min_packets,
                )
                verdict = report.verdict
                if verdict == ddos_mod.VERDICT_ATTACK:
                    self.attack_windows += 1
                    blocked = ddos_mod.quarantine(
                        report, window.source_counts, sc.dominance_factor
                    )
                    for dev_id in blocked:
                        drt = self.dev_by_id[dev_id]
                        if not drt.quarantined:
                            drt.quarantined = True
                            self.quarantined.add(dev_id)
                else:
                    sw.baseline_triples.append(triple)
                    if len(sw.baseline_triples) > 4 * sc.baseline_windows:
                        del sw.baseline_triples[0]
            if self.detection_sink:
                self.detection_sink(
                    f"{start_s:.6f},{sw.profile.switch_id},"
                    f"{triple[0]:.6f},{triple[1]:.6f},{triple[2]:.6f},"
                    f"{verdict},{';'.join(blocked)}"
                )
            sw.reset_window()
        nxt = self.clock_us + _us(sc.window_duration)
        if nxt <= self.end_us:
            self._push(nxt, WINDOW_CLOSE, None)

    def _baseline_stats(self, sw: _SwitchRt) -> ddos_mod.BaselineStats:
        arr = np.asarray(sw.baseline_triples)
        means = arr.mean(axis=0)
        stds = arr.std(axis=0)
        return ddos_mod.BaselineStats(
            mean_source=float(means[0]),
            std_source=float(stds[0]),
            mean_interarrival=float(means[1]),
            std_interarrival=float(stds[1]),
            mean_size=float(means[2]),
            std_size=float(stds[2]),
            n_windows=len(sw.baseline_triples),
        )

    # -- rebalancing -----------------------------------------------------------

    def _on_rebalance(self) -> None:
        if self.clock_us > self.end_us:
            return
        sc = self.sc
        interval = sc.rebalance_interval
        measured = {
            sw.profile.switch_id: sw.interval_bits / interval for sw in self.switches
        }
        overloaded = [
            sw
            for sw in self.switches
            if measured[sw.profile.switch_id] > sw.profile.service_capacity
        ]
        for trigger in overloaded:
            plan = self._plan_rebalance(trigger, measured)
            if plan is None:
                continue
            for mig in plan.migrations:
                drt = self.dev_by_id[mig.flow_id.rsplit("-f", 1)[0]]
                src = self.sw_by_id[mig.from_switch]
                dst = self.sw_by_id[mig.to_switch]
                src.flows.discard(drt.index)
                dst.flows.add(drt.index)
                src.nominal_load -= drt.flow.rate
                dst.nominal_load += drt.flow.rate
                drt.switch_id = mig.to_switch
                self.migrations += 1
                if self.migration_sink:
                    self.migration_sink(
                        f"{self.clock_us / 1e6:.6f},{mig.flow_id},{mig.from_switch},{mig.to_switch},overload"
                    )
                self._trace(
                    REBALANCE,
                    drt.device.device_id,
                    (drt.decided or drt.claimed).slice_id,
                    mig.to_switch,
                    f"migrated_from:{mig.from_switch}",
                )
            if plan.migrations:
                self.rebalances += 1
        for sw in self.switches:
            sw.reset_interval()
        nxt = self.clock_us + _us(interval)
        if nxt <= self.end_us:
            self._push(nxt, REBALANCE, None)

    def _plan_rebalance(self, trigger: _SwitchRt, measured: dict[str, float]):
        interval = self.sc.rebalance_interval
        flows = []
        current = {}
        for di in sorted(trigger.flows):
            drt = self.dev[di]
            if drt.flow is None or drt.quarantined:
                continue
            rate = trigger.per_flow_bits.get(di, 0) / interval
            if rate <= 0:
                rate = drt.flow.rate
            flow = Flow(
                flow_id=drt.flow.flow_id,
                origin=drt.flow.origin,
                slice=drt.flow.slice,
                rate=rate,
                packet_delay=drt.flow.packet_delay,
                packet_length=drt.flow.packet_length,
                protocol=drt.flow.protocol,
            )
            flows.append(flow)
            current[flow.flow_id] = trigger.profile.switch_id
        if not flows:
            return None
        profiles = [
            sw.profile.with_load(measured[sw.profile.switch_id]) for sw in self.switches
        ]
        return off_mod.rebalance(
            profiles, flows, current, trigger.profile.switch_id, self._coeffs()
        )

    # -- mobility ----------------------------------------------------------------

    def _on_mobility_tick(self) -> None:
        if self.clock_us > self.end_us:
            return
        sc = self.sc
        dt = sc.tick_interval
        delta = self.waypoints - self.positions
        dist = np.linalg.norm(delta, axis=1)
        step = self.speeds * dt
        arrived = dist <= step
        moving = ~arrived & (dist > 0)
        scale = np.zeros_like(dist)
        scale[moving] = step[moving] / dist[moving]
        self.positions[moving] += delta[moving] * scale[moving, None]
        self.positions[arrived] = self.waypoints[arrived]
        n_arrived = int(arrived.sum())
        if n_arrived:
            rng = self.hub.substream("waypoints")
            self.waypoints[arrived] = np.column_stack(
                [
                    rng.uniform(0, sc.area_width, size=n_arrived),
                    rng.uniform(0, sc.area_height, size=n_arrived),
                ]
            )
        np.clip(self.positions[:, 0], 0, sc.area_width, out=self.positions[:, 0])
        np.clip(self.positions[:, 1], 0, sc.area_height, out=self.positions[:, 1])
        nxt = self.clock_us + _us(dt)
        if nxt <= self.end_us:
            self._push(nxt, MOBILITY_TICK, None)

    # -- reporting ----------------------------------------------------------------

    def collect_metrics(self) -> MetricsReport:
        for st, c in self.counters.items():
            if c.in_flight != 0:
                raise InvariantViolation(
                    f"{st.slice_id}: {c.in_flight} packets unresolved at end of run"
                )
            if not c.conservation_holds():
                raise InvariantViolation(f"{st.slice_id}: packet conservation violated")
        slices = {
            st: derive_slice_metrics(
                st.slice_id, self.counters[st], self.sc.duration, self.pool_initial[st]
            )
            for st in ServiceType
        }
        total_counters = aggregate_total(self.counters)
        total = derive_slice_metrics(
            "TOTAL", total_counters, self.sc.duration, sum(self.pool_initial.values())
        )
        return MetricsReport(
            duration=self.sc.duration,
            slices=slices,
            total=total,
            auth_accepted=self.auth_accepted,
            auth_rejected=self.auth_rejected,
            generated=self.generated,
            migrations=self.migrations,
            rebalances=self.rebalances,
            attack_windows_flagged=self.attack_windows,
            quarantined_sources=len(self.quarantined),
        )


def run_scenario(
    scenario: Scenario,
    *,
    trace_sink: Optional[Sink] = None,
    detection_sink: Optional[Sink] = None,
    migration_sink: Optional[Sink] = None,
    model: Optional[sn_mod.SliceNetModel] = None,
) -> MetricsReport:
    """Validate, simulate, and report one scenario."""
    engine = Engine(
        scenario,
        trace_sink=trace_sink,
        detection_sink=detection_sink,
        migration_sink=migration_sink,
        model=model,
    )
    return engine.run()
