"""Per-slice counters and the derived metrics report."""

from __future__ import annotations

from dataclasses import dataclass, field

from .domain import ServiceType

SLICE_ORDER = (ServiceType.EMBB, ServiceType.URLLC, ServiceType.MMTC)

METRICS_COLUMNS = (
    "slice",
    "requests",
    "granted",
    "sent",
    "delivered",
    "dropped",
    "blocked",
    "throughput_bps",
    "latency_s",
    "response_s",
    "ptr",
    "plr",
    "capacity_utilization",
    "bandwidth_bps",
    "acceptance_ratio",
    "degenerate",
)


@dataclass
class SliceCounters:
    requests: int = 0
    granted: int = 0
    rejected: int = 0
    sent: int = 0  # packets admitted to the data plane
    delivered: int = 0
    dropped: int = 0  # data-plane losses, overflows, failed retransmits
    blocked: int = 0  # stopped at the AP (quarantined source)
    in_flight: int = 0
    delivered_bits: int = 0
    latency_sum: float = 0.0
    response_sum: float = 0.0
    granted_comm: float = 0.0
    flow_active_bps_seconds: float = 0.0

    def conservation_holds(self) -> bool:
        return self.sent == self.delivered + self.dropped + self.in_flight


@dataclass(frozen=True)
class SliceMetrics:
    slice_id: str
    requests: int
    granted: int
    sent: int
    delivered: int
    dropped: int
    blocked: int
    throughput_bps: float
    latency_s: float
    response_s: float
    ptr: float
    plr: float
    capacity_utilization: float
    bandwidth_bps: float
    acceptance_ratio: float
    degenerate: bool


@dataclass(frozen=True)
class MetricsReport:
    duration: float
    slices: dict[ServiceType, SliceMetrics]
    total: SliceMetrics
    auth_accepted: int
    auth_rejected: int
    generated: int
    migrations: int
    rebalances: int
    attack_windows_flagged: int
    quarantined_sources: int

    def to_csv_rows(self) -> list[str]:
        rows = [",".join(METRICS_COLUMNS)]
        for st in SLICE_ORDER:
            rows.append(_csv_row(self.slices[st]))
        rows.append(_csv_row(self.total))
        return rows


def _fmt(x: float) -> str:
    return f"{x:.9g}"


def _csv_row(m: SliceMetrics) -> str:
    return ",".join(
        [
            m.slice_id,
            str(m.requests),
            str(m.granted),
            str(m.sent),
            str(m.delivered),
            str(m.dropped),
            str(m.blocked),
            _fmt(m.throughput_bps),
            _fmt(m.latency_s),
            _fmt(m.response_s),
            _fmt(m.ptr),
            _fmt(m.plr),
            _fmt(m.capacity_utilization),
            _fmt(m.bandwidth_bps),
            _fmt(m.acceptance_ratio),
            "1" if m.degenerate else "0",
        ]
    )


def derive_slice_metrics(
    slice_id: str,
    c: SliceCounters,
    duration: float,
    pool_comm: float,
) -> SliceMetrics:
    """Turn raw counters into ratios; zero-sent slices are flagged degenerate."""
    degenerate = c.sent == 0
    ptr = 0.0 if degenerate else c.delivered / c.sent
    plr = 0.0 if degenerate else c.dropped / c.sent
    return SliceMetrics(
        slice_id=slice_id,
        requests=c.requests,
        granted=c.granted,
        sent=c.sent,
        delivered=c.delivered,
        dropped=c.dropped,
        blocked=c.blocked,
        throughput_bps=c.delivered_bits / duration,
        latency_s=c.latency_sum / c.delivered if c.delivered else 0.0,
        response_s=c.response_sum / c.granted if c.granted else 0.0,
        ptr=ptr,
        plr=plr,
        capacity_utilization=(c.granted_comm / pool_comm) if pool_comm > 0 else 0.0,
        bandwidth_bps=c.flow_active_bps_seconds / duration,
        acceptance_ratio=(c.granted / c.requests) if c.requests else 0.0,
        degenerate=degenerate,
    )


def aggregate_total(per_slice: dict[ServiceType, SliceCounters]) -> SliceCounters:
    total = SliceCounters()
    for c in per_slice.values():
        total.requests += c.requests
        total.granted += c.granted
        total.rejected += c.rejected
        total.sent += c.sent
        total.delivered += c.delivered
        total.dropped += c.dropped
        total.blocked += c.blocked
        total.in_flight += c.in_flight
        total.delivered_bits += c.delivered_bits
        total.latency_sum += c.latency_sum
        total.response_sum += c.response_sum
        total.granted_comm += c.granted_comm
        total.flow_active_bps_seconds += c.flow_active_bps_seconds
    return total
