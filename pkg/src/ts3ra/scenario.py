"""Scenario model: every knob of a simulation run, with defaults.

The key registry below is the single source of truth for the scenario
file format (``[section]`` headers, ``key = value`` lines): parsing,
serialization, unknown-key rejection and round-tripping all derive from
it.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from typing import Any

from .domain import Protocol, ServiceType


class ScenarioError(ValueError):
    """Invalid scenario contents; the message names the offending key."""


@dataclass
class Scenario:
    # [network]
    seed: int = 42
    duration: float = 300.0
    area_width: float = 1000.0
    area_height: float = 1000.0
    devices: int = 250
    illegitimate_fraction: float = 0.075
    forged_fraction: float = 0.1
    aps: int = 2
    switches: int = 8
    physical_switches: int = 4
    local_controllers: int = 3
    global_controllers: int = 1
    switch_service_capacity: float = 2.2e6
    switch_transmission_rate: float = 2.0e6
    switch_loss_rate: float = 0.1
    processing_latency: float = 10e-6
    auth_delay: float = 1e-3
    decision_delay: float = 1e-3
    freshness_window: float = 2.0
    pool_headroom: float = 1.6

    # [flows]
    mix_embb: float = 0.3
    mix_urllc: float = 0.3
    mix_mmtc: float = 0.4
    arrival_window: float = 0.8
    demand_embb: int = 120
    demand_urllc: int = 30
    demand_mmtc: int = 50
    delay_bound_embb: float = 0.1
    delay_bound_urllc: float = 0.001
    delay_bound_mmtc: float = 1.0
    flood_start: float = 45.0
    flood_packet_interval: float = 0.004
    flood_giveup: int = 200

    # [packets]
    packet_length: int = 512
    packet_interval: float = 0.1
    size_jitter: bool = True
    retransmit_delay: float = 0.01

    # [mobility]
    speed_min: float = 1.0
    speed_max: float = 15.0
    tick_interval: float = 0.1

    # [protocol]
    protocol_embb: str = "datagram"
    protocol_urllc: str = "reliable-stream"
    protocol_mmtc: str = "datagram"

    # [scheduler]
    mu1: float = 0.6
    mu2: float = 0.4
    delta: float = 0.75
    steps_per_service: int = 1
    continue_prob: float = 0.9
    hp_capacity: int = 1000
    lp_capacity: int = 1000
    slot_duration: float = 0.01

    # [slicenet]
    train_samples: int = 600
    epochs: int = 10
    learning_rate: float = 0.01
    d_model: int = 8
    model_path: str = ""

    # [offload]
    offload_enabled: bool = True
    offload_alpha: float = 1.0
    offload_beta: float = 1.0
    offload_gamma: float = 1.0
    rebalance_interval: float = 1.0
    queue_delay_bound: float = 0.05

    # [ddos]
    ddos_enabled: bool = True
    ddos_alpha: float = 2.0
    k_sigma: float = 3.0
    window_duration: float = 1.0
    min_packets: int = 30
    baseline_windows: int = 15
    dominance_factor: float = 3.0

    def validate(self) -> None:
        if self.duration <= 0:
            raise ScenarioError("duration must be > 0")
        if self.devices < 0:
            raise ScenarioError("devices must be >= 0")
        if not (0.0 <= self.illegitimate_fraction < 1.0):
            raise ScenarioError("illegitimate_fraction must be in [0, 1)")
        if not (0.0 <= self.forged_fraction <= 1.0):
            raise ScenarioError("forged_fraction must be in [0, 1]")
        if self.switches < 1:
            raise ScenarioError("at least one switch is required")
        if self.local_controllers < 1:
            raise ScenarioError("at least one local controller is required")
        if self.area_width <= 0 or self.area_height <= 0:
            raise ScenarioError("area dimensions must be > 0")
        mix = self.mix_embb + self.mix_urllc + self.mix_mmtc
        if abs(mix - 1.0) > 1e-9:
            raise ScenarioError(f"traffic mix fractions must sum to 1 (got {mix!r})")
        if self.packet_length <= 0:
            raise ScenarioError("packet_length must be > 0")
        if self.packet_interval <= 0:
            raise ScenarioError("packet_interval must be > 0")
        if self.slot_duration <= 0:
            raise ScenarioError("slot_duration must be > 0")
        if self.window_duration <= 0:
            raise ScenarioError("window_duration must be > 0")
        if self.baseline_windows < 10:
            raise ScenarioError("baseline_windows must be >= 10 benign windows")
        if min(self.demand_embb, self.demand_urllc, self.demand_mmtc) < 1:
            raise ScenarioError("per-service demand_slots must be >= 1")
        if self.speed_min < 0 or self.speed_max < self.speed_min:
            raise ScenarioError("speed range must satisfy 0 <= speed_min <= speed_max")
        for key in ("protocol_embb", "protocol_urllc", "protocol_mmtc"):
            value = getattr(self, key)
            try:
                Protocol(value)
            except ValueError:
                raise ScenarioError(
                    f"{key} must be one of {[p.value for p in Protocol]} (got {value!r})"
                ) from None

    # convenience accessors -------------------------------------------------

    def mix_fraction(self, st: ServiceType) -> float:
        return {
            ServiceType.EMBB: self.mix_embb,
            ServiceType.URLLC: self.mix_urllc,
            ServiceType.MMTC: self.mix_mmtc,
        }[st]

    def demand_slots(self, st: ServiceType) -> int:
        return {
            ServiceType.EMBB: self.demand_embb,
            ServiceType.URLLC: self.demand_urllc,
            ServiceType.MMTC: self.demand_mmtc,
        }[st]

    def delay_bound(self, st: ServiceType) -> float:
        return {
            ServiceType.EMBB: self.delay_bound_embb,
            ServiceType.URLLC: self.delay_bound_urllc,
            ServiceType.MMTC: self.delay_bound_mmtc,
        }[st]

    def protocol(self, st: ServiceType) -> Protocol:
        return Protocol(
            {
                ServiceType.EMBB: self.protocol_embb,
                ServiceType.URLLC: self.protocol_urllc,
                ServiceType.MMTC: self.protocol_mmtc,
            }[st]
        )

    @property
    def nominal_flow_rate(self) -> float:
        """Per-flow demand in bits/s implied by the packet settings."""
        return self.packet_length * 8.0 / self.packet_interval


# section -> key -> dataclass attribute
SCENARIO_KEYS: dict[str, dict[str, str]] = {
    "network": {
        "seed": "seed",
        "duration": "duration",
        "area_width": "area_width",
        "area_height": "area_height",
        "devices": "devices",
        "illegitimate_fraction": "illegitimate_fraction",
        "forged_fraction": "forged_fraction",
        "aps": "aps",
        "switches": "switches",
        "physical_switches": "physical_switches",
        "local_controllers": "local_controllers",
        "global_controllers": "global_controllers",
        "switch_service_capacity": "switch_service_capacity",
        "switch_transmission_rate": "switch_transmission_rate",
        "switch_loss_rate": "switch_loss_rate",
        "processing_latency": "processing_latency",
        "auth_delay": "auth_delay",
        "decision_delay": "decision_delay",
        "freshness_window": "freshness_window",
        "pool_headroom": "pool_headroom",
    },
    "flows": {
        "mix_embb": "mix_embb",
        "mix_urllc": "mix_urllc",
        "mix_mmtc": "mix_mmtc",
        "arrival_window": "arrival_window",
        "demand_embb": "demand_embb",
        "demand_urllc": "demand_urllc",
        "demand_mmtc": "demand_mmtc",
        "delay_bound_embb": "delay_bound_embb",
        "delay_bound_urllc": "delay_bound_urllc",
        "delay_bound_mmtc": "delay_bound_mmtc",
        "flood_start": "flood_start",
        "flood_packet_interval": "flood_packet_interval",
        "flood_giveup": "flood_giveup",
    },
    "packets": {
        "packet_length": "packet_length",
        "packet_interval": "packet_interval",
        "size_jitter": "size_jitter",
        "retransmit_delay": "retransmit_delay",
    },
    "mobility": {
        "speed_min": "speed_min",
        "speed_max": "speed_max",
        "tick_interval": "tick_interval",
    },
    "protocol": {
        "embb": "protocol_embb",
        "urllc": "protocol_urllc",
        "mmtc": "protocol_mmtc",
    },
    "scheduler": {
        "mu1": "mu1",
        "mu2": "mu2",
        "delta": "delta",
        "steps_per_service": "steps_per_service",
        "continue_prob": "continue_prob",
        "hp_capacity": "hp_capacity",
        "lp_capacity": "lp_capacity",
        "slot_duration": "slot_duration",
    },
    "slicenet": {
        "train_samples": "train_samples",
        "epochs": "epochs",
        "learning_rate": "learning_rate",
        "d_model": "d_model",
        "model_path": "model_path",
    },
    "offload": {
        "enabled": "offload_enabled",
        "alpha": "offload_alpha",
        "beta": "offload_beta",
        "gamma": "offload_gamma",
        "rebalance_interval": "rebalance_interval",
        "queue_delay_bound": "queue_delay_bound",
    },
    "ddos": {
        "enabled": "ddos_enabled",
        "alpha": "ddos_alpha",
        "k_sigma": "k_sigma",
        "window_duration": "window_duration",
        "min_packets": "min_packets",
        "baseline_windows": "baseline_windows",
        "dominance_factor": "dominance_factor",
    },
}

_FIELD_TYPES: dict[str, type] = {f.name: f.type for f in fields(Scenario)}  # type: ignore[misc]


def _coerce(attr: str, raw: str, where: str) -> Any:
    """Parse a raw string per the attribute's declared type."""
    default = getattr(Scenario(), attr)
    try:
        if isinstance(default, bool):
            lowered = raw.strip().lower()
            if lowered in ("1", "true", "yes", "on"):
                return True
            if lowered in ("0", "false", "no", "off"):
                return False
            raise ValueError(f"expected a boolean, got {raw!r}")
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        return raw.strip()
    except ValueError as exc:
        raise ScenarioError(f"{where}: {exc}") from None
