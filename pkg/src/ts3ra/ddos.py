"""Entropy-based flood detection and bandwidth prediction.

Traffic is observed in tumbling windows per switch.  Three order-alpha
entropies summarize each window: the per-source packet share, the
inter-arrival-time profile, and the packet-size profile.  Flooding
concentrates traffic (few sources, metronome timing, constant sizes), so
an attack shows up as an entropy collapse against a benign baseline.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

DEFAULT_ALPHA = 2.0
DEFAULT_K_SIGMA = 3.0
DEFAULT_MIN_PACKETS = 30
DEFAULT_WINDOW_DURATION = 1.0  # seconds
MIN_BASELINE_WINDOWS = 10
DEFAULT_DOMINANCE_FACTOR = 3.0  # multiples of the fair per-source share
_SIGMA_FLOOR = 1e-9

VERDICT_BENIGN = "benign"
VERDICT_ATTACK = "attack"
VERDICT_INCONCLUSIVE = "inconclusive"


def _validated_distribution(distribution: Sequence[float]) -> np.ndarray:
    p = np.asarray(distribution, dtype=np.float64)
    if p.ndim != 1 or p.size == 0:
        raise ValueError("distribution must be a nonempty 1-d probability vector")
    if np.any(p < 0):
        raise ValueError("probabilities must be >= 0")
    total = float(p.sum())
    if abs(total - 1.0) > 1e-9:
        raise ValueError(f"distribution must sum to 1 (got {total!r})")
    return p


def renyi_entropy(distribution: Sequence[float], alpha: float) -> float:
    """Order-alpha entropy in bits: log2(sum p_i^alpha) / (1 - alpha).

    Zero-probability bins contribute nothing.  ``alpha`` must be positive
    and different from 1; use :func:`shannon_entropy` for the order-1 limit.
    """
    p = _validated_distribution(distribution)
    if alpha <= 0:
        raise ValueError("alpha must be > 0")
    if alpha == 1.0:
        raise ValueError("alpha = 1 is the Shannon limit; call shannon_entropy")
    nz = p[p > 0]
    return float(math.log2(np.sum(nz**alpha)) / (1.0 - alpha))


def shannon_entropy(distribution: Sequence[float]) -> float:
    """Order-1 entropy in bits (the alpha -> 1 limit)."""
    p = _validated_distribution(distribution)
    nz = p[p > 0]
    return float(-np.sum(nz * np.log2(nz)))


def entropy_of_counts(counts: Sequence[float], alpha: float) -> float:
    """Entropy of the empirical distribution behind raw counts."""
    c = np.asarray(counts, dtype=np.float64)
    total = c.sum()
    if total <= 0:
        return 0.0
    return renyi_entropy(c / total, alpha)


@dataclass(frozen=True)
class TrafficWindow:
    """One tumbling window of traffic arriving at a switch."""

    window_id: int
    duration: float
    source_counts: dict[str, int]
    interarrival_times: tuple[float, ...]
    packet_sizes: tuple[int, ...]

    def __post_init__(self):
        if self.duration <= 0:
            raise ValueError("duration must be > 0")
        if any(c < 0 for c in self.source_counts.values()):
            raise ValueError("counts must be >= 0")

    @property
    def packet_count(self) -> int:
        return sum(self.source_counts.values())

    @property
    def source_count(self) -> int:
        return sum(1 for c in self.source_counts.values() if c > 0)


@dataclass(frozen=True)
class EntropyReport:
    h_source: float
    h_interarrival: float
    h_size: float
    alpha: float
    verdict: str

    def __post_init__(self):
        if self.alpha <= 0 or self.alpha == 1.0:
            raise ValueError("alpha must be > 0 and != 1")


def _interarrival_histogram(times: Sequence[float], duration: float) -> np.ndarray:
    """Geometric binning of inter-arrival times from 0.1 ms up to the window."""
    if len(times) == 0:
        return np.array([1.0])
    edges = np.geomspace(1e-4, max(duration, 1e-3), num=17)
    counts, _ = np.histogram(np.clip(times, edges[0], edges[-1]), bins=edges)
    return counts.astype(np.float64)


def window_entropies(window: TrafficWindow, alpha: float = DEFAULT_ALPHA) -> tuple[float, float, float]:
    """(source, inter-arrival, size) entropies of one window, in bits."""
    src = entropy_of_counts(list(window.source_counts.values()), alpha)
    ia = entropy_of_counts(_interarrival_histogram(window.interarrival_times, window.duration), alpha)
    sizes, counts = np.unique(np.asarray(window.packet_sizes, dtype=np.int64), return_counts=True) \
        if window.packet_sizes else (np.array([]), np.array([1.0]))
    size_h = entropy_of_counts(counts, alpha)
    return src, ia, size_h


@dataclass
class BaselineStats:
    """Mean/stddev of each entropy over a set of benign windows."""

    mean_source: float
    std_source: float
    mean_interarrival: float
    std_interarrival: float
    mean_size: float
    std_size: float
    n_windows: int

    @classmethod
    def from_windows(
        cls, windows: Iterable[TrafficWindow], alpha: float = DEFAULT_ALPHA
    ) -> "BaselineStats":
        triples = [window_entropies(w, alpha) for w in windows]
        if len(triples) < MIN_BASELINE_WINDOWS:
            raise ValueError(
                f"baseline needs at least {MIN_BASELINE_WINDOWS} benign windows"
            )
        arr = np.asarray(triples)
        means = arr.mean(axis=0)
        stds = arr.std(axis=0)
        return cls(
            mean_source=float(means[0]),
            std_source=float(stds[0]),
            mean_interarrival=float(means[1]),
            std_interarrival=float(stds[1]),
            mean_size=float(means[2]),
            std_size=float(stds[2]),
            n_windows=len(triples),
        )


def classify_window(
    window: TrafficWindow,
    baseline: BaselineStats,
    alpha: float = DEFAULT_ALPHA,
    k_sigma: float = DEFAULT_K_SIGMA,
    min_packets: int = DEFAULT_MIN_PACKETS,
) -> EntropyReport:
    """Flag a window whose source or size entropy collapses below baseline.

    Windows with fewer than ``min_packets`` packets are inconclusive.
    """
    if baseline.n_windows < MIN_BASELINE_WINDOWS:
        raise ValueError("baseline too small to classify against")
    h_src, h_ia, h_size = window_entropies(window, alpha)
    if window.packet_count < min_packets:
        return EntropyReport(h_src, h_ia, h_size, alpha, VERDICT_INCONCLUSIVE)

    src_floor = baseline.mean_source - k_sigma * max(baseline.std_source, _SIGMA_FLOOR)
    size_floor = baseline.mean_size - k_sigma * max(baseline.std_size, _SIGMA_FLOOR)
    attack = h_src < src_floor or h_size < size_floor
    return EntropyReport(
        h_src, h_ia, h_size, alpha, VERDICT_ATTACK if attack else VERDICT_BENIGN
    )


@dataclass(frozen=True)
class BandwidthPrediction:
    switch_id: str
    predicted_usage: float
    smoothing: float

    def __post_init__(self):
        if self.predicted_usage < 0:
            raise ValueError("predicted_usage must be >= 0")
        if not (0.0 < self.smoothing <= 1.0):
            raise ValueError("smoothing must be in (0, 1]")


def predict_bandwidth(
    history: Sequence[float], smoothing: float = 0.3, switch_id: str = ""
) -> BandwidthPrediction:
    """Exponentially weighted moving average of a usage series."""
    if len(history) == 0:
        raise ValueError("history must be nonempty")
    if not (0.0 < smoothing <= 1.0):
        raise ValueError("smoothing must be in (0, 1]")
    pred = float(history[0])
    for x in history[1:]:
        pred = smoothing * float(x) + (1.0 - smoothing) * pred
    return BandwidthPrediction(switch_id=switch_id, predicted_usage=pred, smoothing=smoothing)


def quarantine(
    report: EntropyReport,
    source_counts: dict[str, int],
    dominance_factor: float = DEFAULT_DOMINANCE_FACTOR,
) -> list[str]:
    """Pick the sources to block out of a flagged window.

    Only sources whose packet share exceeds ``dominance_factor`` times the
    fair per-source share are blocked; a benign verdict blocks nobody.
    """
    if report.verdict != VERDICT_ATTACK:
        return []
    total = sum(source_counts.values())
    n_sources = sum(1 for c in source_counts.values() if c > 0)
    if total == 0 or n_sources == 0:
        return []
    fair_share = 1.0 / n_sources
    cutoff = dominance_factor * fair_share
    return sorted(
        src for src, c in source_counts.items() if c / total > cutoff
    )
