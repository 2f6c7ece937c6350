import math

import mpmath
import numpy as np
import pytest

from ts3ra.ddos import (
    BaselineStats,
    TrafficWindow,
    VERDICT_ATTACK,
    VERDICT_BENIGN,
    VERDICT_INCONCLUSIVE,
    classify_window,
    entropy_of_counts,
    predict_bandwidth,
    quarantine,
    renyi_entropy,
    shannon_entropy,
    window_entropies,
)

mpmath.mp.dps = 50


def mp_renyi(p, alpha):
    """Extended-precision reference evaluation."""
    total = mpmath.mpf(0)
    for x in p:
        if x > 0:
            total += mpmath.mpf(repr(float(x))) ** alpha
    return float(mpmath.log(total, 2) / (1 - mpmath.mpf(alpha)))


def random_distribution(rng, k):
    raw = rng.random(k) + 1e-6
    return raw / raw.sum()


class TestRenyiEntropy:
    @pytest.mark.parametrize("alpha", [0.5, 2.0, 3.0])
    def test_uniform_gives_log2_k(self, alpha):
        for k in (2, 8, 16, 64):
            p = np.full(k, 1.0 / k)
            assert renyi_entropy(p, alpha) == pytest.approx(math.log2(k), abs=1e-9)

    def test_degenerate_distribution(self):
        assert renyi_entropy([1.0], 2.0) == 0.0
        assert renyi_entropy([1.0, 0.0, 0.0], 2.0) == 0.0

    def test_collision_entropy_hand_value(self):
        # -log2(0.5^2 + 0.25^2 + 0.25^2) = -log2(0.375)
        h = renyi_entropy([0.5, 0.25, 0.25], 2.0)
        assert h == pytest.approx(1.415037499278844, abs=1e-12)

    def test_matches_extended_precision_oracle(self):
        rng = np.random.default_rng(21)
        for _ in range(20):
            p = random_distribution(rng, int(rng.integers(2, 40)))
            for alpha in (0.5, 2.0, 3.0):
                assert renyi_entropy(p, alpha) == pytest.approx(
                    mp_renyi(p, alpha), abs=1e-9
                )

    def test_non_increasing_in_alpha(self):
        rng = np.random.default_rng(22)
        alphas = [0.25, 0.5, 0.9, 1.1, 2.0, 3.0, 5.0]
        for _ in range(50):
            p = random_distribution(rng, 12)
            values = [renyi_entropy(p, a) for a in alphas]
            for lo, hi in zip(values, values[1:]):
                assert hi <= lo + 1e-12

    def test_brackets_shannon_near_one(self):
        rng = np.random.default_rng(23)
        for _ in range(10):
            p = random_distribution(rng, 10)
            h = shannon_entropy(p)
            above = renyi_entropy(p, 1.0 - 1e-4)
            below = renyi_entropy(p, 1.0 + 1e-4)
            assert below - 1e-3 <= h <= above + 1e-3

    def test_unnormalized_rejected(self):
        with pytest.raises(ValueError):
            renyi_entropy([0.5, 0.4], 2.0)

    def test_alpha_one_directs_to_shannon(self):
        with pytest.raises(ValueError, match="[Ss]hannon"):
            renyi_entropy([0.5, 0.5], 1.0)

    def test_nonpositive_alpha_rejected(self):
        with pytest.raises(ValueError):
            renyi_entropy([0.5, 0.5], 0.0)

    def test_counts_helper(self):
        assert entropy_of_counts([5, 5, 5, 5], 2.0) == pytest.approx(2.0, abs=1e-12)
        assert entropy_of_counts([], 2.0) == 0.0


def benign_window(rng, wid, n_sources=32, rate=10):
    counts = {f"s{i}": int(rate + rng.integers(-1, 2)) for i in range(n_sources)}
    total = sum(counts.values())
    sizes = tuple(int(s) for s in rng.choice([256, 512, 1024], p=[0.25, 0.5, 0.25], size=total))
    ia = tuple(float(x) for x in rng.exponential(1.0 / total, size=total - 1))
    return TrafficWindow(wid, 1.0, counts, ia, sizes)


def flood_window(rng, wid, share=0.4, n_sources=32, rate=10):
    base = benign_window(rng, wid, n_sources, rate)
    legit_total = sum(base.source_counts.values())
    n_attack = int(share / (1 - share) * legit_total)
    counts = dict(base.source_counts)
    counts["attacker"] = n_attack
    sizes = base.packet_sizes + (512,) * n_attack
    ia = base.interarrival_times + tuple([1.0 / max(n_attack, 1)] * (n_attack - 1))
    return TrafficWindow(wid, 1.0, counts, ia, sizes)


@pytest.fixture
def baseline():
    rng = np.random.default_rng(31)
    return BaselineStats.from_windows([benign_window(rng, i) for i in range(20)])


class TestClassifyWindow:
    def test_flood_flagged(self, baseline):
        rng = np.random.default_rng(32)
        # one source emitting ~90% of the traffic against a uniform baseline
        window = flood_window(rng, 0, share=0.9, n_sources=50)
        assert classify_window(window, baseline).verdict == VERDICT_ATTACK

    def test_benign_window_passes(self, baseline):
        rng = np.random.default_rng(33)
        window = benign_window(rng, 0)
        assert classify_window(window, baseline).verdict == VERDICT_BENIGN

    def test_small_window_inconclusive(self, baseline):
        window = TrafficWindow(0, 1.0, {"a": 3, "b": 2}, (0.1, 0.2), (512,) * 5)
        assert classify_window(window, baseline).verdict == VERDICT_INCONCLUSIVE

    def test_baseline_too_small_rejected(self):
        rng = np.random.default_rng(34)
        with pytest.raises(ValueError):
            BaselineStats.from_windows([benign_window(rng, i) for i in range(5)])

    def test_entropies_nonnegative(self, baseline):
        rng = np.random.default_rng(35)
        h = window_entropies(benign_window(rng, 0))
        assert all(v >= 0 for v in h)


class TestPredictBandwidth:
    def test_constant_series_fixed_point(self):
        pred = predict_bandwidth([7.5] * 20, smoothing=0.3)
        assert pred.predicted_usage == pytest.approx(7.5)

    def test_degenerate_smoothing_tracks_last(self):
        pred = predict_bandwidth([1.0, 5.0, 9.0], smoothing=1.0)
        assert pred.predicted_usage == 9.0

    def test_step_convergence_bound(self):
        lam = 0.3
        n = math.ceil(math.log(0.01) / math.log(1 - lam))
        series = [0.0] + [100.0] * n
        pred = predict_bandwidth(series, smoothing=lam)
        assert abs(pred.predicted_usage - 100.0) <= 1.0  # within 1%
        shorter = predict_bandwidth(series[:-2], smoothing=lam)
        assert abs(shorter.predicted_usage - 100.0) > 1.0

    def test_monotone_approach(self):
        lam = 0.3
        values = [0.0] + [10.0] * 30
        preds = [
            predict_bandwidth(values[: i + 1], smoothing=lam).predicted_usage
            for i in range(1, len(values))
        ]
        for lo, hi in zip(preds, preds[1:]):
            assert hi >= lo - 1e-12

    def test_empty_history_rejected(self):
        with pytest.raises(ValueError):
            predict_bandwidth([], smoothing=0.3)


class TestQuarantine:
    def test_flood_source_blocked(self, baseline):
        rng = np.random.default_rng(36)
        window = flood_window(rng, 0, share=0.9, n_sources=50)
        report = classify_window(window, baseline)
        blocked = quarantine(report, window.source_counts)
        assert blocked == ["attacker"]

    def test_benign_verdict_blocks_nobody(self, baseline):
        rng = np.random.default_rng(37)
        window = benign_window(rng, 0)
        report = classify_window(window, baseline)
        assert quarantine(report, window.source_counts) == []

    def test_moderate_sources_spared(self, baseline):
        rng = np.random.default_rng(38)
        window = flood_window(rng, 0, share=0.45, n_sources=32)
        report = classify_window(window, baseline)
        assert report.verdict == VERDICT_ATTACK
        blocked = quarantine(report, window.source_counts)
        assert "attacker" in blocked
        assert all(src == "attacker" for src in blocked)


class TestDetectionSuite:
    """Seeded synthetic-flood corpus: recall and false-positive targets."""

    def test_recall_and_false_positive_rates(self):
        recalls, fprs = [], []
        for seed in range(5):
            rng = np.random.default_rng(seed)
            baseline = BaselineStats.from_windows(
                [benign_window(rng, i) for i in range(20)]
            )
            fp = sum(
                classify_window(benign_window(rng, 100 + i), baseline).verdict
                == VERDICT_ATTACK
                for i in range(100)
            )
            tp = sum(
                classify_window(
                    flood_window(rng, 300 + i, share=float(rng.uniform(0.25, 0.5))),
                    baseline,
                ).verdict
                == VERDICT_ATTACK
                for i in range(60)
            )
            recalls.append(tp / 60)
            fprs.append(fp / 100)
        assert min(recalls) >= 0.9
        assert max(fprs) <= 0.05
