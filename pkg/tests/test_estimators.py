"""
Tests for Estimators
====================
가중 모멘트 누적기, 편향 지표, 자기상관 n_eff, ESS 곡선,
에너지 통계를 검증합니다.
"""

import math

import numpy as np
import pytest
from scipy.signal import lfilter

from core.errors import ConstantChainError, EmptyCurveError, InsufficientChainError
from engine.estimators import (
    EnergyTrace,
    MomentAccumulator,
    accumulate,
    autocorr_neff,
    ensemble_bias,
    entropy_bias_cauchy,
    ess_from_curve,
    second_moment_bias,
)


class TestMomentAccumulator:
    """스트리밍 가중 평균."""

    def test_matches_batch_average(self) -> None:
        rng = np.random.default_rng(0)
        xs = rng.standard_normal((500, 4))
        ws = rng.uniform(0.1, 2.0, 500)
        acc = MomentAccumulator(4)
        for x, w in zip(xs, ws):
            accumulate(acc, x, w)
        np.testing.assert_allclose(acc.m1, np.average(xs, axis=0, weights=ws), atol=1e-12)
        np.testing.assert_allclose(acc.m2, np.average(xs ** 2, axis=0, weights=ws), atol=1e-12)
        assert acc.W == pytest.approx(ws.sum())
        assert acc.count == 500

    def test_single_sample(self) -> None:
        acc = MomentAccumulator(2).accumulate(np.array([2.0, -1.0]), 0.3)
        np.testing.assert_allclose(acc.m1, [2.0, -1.0])
        np.testing.assert_allclose(acc.m2, [4.0, 1.0])

    @pytest.mark.parametrize("w", [0.0, -1.0, float("nan")])
    def test_rejects_bad_weight(self, w: float) -> None:
        with pytest.raises(ValueError):
            MomentAccumulator(2).accumulate(np.zeros(2), w)

    def test_rejects_non_finite_sample(self) -> None:
        with pytest.raises(ValueError):
            MomentAccumulator(2).accumulate(np.array([np.inf, 0.0]), 1.0)

    def test_merge_equals_sequential(self) -> None:
        rng = np.random.default_rng(1)
        xs = rng.standard_normal((40, 3))
        ws = rng.uniform(0.5, 1.5, 40)
        whole = MomentAccumulator(3)
        left, right = MomentAccumulator(3), MomentAccumulator(3)
        for i, (x, w) in enumerate(zip(xs, ws)):
            whole.accumulate(x, w)
            (left if i < 25 else right).accumulate(x, w)
        merged = left.merge(right)
        np.testing.assert_allclose(merged.m2, whole.m2, atol=1e-12)
        assert merged.count == 40

    def test_merge_commutative_and_associative(self) -> None:
        rng = np.random.default_rng(5)
        a, b, c = (
            MomentAccumulator(3).accumulate_batch(rng.standard_normal((n, 3)), rng.uniform(0.5, 1.5, n))
            for n in (7, 11, 19)
        )
        np.testing.assert_allclose(a.merge(b).m2, b.merge(a).m2, rtol=1e-10)
        np.testing.assert_allclose(a.merge(b).merge(c).m1, a.merge(b.merge(c)).m1, rtol=1e-10)

    def test_batch_accumulate(self) -> None:
        rng = np.random.default_rng(2)
        xs = rng.standard_normal((10, 3))
        ws = rng.uniform(0.5, 1.5, 10)
        seq = MomentAccumulator(3)
        for x, w in zip(xs, ws):
            seq.accumulate(x, w)
        batch = MomentAccumulator(3).accumulate_batch(xs, ws)
        np.testing.assert_allclose(batch.m1, seq.m1, atol=1e-12)

    def test_rescale_shifts_relative_weight(self) -> None:
        """기존 가중치를 줄이면 이후 샘플의 비중이 커집니다."""
        acc = MomentAccumulator(1).accumulate(np.array([0.0]), 1.0)
        acc.rescale_weights(0.25)
        acc.accumulate(np.array([1.0]), 0.75)
        assert acc.m1[0] == pytest.approx(0.75)

    def test_variance(self) -> None:
        acc = MomentAccumulator(1)
        for v in (1.0, 3.0):
            acc.accumulate(np.array([v]), 1.0)
        assert acc.variance[0] == pytest.approx(1.0)


class TestBias:
    """(b₁, σ, b₂)."""

    def test_known_values(self) -> None:
        summary = second_moment_bias(np.array([1.1, 0.9]), np.ones(2))
        assert summary.b1 == pytest.approx(0.0, abs=1e-15)
        assert summary.sigma == pytest.approx(0.1)
        assert summary.b2 == pytest.approx(0.1)

    def test_decomposition(self) -> None:
        """b₂² = b₁² + σ²."""
        rng = np.random.default_rng(0)
        s = second_moment_bias(rng.uniform(0.5, 2.0, 30), rng.uniform(0.5, 2.0, 30))
        assert s.b2 ** 2 == pytest.approx(s.b1 ** 2 + s.sigma ** 2)

    def test_permutation_invariant(self) -> None:
        rng = np.random.default_rng(4)
        m2, truth = rng.uniform(0.5, 2.0, 20), rng.uniform(0.5, 2.0, 20)
        perm = rng.permutation(20)
        assert second_moment_bias(m2[perm], truth[perm]).b2 == pytest.approx(
            second_moment_bias(m2, truth).b2
        )

    def test_exact_moments_give_zero(self) -> None:
        truth = np.array([0.5, 2.0, 7.0])
        assert second_moment_bias(truth.copy(), truth).b2 == 0.0

    def test_rejects_non_positive_truth(self) -> None:
        with pytest.raises(ValueError):
            second_moment_bias(np.ones(2), np.array([1.0, 0.0]))

    def test_accepts_accumulator(self) -> None:
        acc = MomentAccumulator(2).accumulate(np.array([1.0, 1.0]), 1.0)
        assert second_moment_bias(acc, np.ones(2)).b2 == 0.0

    def test_ensemble_bias_weighted(self) -> None:
        xs = np.array([[1.0], [3.0]])
        summary = ensemble_bias(xs, np.array([3.0, 1.0]), np.array([3.0]))
        # (3·1 + 1·9)/4 = 3
        assert summary.b2 == pytest.approx(0.0, abs=1e-15)

    def test_b2_calibration_against_neff(self) -> None:
        """독립 샘플 n개이면 E[b₂²] ≈ 2/n (가우시안)."""
        rng = np.random.default_rng(3)
        n, d = 200, 100
        values = []
        for _ in range(20):
            xs = rng.standard_normal((n, d))
            values.append(second_moment_bias(np.mean(xs ** 2, axis=0), np.ones(d)).b2 ** 2)
        ratio = np.mean(values) / (2.0 / n)
        assert 1 / 1.5 <= ratio <= 1.5

    def test_entropy_bias(self) -> None:
        acc = MomentAccumulator(2)
        acc.accumulate(np.full(2, math.log(4 * math.pi)), 1.0)
        assert entropy_bias_cauchy(acc) == pytest.approx(0.0, abs=1e-24)
        acc2 = MomentAccumulator(2).accumulate(np.full(2, math.log(4 * math.pi) + 0.1), 1.0)
        assert entropy_bias_cauchy(acc2) == pytest.approx(0.01)


class TestAutocorrelation:
    """Geyer 초기 단조 수열 n_eff."""

    def test_ar1(self) -> None:
        """AR(1) φ=0.9: n_eff ≈ n(1−φ)/(1+φ)."""
        phi, n = 0.9, 100_000
        noise = np.random.default_rng(0).standard_normal((n, 4))
        chain = lfilter([1.0], [1.0, -phi], noise, axis=0)
        neff = autocorr_neff(chain)
        expected = n * (1 - phi) / (1 + phi)
        np.testing.assert_allclose(neff.mean(), expected, rtol=0.15)

    def test_independent_samples(self) -> None:
        chain = np.random.default_rng(1).standard_normal(10_000)
        neff = autocorr_neff(chain)
        assert np.ndim(neff) == 0
        np.testing.assert_allclose(neff, 10_000, rtol=0.1)

    def test_duplicated_pairs(self) -> None:
        chain = np.repeat(np.random.default_rng(2).standard_normal(10_000), 2)
        np.testing.assert_allclose(autocorr_neff(chain), 10_000, rtol=0.1)

    def test_too_short(self) -> None:
        with pytest.raises(InsufficientChainError):
            autocorr_neff(np.arange(10.0))

    def test_constant_coordinate(self) -> None:
        chain = np.column_stack([np.random.default_rng(0).standard_normal(100), np.ones(100)])
        with pytest.raises(ConstantChainError):
            autocorr_neff(chain)


class TestEssFromCurve:
    """b₂ = 0.1 교차점의 200/n."""

    def test_interpolated_crossing(self) -> None:
        curve = [(100, 0.5), (1000, 0.05)]
        t = (0.5 - 0.1) / (0.5 - 0.05)
        n_cross = math.exp(math.log(100) + t * math.log(10))
        assert ess_from_curve(curve) == pytest.approx(200 / n_cross)

    def test_redundant_checkpoint_ignored(self) -> None:
        """보간선 위의 점을 끼워 넣어도 결과가 같습니다."""
        curve = [(100, 0.5), (1000, 0.05)]
        dense = [(100, 0.5), (math.sqrt(100 * 1000), 0.275), (1000, 0.05)]
        assert ess_from_curve(dense) == pytest.approx(ess_from_curve(curve))

    def test_first_point_below(self) -> None:
        assert ess_from_curve([(400, 0.05), (800, 0.01)]) == pytest.approx(0.5)

    def test_never_crosses(self) -> None:
        assert ess_from_curve([(100, 0.5), (1000, 0.2)]) == 0.0

    def test_exact_threshold_counts(self) -> None:
        assert ess_from_curve([(100, 0.3), (2000, 0.1)]) == pytest.approx(0.1)

    def test_cost_offset(self) -> None:
        """튜닝 비용이 분모에 더해집니다."""
        assert ess_from_curve([(1000, 0.05)], cost_offset=1000) == pytest.approx(0.1)

    def test_custom_threshold(self) -> None:
        curve = [(100, 0.02), (200, 0.01)]
        t = (0.02 - 0.0165) / (0.02 - 0.01)
        n_cross = 100 * 2 ** t
        assert ess_from_curve(curve, threshold=0.0165) == pytest.approx(200 / n_cross)

    def test_empty(self) -> None:
        with pytest.raises(EmptyCurveError):
            ess_from_curve([])

    def test_non_monotone(self) -> None:
        with pytest.raises(ValueError):
            ess_from_curve([(200, 0.5), (100, 0.05)])


class TestEnergyTrace:
    """ΔE 통계."""

    def test_streaming_matches_numpy(self) -> None:
        rng = np.random.default_rng(0)
        values = rng.standard_normal(1000) * 0.1
        trace = EnergyTrace(d=10, record=True)
        trace.extend(0.0)
        for chunk in np.array_split(values, 7):
            trace.extend(chunk)
        full = np.concatenate([[0.0], values])
        assert trace.var == pytest.approx(np.var(full))
        assert trace.var_per_d == pytest.approx(np.var(full) / 10)
        np.testing.assert_array_equal(trace.values, full)
        assert trace.values[0] == 0.0

    def test_unrecorded_values_unavailable(self) -> None:
        trace = EnergyTrace(d=2)
        trace.extend(np.array([0.0, 1.0]))
        with pytest.raises(RuntimeError):
            _ = trace.values
        assert trace.summary().max_abs == 1.0

    def test_empty_variance(self) -> None:
        assert EnergyTrace(d=3).var == 0.0
