"""
Tests for Autotune
==================
스텝 크기 갱신 규칙, 결맞음 길이 계산, 전체 튜닝 파이프라인.
"""

import logging
import math

import numpy as np
import pytest

from core.errors import ConfigurationError, SamplerError
from core.state import Algorithm, SamplerConfig
from engine.autotune import (
    MAX_GROWTH,
    auto_tune,
    decoherence_length_from_neff,
    effective_width,
    initial_decoherence_length,
    refine_decoherence_length,
    step_size_update,
    tune_step_size,
)
from engine.decoherence import RngStream
from targets import make_standard_gaussian
from targets.base import TargetDistribution


class BoxedGaussian(TargetDistribution):
    """|x_i| > 1 이면 밀도 0."""

    name = "boxed"

    def neg_log_density(self, x):
        x = np.asarray(x, dtype=float)
        outside = np.any(np.abs(x) > 1.0, axis=-1)
        return np.where(outside, np.inf, 0.5 * np.sum(x * x, axis=-1))

    def grad(self, x):
        return np.asarray(x, dtype=float).copy()


class PointTarget(TargetDistribution):
    """원점에서만 유한."""

    name = "point"

    def neg_log_density(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(np.any(x != 0.0, axis=-1), np.inf, 0.0)

    def grad(self, x):
        return np.zeros(np.shape(x))


def _config(d: int, algorithm: Algorithm = Algorithm.MCLMC) -> SamplerConfig:
    return SamplerConfig(algorithm=algorithm, eps=0.5, L=math.sqrt(d), n_steps=1000)


class TestStepSizeRule:
    """ε ← ε·(target·d/Var[E])^{1/4}."""

    def test_on_target_unchanged(self) -> None:
        assert step_size_update(0.7, 0.0005 * 100, 100) == pytest.approx(0.7)

    def test_too_noisy_shrinks(self) -> None:
        assert step_size_update(1.0, 16 * 0.0005 * 10, 10) == pytest.approx(0.5)

    def test_too_quiet_grows(self) -> None:
        assert step_size_update(1.0, 0.0005 * 10 / 16, 10) == pytest.approx(2.0)

    @pytest.mark.parametrize("var_e", [0.0, 1e-30])
    def test_growth_capped(self, var_e: float) -> None:
        assert step_size_update(1.0, var_e, 100) == pytest.approx(MAX_GROWTH)

    def test_custom_target(self) -> None:
        assert step_size_update(1.0, 0.0003 * 50, 50, target=0.0003) == pytest.approx(1.0)


class TestDecoherenceLength:
    """L = σ_eff·√d, L = 0.4·ε/mean(n_eff/n)."""

    def test_initial(self) -> None:
        assert initial_decoherence_length(2.0, 100) == pytest.approx(20.0)

    def test_initial_rejects_zero_sigma(self) -> None:
        with pytest.raises(ValueError):
            initial_decoherence_length(0.0, 10)

    def test_from_neff(self) -> None:
        l, L = decoherence_length_from_neff(0.5, 0.1)
        assert l == pytest.approx(5.0)
        assert L == pytest.approx(2.0)

    def test_from_neff_rejects_zero(self) -> None:
        with pytest.raises(ValueError):
            decoherence_length_from_neff(0.5, 0.0)

    def test_refine_too_short_keeps_L(self) -> None:
        target = make_standard_gaussian(5)
        config = _config(5)
        refined = refine_decoherence_length(target, config, 30, RngStream(0))
        assert refined.failed
        assert refined.L == config.L
        assert refined.grad_evals == 30


class TestEffectiveWidth:
    """ECW 가중 σ_eff."""

    def test_uses_energy_weights(self) -> None:
        """𝓛 = [0, 2] (d=1) 이면 가중치 [1, e⁻²]."""
        samples = np.array([[0.0], [2.0]])
        w = np.array([1.0, math.exp(-2.0)])
        m1 = np.average(samples[:, 0], weights=w)
        m2 = np.average(samples[:, 0] ** 2, weights=w)
        sigma = effective_width(make_standard_gaussian(1), samples)
        assert sigma == pytest.approx(math.sqrt(m2 - m1 ** 2))
        assert sigma < np.std(samples[:, 0])

    def test_equal_energy_is_plain_variance(self) -> None:
        samples = np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]])
        sigma = effective_width(make_standard_gaussian(2), samples)
        assert sigma == pytest.approx(math.sqrt(np.mean(np.var(samples, axis=0))))

    def test_skips_non_finite_samples(self) -> None:
        samples = np.array([[0.5, 0.5], [2.0, 0.0], [-0.5, -0.5]])
        sigma = effective_width(BoxedGaussian(2), samples)
        assert sigma == pytest.approx(0.5)

    def test_all_non_finite(self) -> None:
        with pytest.raises(SamplerError):
            effective_width(BoxedGaussian(2), np.array([[2.0, 0.0]]))


class TestAutoTune:
    """2단계 파이프라인."""

    def test_standard_gaussian(self) -> None:
        target = make_standard_gaussian(20)
        report = auto_tune(target, _config(20), RngStream.for_chain(0, 0, 1))
        assert 0.5 < report.sigma_eff < 1.5
        assert report.L_initial == pytest.approx(report.sigma_eff * math.sqrt(20))
        assert 0.1 < report.eps < 20.0
        assert report.L > 0
        assert report.grad_evals >= 3 * 300 + report.refine_steps
        assert not report.refine_failed

    def test_deterministic(self) -> None:
        target = make_standard_gaussian(10)
        a = auto_tune(target, _config(10), RngStream.for_chain(4, 0, 1))
        b = auto_tune(target, _config(10), RngStream.for_chain(4, 0, 1))
        assert a == b

    def test_fixed_refine_steps(self) -> None:
        target = make_standard_gaussian(10)
        report = auto_tune(target, _config(10), RngStream(0), refine_steps=400)
        assert report.refine_steps == 400

    def test_mchmc_supported(self) -> None:
        target = make_standard_gaussian(10)
        report = auto_tune(target, _config(10, Algorithm.MCHMC), RngStream(0))
        assert report.eps > 0

    @pytest.mark.parametrize("algorithm", [Algorithm.Q2, Algorithm.UHMC])
    def test_rejects_other_algorithms(self, algorithm: Algorithm) -> None:
        config = SamplerConfig(algorithm=algorithm, eps=0.5, L=math.inf, n_steps=10)
        with pytest.raises(ConfigurationError):
            auto_tune(make_standard_gaussian(10), config, RngStream(0))


class TestDivergentWarmup:
    """발산이 잦으면 ε를 반으로 줄여 재시도합니다."""

    def test_halves_on_walls(self, caplog) -> None:
        target = BoxedGaussian(2)
        with caplog.at_level(logging.WARNING):
            tuned = tune_step_size(target, _config(2), RngStream(0), x0=np.zeros(2),
                                   eps0=4.0, rounds=1)
        assert any("halving" in record.getMessage() for record in caplog.records)
        assert math.isfinite(tuned.eps)

    def test_gives_up_when_every_step_diverges(self) -> None:
        target = PointTarget(3)
        with pytest.raises(SamplerError):
            tune_step_size(target, _config(3), RngStream(0), x0=np.zeros(3), rounds=1)
