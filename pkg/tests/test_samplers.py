"""
Tests for Samplers
==================
MCHMC / MCLMC / q=2 / 비보정 HMC 실행, 발산 복구, 비용 집계,
앙상블, 체크포인트 스케줄을 검증합니다.
"""

import math

import numpy as np
import pytest

from core.errors import ConfigurationError
from core.state import Algorithm, Integrator, SamplerConfig
from engine.autotune import auto_tune
from engine.decoherence import RngStream
from engine.dynamics import sample_weight
from engine.estimators import ensemble_bias, second_moment_bias
from engine.samplers import (
    CheckpointSchedule,
    PhysicalState,
    hmc_energy,
    hmc_leapfrog_step,
    q2_energy,
    q2_step,
    run_chain,
    run_ensemble,
    run_mchmc,
    run_mclmc,
    run_q2,
    run_uhmc,
)
from targets import make_cauchy, make_standard_gaussian
from targets.base import TargetDistribution


class WalledGaussian(TargetDistribution):
    """x₀ > 1.5 에서 밀도 0인 잘린 가우시안."""

    name = "walled"

    def neg_log_density(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x[..., 0] > 1.5, np.inf, 0.5 * np.sum(x * x, axis=-1))

    def grad(self, x):
        return np.asarray(x, dtype=float).copy()


def _config(**overrides) -> SamplerConfig:
    values = {"algorithm": Algorithm.MCLMC, "eps": 0.5, "L": 3.0, "n_steps": 1000}
    values.update(overrides)
    return SamplerConfig(**values)


# ── Fixtures ──────────────────────────────────────────────────

@pytest.fixture
def gaussian10():
    return make_standard_gaussian(10)


# ── Config ────────────────────────────────────────────────────

class TestSamplerConfig:
    """bounce 간격 K = round(L/ε)."""

    def test_bounce_interval(self) -> None:
        assert _config(algorithm=Algorithm.MCHMC, eps=0.5, L=3.2).bounce_interval == 6
        assert _config(L=math.inf).bounce_interval is None

    def test_interval_below_one_rejected(self) -> None:
        with pytest.raises(ValueError):
            _config(algorithm=Algorithm.MCHMC, eps=1.0, L=0.4)

    def test_mclmc_ignores_interval(self) -> None:
        assert _config(eps=1.0, L=0.4).L == 0.4

    def test_integrator_alias(self) -> None:
        assert _config(integrator="mn").integrator is Integrator.MINIMAL_NORM

    @pytest.mark.parametrize("field,value", [("eps", 0.0), ("n_steps", 0), ("L", -1.0)])
    def test_invalid_values(self, field: str, value) -> None:
        with pytest.raises(ValueError):
            _config(**{field: value})


class TestCheckpointSchedule:
    """기하 간격."""

    def test_due_and_advance(self) -> None:
        schedule = CheckpointSchedule(100, 1.1)
        assert not schedule.due(99)
        assert schedule.due(100)
        schedule.advance(100)
        assert schedule.next == pytest.approx(110.0)
        schedule.advance(125)
        assert schedule.next == pytest.approx(133.1)


# ── q=0 ───────────────────────────────────────────────────────

class TestMCLMC:
    """부분 갱신 샘플러."""

    def test_converges_on_gaussian(self, gaussian10) -> None:
        config = _config(n_steps=10_000)
        result = run_mclmc(gaussian10, config, RngStream(0))
        assert result.report.checkpoints[-1].b2 < 0.1
        assert result.report.ess > 0
        assert result.report.converged

    def test_deterministic(self, gaussian10) -> None:
        config = _config(n_steps=500)
        a = run_mclmc(gaussian10, config, RngStream.for_chain(3, 0))
        b = run_mclmc(gaussian10, config, RngStream.for_chain(3, 0))
        assert a.report.model_dump() == b.report.model_dump()
        np.testing.assert_array_equal(a.accumulator.m2, b.accumulator.m2)

    def test_different_seeds_differ(self, gaussian10) -> None:
        config = _config(n_steps=200)
        a = run_mclmc(gaussian10, config, RngStream.for_chain(3, 0))
        b = run_mclmc(gaussian10, config, RngStream.for_chain(3, 1))
        assert not np.allclose(a.accumulator.m2, b.accumulator.m2)

    @pytest.mark.parametrize("integrator,per_step", [("leapfrog", 1), ("minimal_norm", 2)])
    def test_gradient_cost(self, gaussian10, integrator: str, per_step: int) -> None:
        result = run_mclmc(gaussian10, _config(n_steps=300, integrator=integrator), RngStream(0))
        assert result.grad_evals == 300 * per_step
        assert result.report.checkpoints[-1].grad_evals == 300 * per_step

    def test_checkpoints_geometric(self, gaussian10) -> None:
        result = run_mclmc(gaussian10, _config(n_steps=1000), RngStream(0))
        evals = [c.grad_evals for c in result.report.checkpoints]
        assert evals[0] >= 100
        assert evals == sorted(evals)
        assert evals[-1] == 1000
        assert 20 <= len(evals) <= 30

    def test_tuning_cost_counted(self, gaussian10) -> None:
        config = _config(n_steps=10_000)
        plain = run_mclmc(gaussian10, config, RngStream(0))
        charged = run_mclmc(gaussian10, config, RngStream(0), tuning_cost=5000)
        assert plain.report.ess > 0
        assert charged.report.ess < plain.report.ess
        assert charged.total_cost == plain.grad_evals + 5000

    @pytest.mark.slow
    def test_weighted_second_moments_after_long_run(self) -> None:
        """튜닝 후 10⁵ 스텝 (d=100): |E[x_i²] − 1| < 0.05."""
        target = make_standard_gaussian(100)
        tuned = auto_tune(target, _config(L=10.0), RngStream.for_chain(0, 0, 1))
        config = _config().with_hyperparameters(tuned.eps, tuned.L).model_copy(
            update={"n_steps": 100_000}
        )
        m2 = run_mclmc(target, config, RngStream.for_chain(0, 0)).accumulator.m2
        assert abs(m2[0] - 1.0) < 0.05
        assert np.median(np.abs(m2 - 1.0)) < 0.05

    def test_energy_trace_starts_at_zero(self, gaussian10) -> None:
        result = run_mclmc(gaussian10, _config(n_steps=50, record_energy=True), RngStream(0))
        assert result.energy_trace.values[0] == 0.0
        assert result.energy_trace.values.size == 51

    def test_algorithm_mismatch(self, gaussian10) -> None:
        with pytest.raises(ConfigurationError):
            run_mchmc(gaussian10, _config(), RngStream(0))


class TestMCHMC:
    """K 스텝마다 full bounce."""

    def test_converges_on_gaussian(self, gaussian10) -> None:
        config = _config(algorithm=Algorithm.MCHMC, eps=0.5, L=3.0, n_steps=10_000)
        result = run_mchmc(gaussian10, config, RngStream(1))
        assert result.report.checkpoints[-1].b2 < 0.1

    def test_infinite_L_never_bounces(self) -> None:
        """bounce가 없으면 결정적 궤적 (난수는 초기화에만 사용)."""
        target = make_standard_gaussian(5)
        config = _config(algorithm=Algorithm.MCHMC, L=math.inf, n_steps=100)
        x0 = np.ones(5)
        a = run_mchmc(target, config, RngStream(0), x0=x0)
        b = run_mchmc(target, config, RngStream(0), x0=x0)
        np.testing.assert_array_equal(a.final_state.x, b.final_state.x)
        assert a.divergences == 0

    @pytest.mark.slow
    def test_energy_does_not_drift(self) -> None:
        """10⁵ 스텝 동안 |mean ΔE| ≤ 3·std(ΔE), 앞뒤 구간 평균도 같은 범위."""
        d = 50
        config = _config(algorithm=Algorithm.MCHMC, eps=0.5, L=math.sqrt(d),
                         n_steps=100_000, record_energy=True)
        result = run_mchmc(make_standard_gaussian(d), config, RngStream(3))
        delta_e = result.energy_trace.values[1:]
        spread = delta_e.std()
        assert abs(delta_e.mean()) <= 3 * spread
        tenth = delta_e.size // 10
        assert abs(delta_e[-tenth:].mean() - delta_e[:tenth].mean()) <= 3 * spread


class TestDivergenceRecovery:
    """무한 𝓛 영역을 만나도 체인은 계속 진행합니다."""

    def test_wall_is_never_crossed(self) -> None:
        target = WalledGaussian(4)
        config = _config(eps=1.0, L=2.0, n_steps=2000, divergence_flag_fraction=0.0)
        result = run_mclmc(target, config, RngStream(5), keep_samples=True)
        assert result.divergences > 0
        assert result.report.divergence_flagged
        assert np.all(result.samples[:, 0] <= 1.5)
        assert np.all(np.isfinite(result.accumulator.m2))
        assert result.n_steps == 2000
        assert result.report.checkpoints[-1].divergences == result.divergences

    def test_unflagged_below_threshold(self, gaussian10) -> None:
        result = run_mclmc(gaussian10, _config(n_steps=200), RngStream(0))
        assert result.divergences == 0
        assert not result.report.divergence_flagged


# ── q=2 ───────────────────────────────────────────────────────

class TestQ2:
    """q=2 해밀토니안 + bounce."""

    def test_requires_more_than_two_dimensions(self) -> None:
        config = _config(algorithm=Algorithm.Q2, L=math.inf, n_steps=10)
        with pytest.raises(ConfigurationError):
            run_q2(make_standard_gaussian(2), config, RngStream(0))

    def test_energy_starts_at_zero(self) -> None:
        target = make_standard_gaussian(10)
        x = np.ones(10)
        L, g = target.value_and_grad(x)
        p = np.eye(10)[0]
        state = PhysicalState(x=x, p=p, L_x=np.asarray(L), g_x=g, L0=float(L))
        assert q2_energy(state) == pytest.approx(0.0)

    def test_energy_conserved(self) -> None:
        target = make_standard_gaussian(10)
        x = np.ones(10)
        L, g = target.value_and_grad(x)
        state = PhysicalState(x=x, p=np.eye(10)[3], L_x=np.asarray(L), g_x=g, L0=float(L))
        for _ in range(200):
            state = q2_step(state, 0.01, target)
        assert abs(q2_energy(state)) < 1e-3

    def test_run_counts(self) -> None:
        config = _config(algorithm=Algorithm.Q2, eps=0.2, L=2.0, n_steps=300)
        result = run_q2(make_standard_gaussian(10), config, RngStream(0))
        assert result.grad_evals == 300
        assert result.n_steps == 300


class TestUnadjustedHMC:
    """Metropolis 보정 없는 HMC 기준선."""

    def test_converges_on_gaussian(self, gaussian10) -> None:
        config = _config(algorithm=Algorithm.UHMC, eps=0.2, L=2.0, n_steps=5000)
        result = run_uhmc(gaussian10, config, RngStream(0))
        assert result.report.checkpoints[-1].b2 < 0.15

    def test_dispatch(self, gaussian10) -> None:
        config = _config(algorithm=Algorithm.UHMC, eps=0.2, L=2.0, n_steps=20)
        assert run_chain(gaussian10, config, RngStream(0)).grad_evals == 20

    def test_harmonic_oscillator_period(self) -> None:
        """이차 𝓛: 주기 2π 후 원위치, 오차는 O(ε²)."""
        target = make_standard_gaussian(1)

        def period_error(n: int) -> tuple[float, float]:
            x = np.zeros(1)
            L, g = target.value_and_grad(x)
            state = PhysicalState(x=x, p=np.ones(1), L_x=np.asarray(L), g_x=g)
            start = hmc_energy(state)
            for _ in range(n):
                state = hmc_leapfrog_step(state, 2 * math.pi / n, target)
            return float(abs(state.x[0])), abs(hmc_energy(state) - start)

        coarse, coarse_energy = period_error(400)
        fine, fine_energy = period_error(800)
        assert fine < 1e-3
        assert 3.0 < coarse / fine < 5.0
        assert max(coarse_energy, fine_energy) < 1e-3


# ── Ensemble ──────────────────────────────────────────────────

class TestEnsemble:
    """벡터화 다중 체인."""

    def test_snapshot_bias(self, gaussian10) -> None:
        result = run_ensemble(gaussian10, _config(n_steps=500), 200, RngStream(0))
        assert result.grad_evals == 500
        assert result.accumulator.count == 200 * 500
        assert result.report.checkpoints[-1].b2 < 0.3

    def test_snapshot_uses_cross_chain_weights(self, gaussian10) -> None:
        """마지막 체크포인트 b₂ = 현재 위치들의 e^{−(𝓛 − min 𝓛)/d} 가중 편향."""
        result = run_ensemble(gaussian10, _config(n_steps=200), 50, RngStream(2))
        state = result.final_state
        weights = sample_weight(state.L_x, float(np.min(state.L_x)), gaussian10.d)
        expected = ensemble_bias(state.x, weights, gaussian10.truth_second_moments)
        assert result.report.checkpoints[-1].b2 == pytest.approx(expected.b2)

    def test_pooled_bias_shrinks_with_chains(self) -> None:
        """시드가 다른 체인의 누적기를 합칠수록 b₂가 줄어듭니다."""
        target = make_standard_gaussian(50)
        config = _config(L=7.0, n_steps=300)
        chains = [run_mclmc(target, config, RngStream.for_chain(0, c)) for c in range(16)]
        assert not np.allclose(chains[0].accumulator.m2, chains[1].accumulator.m2)

        def pooled_b2(k: int) -> float:
            acc = chains[0].accumulator
            for result in chains[1:k]:
                acc = acc.merge(result.accumulator)
            return second_moment_bias(acc, target.truth_second_moments).b2

        b2 = [pooled_b2(k) for k in (1, 4, 16)]
        assert b2[0] > b2[1] > b2[2]

    def test_rejects_q2(self, gaussian10) -> None:
        config = _config(algorithm=Algorithm.Q2, L=math.inf)
        with pytest.raises(ConfigurationError):
            run_ensemble(gaussian10, config, 10, RngStream(0))

    def test_rejects_zero_chains(self, gaussian10) -> None:
        with pytest.raises(ConfigurationError):
            run_ensemble(gaussian10, _config(), 0, RngStream(0))


# ── Cauchy ────────────────────────────────────────────────────

class TestEntropyBias:
    """두꺼운 꼬리 타겟은 엔트로피 편향으로 수렴을 측정합니다."""

    def test_checkpoints_carry_entropy_bias(self) -> None:
        target = make_cauchy(20)
        result = run_mclmc(target, _config(eps=1.0, L=5.0, n_steps=400), RngStream(0))
        assert result.entropy_accumulator is not None
        assert all(c.entropy_bias is not None for c in result.report.checkpoints)
        assert all(math.isnan(c.b2) for c in result.report.checkpoints)
