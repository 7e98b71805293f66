"""
Samplers — MCHMC · MCLMC · q=2 · 비보정 HMC
===========================================
각 샘플러는 가중 샘플을 MomentAccumulator에 스트리밍하고,
기하 간격 체크포인트에서 수렴 기록(b₁, σ, b₂, Var[E]/d)을 남깁니다.

흐름 (q=0):
1. 초기 위치 (prior draw 정책) + 등방 u
2. 스텝마다: [bounce | 적분 + 부분 갱신] → ECW 가중 누적
3. 발산 시: 스텝 중단, 집계, 마지막 유효 상태에서 full bounce
4. 체크포인트 곡선 → ESS

gradient 평가 횟수가 유일한 비용 단위입니다.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from typing import Any, Callable

import numpy as np

from core.errors import ConfigurationError, DivergenceError
from core.state import (
    Algorithm,
    Checkpoint,
    ConvergenceReport,
    EnergySummary,
    InitPolicy,
    SamplerConfig,
)
from engine.decoherence import RngStream, full_bounce, partial_refresh
from engine.dynamics import (
    INTEGRATORS,
    GradientCounter,
    SamplerState,
    energy_deviation,
    initial_state,
    sample_weight,
)
from engine.estimators import (
    ENTROPY_THRESHOLD,
    EnergyTrace,
    MomentAccumulator,
    B2_THRESHOLD,
    ensemble_bias,
    entropy_bias_cauchy,
    ess_from_curve,
    second_moment_bias,
)
from targets.base import TargetDistribution

logger = logging.getLogger(__name__)

_MAX_INIT_ATTEMPTS = 20


# ── Results ───────────────────────────────────────────────────

@dataclass
class ChainResult:
    """단일 체인(또는 앙상블) 실행 결과."""
    accumulator: MomentAccumulator
    report: ConvergenceReport
    grad_evals: int
    divergences: int
    energy: EnergySummary
    n_steps: int
    entropy_accumulator: MomentAccumulator | None = None
    energy_trace: EnergyTrace | None = None
    samples: np.ndarray | None = None
    final_state: Any = None

    @property
    def total_cost(self) -> int:
        """튜닝 비용을 포함한 gradient 평가 수."""
        return self.grad_evals + self.report.tuning_cost


@dataclass(frozen=True)
class PhysicalState:
    """전체 운동량 벡터 p를 갖는 상태 (q=2, 비보정 HMC).

    L0는 q=2 퍼텐셜의 기준 𝓛 (초기 위치의 값).
    """
    x: np.ndarray
    p: np.ndarray
    L_x: np.ndarray
    g_x: np.ndarray
    L0: float = 0.0


class CheckpointSchedule:
    """gradient 평가 수 기준 기하 간격 체크포인트."""

    def __init__(self, start: float = 100.0, ratio: float = 1.1) -> None:
        self.ratio = ratio
        self.next = start

    def due(self, grad_evals: int) -> bool:
        return grad_evals >= self.next

    def advance(self, grad_evals: int) -> None:
        while self.next <= grad_evals:
            self.next *= self.ratio


# ── Recorder ──────────────────────────────────────────────────

class _ChainRecorder:
    """샘플 누적, ECW 가중치 기준점 관리, 체크포인트 기록."""

    def __init__(
        self,
        target: TargetDistribution,
        config: SamplerConfig,
        *,
        weighted: bool,
        ensemble: bool = False,
        keep_samples: bool = False,
        tuning_cost: int = 0,
    ) -> None:
        self.target = target
        self.config = config
        self.weighted = weighted
        self.ensemble = ensemble
        self.tuning_cost = tuning_cost
        d = target.d
        self.acc = MomentAccumulator(d)
        self.entropy_acc = (
            MomentAccumulator(d) if target.entropy_per_dimension is not None else None
        )
        self.energy = EnergyTrace(d, record=config.record_energy)
        self.schedule = CheckpointSchedule(config.checkpoint_start, config.checkpoint_ratio)
        self.checkpoints: list[Checkpoint] = []
        self.samples: list[np.ndarray] | None = [] if keep_samples else None
        self.L_ref = math.inf
        self.divergences = 0
        self._w_sum = 0.0
        self._w_sq = 0.0
        self._w_n = 0
        self._last_x: np.ndarray | None = None
        self._last_L: np.ndarray | None = None

    # ── 누적 ──

    def _weights(self, L_x: np.ndarray) -> np.ndarray:
        if not self.weighted:
            return np.ones(np.shape(L_x))
        L_min = float(np.min(L_x))
        if L_min < self.L_ref:
            if math.isfinite(self.L_ref):
                factor = math.exp(-(self.L_ref - L_min) / self.target.d)
                self.acc.rescale_weights(factor)
                if self.entropy_acc is not None:
                    self.entropy_acc.rescale_weights(factor)
                self._w_sum *= factor
                self._w_sq *= factor ** 2
            self.L_ref = L_min
        return sample_weight(L_x, self.L_ref, self.target.d)

    def record(
        self,
        step: int,
        x: np.ndarray,
        L_x: np.ndarray,
        delta_e: np.ndarray | float,
        grad_evals: int,
    ) -> None:
        self.energy.extend(delta_e)
        w = self._weights(L_x)
        w_flat = np.atleast_1d(w)
        self._w_sum += float(np.sum(w_flat))
        self._w_sq += float(np.sum(np.square(w_flat)))
        self._w_n += w_flat.size

        transformed = self.target.eval_transform(x)
        if self.ensemble:
            # 누적기도 같은 교차 체인 가중치 (E_c 없음)
            keep = w_flat > 0
            if np.any(keep):
                self.acc.accumulate_batch(transformed[keep], w_flat[keep])
                if self.entropy_acc is not None:
                    self.entropy_acc.accumulate_batch(
                        self.target.neg_log_marginal(x[keep]), w_flat[keep]
                    )
        elif float(w) > 0:
            self.acc.accumulate(transformed, float(w))
            if self.entropy_acc is not None:
                self.entropy_acc.accumulate(self.target.neg_log_marginal(x), float(w))

        if self.samples is not None:
            self.samples.append(np.array(x, copy=True))
        self._last_x, self._last_L = x, L_x

        if self.schedule.due(grad_evals):
            self.checkpoint(step, grad_evals)
            self.schedule.advance(grad_evals)

    def checkpoint(self, step: int, grad_evals: int) -> None:
        entry: dict[str, Any] = {
            "step": step,
            "grad_evals": grad_evals,
            "var_e_per_d": self.energy.var_per_d,
            "divergences": self.divergences,
        }
        truth = self.target.truth_second_moments
        if truth is not None:
            if self.ensemble and self._last_x is not None:
                L_now = np.asarray(self._last_L)
                # 체인 간 가중치는 e^{−𝓛/d} 만 사용, 체인별 에너지 E_c 항은 넣지 않음
                w_now = (
                    sample_weight(L_now, float(np.min(L_now)), self.target.d)
                    if self.weighted else np.ones(L_now.shape)
                )
                bias = ensemble_bias(self.target.eval_transform(self._last_x), w_now, truth)
            else:
                bias = second_moment_bias(self.acc, truth)
            entry.update(b1=bias.b1, sigma=bias.sigma, b2=bias.b2)
        if self.entropy_acc is not None and self.entropy_acc.W > 0:
            entry["entropy_bias"] = entropy_bias_cauchy(self.entropy_acc, self.target.d)
        self.checkpoints.append(Checkpoint(**entry))

    # ── 종료 ──

    def finalize(self, n_steps: int, grad_evals: int, final_state: Any) -> ChainResult:
        if not self.checkpoints or self.checkpoints[-1].grad_evals < grad_evals:
            self.checkpoint(n_steps, grad_evals)

        if self.entropy_acc is not None:
            curve = [
                (c.grad_evals, math.nan if c.entropy_bias is None else c.entropy_bias)
                for c in self.checkpoints
            ]
            threshold = ENTROPY_THRESHOLD
        else:
            curve = [(c.grad_evals, c.b2) for c in self.checkpoints]
            threshold = B2_THRESHOLD
        ess = ess_from_curve(curve, threshold=threshold, cost_offset=self.tuning_cost)

        n_chains = 1 if not self.ensemble else int(np.shape(self._last_L)[0])
        flagged = self.divergences > self.config.divergence_flag_fraction * n_steps * n_chains
        if flagged:
            logger.warning(
                f"⚠️ {self.target.name}: {self.divergences} divergences in "
                f"{n_steps} steps (> {self.config.divergence_flag_fraction:.0%})"
            )

        mean_w = self._w_sum / self._w_n if self._w_n else 0.0
        var_w = self._w_sq / self._w_n - mean_w ** 2 if self._w_n else 0.0
        weight_cv = math.sqrt(max(var_w, 0.0)) / mean_w if mean_w > 0 else 0.0

        report = ConvergenceReport(
            checkpoints=self.checkpoints,
            ess=ess,
            eps=self.config.eps,
            L=self.config.L,
            tuning_cost=self.tuning_cost,
            divergences=self.divergences,
            divergence_flagged=flagged,
            weight_cv=weight_cv,
        )
        return ChainResult(
            accumulator=self.acc,
            report=report,
            grad_evals=grad_evals,
            divergences=self.divergences,
            energy=self.energy.summary(),
            n_steps=n_steps,
            entropy_accumulator=self.entropy_acc,
            energy_trace=self.energy if self.energy.record else None,
            samples=np.stack(self.samples) if self.samples else None,
            final_state=final_state,
        )


# ── 초기화 ────────────────────────────────────────────────────

def draw_initial_position(
    target: TargetDistribution,
    config: SamplerConfig,
    rng: RngStream,
    shape: tuple[int, ...] = (),
) -> np.ndarray:
    """초기 위치 정책에 따른 draw. 𝓛가 유한한 점이 나올 때까지 재시도."""
    for _ in range(_MAX_INIT_ATTEMPTS):
        if config.init is InitPolicy.PRIOR:
            x = target.prior_draw(rng.generator, shape)
        else:
            x = config.init_scale * rng.normal((*shape, target.d))
        with np.errstate(all="ignore"):
            L = target.neg_log_density(x)
        if np.all(np.isfinite(L)):
            return x
    raise ConfigurationError(
        f"could not draw a finite initial position for {target.name}"
    )


def _initial_q0_state(
    target: TargetDistribution,
    config: SamplerConfig,
    rng: RngStream,
    counter: GradientCounter,
    x0: np.ndarray | None,
    shape: tuple[int, ...] = (),
) -> SamplerState:
    x = draw_initial_position(target, config, rng, shape) if x0 is None else np.asarray(x0, float)
    u = rng.unit_vector(x.shape)
    return initial_state(x, u, counter)


def _recover(state: SamplerState, err: DivergenceError, rng: RngStream) -> SamplerState:
    """발산한 체인은 마지막 유효 상태에서 full bounce, 나머지는 제안 상태 채택."""
    bounced = full_bounce(state, rng)
    if err.proposed is None:
        return bounced
    mask = np.asarray(err.mask)
    rows = mask[..., None]
    proposed: SamplerState = err.proposed
    return SamplerState(
        x=np.where(rows, state.x, proposed.x),
        u=np.where(rows, bounced.u, proposed.u),
        log_r=np.where(mask, state.log_r, proposed.log_r),
        L_x=np.where(mask, state.L_x, proposed.L_x),
        g_x=np.where(rows, state.g_x, proposed.g_x),
    )


# ── q=0 샘플러 ────────────────────────────────────────────────

def _run_q0(
    target: TargetDistribution,
    config: SamplerConfig,
    rng: RngStream,
    *,
    refresh: Callable[[SamplerState, int], SamplerState] | None,
    bounce_interval: int | None,
    x0: np.ndarray | None,
    keep_samples: bool,
    tuning_cost: int,
    n_chains: int | None = None,
) -> ChainResult:
    counter = GradientCounter(target)
    shape = () if n_chains is None else (n_chains,)
    state = _initial_q0_state(target, config, rng, counter, x0, shape)
    counter.evaluations = 0
    L0 = state.L_x
    step_fn = INTEGRATORS[config.integrator]
    recorder = _ChainRecorder(
        target, config,
        weighted=True,
        ensemble=n_chains is not None,
        keep_samples=keep_samples,
        tuning_cost=tuning_cost,
    )
    recorder.energy.extend(np.zeros(shape))

    for n in range(config.n_steps):
        if bounce_interval is not None and n % bounce_interval == 0:
            state = full_bounce(state, rng)
        try:
            state = step_fn(state, config.eps, counter)
        except DivergenceError as err:
            recorder.divergences += int(np.sum(err.mask))
            logger.debug(f"💥 divergence at step {n} ({target.name})")
            state = _recover(state, err, rng)
        if refresh is not None:
            state = refresh(state, n)
        recorder.record(n + 1, state.x, state.L_x, energy_deviation(state, L0), counter.evaluations)

    return recorder.finalize(config.n_steps, counter.evaluations, state)


def run_mchmc(
    target: TargetDistribution,
    config: SamplerConfig,
    rng: RngStream,
    *,
    x0: np.ndarray | None = None,
    keep_samples: bool = False,
    tuning_cost: int = 0,
) -> ChainResult:
    """K = round(L/ε) 스텝마다 full bounce (스텝 0 포함)."""
    if config.algorithm is not Algorithm.MCHMC:
        raise ConfigurationError(f"run_mchmc called with algorithm={config.algorithm.value}")
    result = _run_q0(
        target, config, rng,
        refresh=None,
        bounce_interval=config.bounce_interval,
        x0=x0, keep_samples=keep_samples, tuning_cost=tuning_cost,
    )
    _log_chain(target, config, result)
    return result


def run_mclmc(
    target: TargetDistribution,
    config: SamplerConfig,
    rng: RngStream,
    *,
    x0: np.ndarray | None = None,
    keep_samples: bool = False,
    tuning_cost: int = 0,
) -> ChainResult:
    """매 스텝 적분 후 부분 방향 갱신."""
    if config.algorithm is not Algorithm.MCLMC:
        raise ConfigurationError(f"run_mclmc called with algorithm={config.algorithm.value}")
    result = _run_q0(
        target, config, rng,
        refresh=lambda state, _n: partial_refresh(state, config.eps, config.L, rng),
        bounce_interval=None,
        x0=x0, keep_samples=keep_samples, tuning_cost=tuning_cost,
    )
    _log_chain(target, config, result)
    return result


def run_ensemble(
    target: TargetDistribution,
    config: SamplerConfig,
    n_chains: int,
    rng: RngStream,
) -> ChainResult:
    """여러 체인을 동시에 적분 (벡터화).

    체크포인트의 b₂는 체인들의 현재 위치(가중)로 계산합니다.
    누적기에는 모든 체인의 전체 궤적이 합쳐집니다.
    """
    if n_chains < 1:
        raise ConfigurationError(f"n_chains must be >= 1, got {n_chains}")
    if config.algorithm is Algorithm.MCHMC:
        refresh = None
        interval = config.bounce_interval
    elif config.algorithm is Algorithm.MCLMC:
        refresh = lambda state, _n: partial_refresh(state, config.eps, config.L, rng)  # noqa: E731
        interval = None
    else:
        raise ConfigurationError(
            f"ensemble mode supports mchmc/mclmc, not {config.algorithm.value}"
        )
    result = _run_q0(
        target, config, rng,
        refresh=refresh, bounce_interval=interval,
        x0=None, keep_samples=False, tuning_cost=0,
        n_chains=n_chains,
    )
    logger.info(
        f"🔁 ensemble {config.algorithm.value} × {n_chains}: "
        f"final b₂={result.report.checkpoints[-1].b2:.4f}"
    )
    return result


# ── q=2 ───────────────────────────────────────────────────────

def _q2_potential(L_x: np.ndarray, L0: float, d: int) -> np.ndarray:
    return -0.5 * np.exp(-2.0 * (L_x - L0) / (d - 2))


def q2_energy(state: PhysicalState) -> float:
    """H = Π²/2 − e^{−2(𝓛−𝓛₀)/(d−2)}/2 (초기값 0)."""
    d = state.x.shape[-1]
    return float(0.5 * np.sum(np.square(state.p)) + _q2_potential(state.L_x, state.L0, d))


def _q2_force(state: PhysicalState) -> np.ndarray:
    d = state.x.shape[-1]
    return -state.g_x * np.exp(-2.0 * (state.L_x - state.L0) / (d - 2)) / (d - 2)


def _physical_evaluate(state: PhysicalState, target: Any) -> tuple[PhysicalState, bool]:
    L, g = target.value_and_grad(state.x)
    finite = bool(np.all(np.isfinite(L)) and np.all(np.isfinite(g)))
    return replace(state, L_x=np.asarray(L, float), g_x=np.asarray(g, float)), finite


def q2_step(state: PhysicalState, eps: float, target: Any) -> PhysicalState:
    """ẋ = Π, Π̇ = −∇𝓛·e^{−2𝓛/(d−2)}/(d−2) 에 대한 leapfrog.

    Raises:
        DivergenceError: 새 위치에서 평가가 유한하지 않음
    """
    d = state.x.shape[-1]
    if d <= 2:
        raise ConfigurationError(f"q=2 dynamics needs d > 2, got {d}")
    p_half = state.p + 0.5 * eps * _q2_force(state)
    moved = replace(state, p=p_half, x=state.x + eps * p_half)
    moved, finite = _physical_evaluate(moved, target)
    if not finite:
        raise DivergenceError(mask=np.asarray(True), proposed=None)
    moved = replace(moved, p=p_half + 0.5 * eps * _q2_force(moved))
    if not np.all(np.isfinite(moved.p)):
        raise DivergenceError(mask=np.asarray(True), proposed=None)
    return moved


def run_q2(
    target: TargetDistribution,
    config: SamplerConfig,
    rng: RngStream,
    *,
    x0: np.ndarray | None = None,
    tuning_cost: int = 0,
) -> ChainResult:
    """q=2 해밀토니안 + |Π| 보존 bounce. 샘플은 가중치 없음."""
    if config.algorithm is not Algorithm.Q2:
        raise ConfigurationError(f"run_q2 called with algorithm={config.algorithm.value}")
    if target.d <= 2:
        raise ConfigurationError(f"q=2 dynamics needs d > 2, got {target.d}")
    counter = GradientCounter(target)
    x = draw_initial_position(target, config, rng) if x0 is None else np.asarray(x0, float)
    L, g = counter.value_and_grad(x)
    counter.evaluations = 0
    # 기준 𝓛₀에서 |Π| = 1 이면 전체 에너지가 0
    state = PhysicalState(x=x, p=rng.unit_vector((target.d,)), L_x=np.asarray(L, float),
                          g_x=np.asarray(g, float), L0=float(L))
    recorder = _ChainRecorder(target, config, weighted=False, tuning_cost=tuning_cost)
    recorder.energy.extend(0.0)
    K = config.bounce_interval

    for n in range(config.n_steps):
        if K is not None and n % K == 0:
            state = replace(state, p=np.linalg.norm(state.p) * rng.unit_vector(state.p.shape))
        try:
            state = q2_step(state, config.eps, counter)
        except DivergenceError:
            recorder.divergences += 1
            state = replace(state, p=np.linalg.norm(state.p) * rng.unit_vector(state.p.shape))
        recorder.record(n + 1, state.x, state.L_x, q2_energy(state), counter.evaluations)

    result = recorder.finalize(config.n_steps, counter.evaluations, state)
    _log_chain(target, config, result)
    return result


# ── 비보정 HMC ────────────────────────────────────────────────

def hmc_leapfrog_step(state: PhysicalState, eps: float, target: Any) -> PhysicalState:
    """H = Π²/2 + 𝓛 에 대한 표준 leapfrog."""
    p_half = state.p - 0.5 * eps * state.g_x
    moved = replace(state, p=p_half, x=state.x + eps * p_half)
    moved, finite = _physical_evaluate(moved, target)
    if not finite:
        raise DivergenceError(mask=np.asarray(True), proposed=None)
    return replace(moved, p=p_half - 0.5 * eps * moved.g_x)


def hmc_energy(state: PhysicalState) -> float:
    return float(0.5 * np.sum(np.square(state.p)) + state.L_x)


def run_uhmc(
    target: TargetDistribution,
    config: SamplerConfig,
    rng: RngStream,
    *,
    x0: np.ndarray | None = None,
    tuning_cost: int = 0,
) -> ChainResult:
    """K 스텝마다 가우시안 운동량 재추출, Metropolis 보정 없음."""
    if config.algorithm is not Algorithm.UHMC:
        raise ConfigurationError(f"run_uhmc called with algorithm={config.algorithm.value}")
    counter = GradientCounter(target)
    x = draw_initial_position(target, config, rng) if x0 is None else np.asarray(x0, float)
    L, g = counter.value_and_grad(x)
    counter.evaluations = 0
    state = PhysicalState(x=x, p=rng.normal((target.d,)), L_x=np.asarray(L, float),
                          g_x=np.asarray(g, float))
    recorder = _ChainRecorder(target, config, weighted=False, tuning_cost=tuning_cost)
    recorder.energy.extend(0.0)
    K = config.bounce_interval
    H_ref = hmc_energy(state)

    for n in range(config.n_steps):
        if K is not None and n % K == 0:
            state = replace(state, p=rng.normal(state.p.shape))
            H_ref = hmc_energy(state)
        try:
            state = hmc_leapfrog_step(state, config.eps, counter)
        except DivergenceError:
            recorder.divergences += 1
            state = replace(state, p=rng.normal(state.p.shape))
            H_ref = hmc_energy(state)
        recorder.record(n + 1, state.x, state.L_x, hmc_energy(state) - H_ref, counter.evaluations)

    result = recorder.finalize(config.n_steps, counter.evaluations, state)
    _log_chain(target, config, result)
    return result


# ── Dispatch ──────────────────────────────────────────────────

def run_chain(
    target: TargetDistribution,
    config: SamplerConfig,
    rng: RngStream,
    *,
    x0: np.ndarray | None = None,
    tuning_cost: int = 0,
) -> ChainResult:
    """config.algorithm에 맞는 샘플러 실행."""
    if config.algorithm is Algorithm.MCHMC:
        return run_mchmc(target, config, rng, x0=x0, tuning_cost=tuning_cost)
    if config.algorithm is Algorithm.MCLMC:
        return run_mclmc(target, config, rng, x0=x0, tuning_cost=tuning_cost)
    if config.algorithm is Algorithm.Q2:
        return run_q2(target, config, rng, x0=x0, tuning_cost=tuning_cost)
    return run_uhmc(target, config, rng, x0=x0, tuning_cost=tuning_cost)


def _log_chain(target: TargetDistribution, config: SamplerConfig, result: ChainResult) -> None:
    logger.info(
        f"🔁 {config.algorithm.value}/{config.integrator.value} on {target.name}: "
        f"{result.n_steps} steps, {result.grad_evals} grads, "
        f"ESS={result.report.ess:.4g}, divergences={result.divergences}"
    )
