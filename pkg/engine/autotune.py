"""
Autotune — 2단계 하이퍼파라미터 튜닝
===================================
1. 스텝 크기: ε ← ε·(target·d / Var[E])^{1/4} 를 몇 라운드 반복.
   같은 궤적에서 σ_eff² = d⁻¹ Σ Var[x_i] 를 부산물로 추정.
2. 결맞음 길이: L = σ_eff·√d 로 시작, 짧은 예비 실행의
   자기상관 n_eff로 l = ε / mean(n_eff/n), L = 0.4·l 로 보정.

튜닝은 단일 체인에서 수행하며, 결과 TuningReport는 불변입니다.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from core.errors import ConfigurationError, ConstantChainError, InsufficientChainError, SamplerError
from core.state import Algorithm, SamplerConfig, TuningReport
from engine.decoherence import RngStream
from engine.dynamics import sample_weight
from engine.estimators import MomentAccumulator, autocorr_neff
from engine.samplers import run_mchmc, run_mclmc
from targets.base import TargetDistribution

logger = logging.getLogger(__name__)

# ── 상수 ──────────────────────────────────────────────────────
EPS_INITIAL = 0.5
STEPS_PER_ROUND = 300
ROUNDS = 3
VAR_E_TARGET = 0.0005          # 더 엄격한 대안: 0.0003
BURN_IN_FRACTION = 0.1
MAX_RETRIES = 8
MAX_GROWTH = 10.0              # 라운드당 ε 증가 상한
L_FACTOR = 0.4
SUFFICIENT_LENGTHS = 10.0      # n > 10·l/ε
MIN_REFINE_STEPS = 200
MAX_REFINE_STEPS = 10_000
_DIVERGENT_FRACTION = 0.1


@dataclass(frozen=True)
class StepSizeTuning:
    """스텝 크기 튜닝 결과."""
    eps: float
    sigma_eff: float
    var_e_per_d: float
    grad_evals: int
    x: np.ndarray


@dataclass(frozen=True)
class RefinedLength:
    """자기상관 기반 L 보정 결과."""
    L: float
    l: float
    neff_per_dim: np.ndarray
    steps: int
    grad_evals: int
    sufficient: bool
    failed: bool
    x: np.ndarray


# ── 순수 함수 ─────────────────────────────────────────────────

def step_size_update(eps: float, var_e: float, d: int, target: float = VAR_E_TARGET) -> float:
    """ε ← ε·(target·d/Var[E])^{1/4}. Var[E]/d > target이면 줄이고, 작으면 키움."""
    if var_e <= 0.0:
        return eps * MAX_GROWTH
    return eps * min((target * d / var_e) ** 0.25, MAX_GROWTH)


def initial_decoherence_length(sigma_eff: float, d: int) -> float:
    """L = σ_eff·√d."""
    if not sigma_eff > 0:
        raise ValueError(f"sigma_eff must be > 0, got {sigma_eff}")
    return sigma_eff * math.sqrt(d)


def decoherence_length_from_neff(eps: float, neff_fraction: float) -> tuple[float, float]:
    """(l, L) with l = ε / mean(n_eff/n), L = 0.4·l."""
    if not neff_fraction > 0:
        raise ValueError(f"n_eff fraction must be > 0, got {neff_fraction}")
    l = eps / neff_fraction
    return l, L_FACTOR * l


def effective_width(target: TargetDistribution, samples: np.ndarray) -> float:
    """σ_eff = sqrt(d⁻¹ Σ Var[x_i]), 샘플러와 같은 ECW 가중 분산으로 추정."""
    L_x = target.neg_log_density(samples)
    finite = np.isfinite(L_x)
    if not np.any(finite):
        raise SamplerError(f"no finite tuning samples on {target.name}")
    L_x, samples = L_x[finite], samples[finite]
    weights = sample_weight(L_x, float(np.min(L_x)), target.d)
    acc = MomentAccumulator(target.d).accumulate_batch(samples, weights)
    return float(np.sqrt(np.mean(acc.variance)))


def _run(target: TargetDistribution, config: SamplerConfig, rng: RngStream, x0, **kwargs):
    if config.algorithm is Algorithm.MCHMC:
        return run_mchmc(target, config, rng, x0=x0, **kwargs)
    return run_mclmc(target, config, rng, x0=x0, **kwargs)


# ── 1단계: ε ──────────────────────────────────────────────────

def tune_step_size(
    target: TargetDistribution,
    config: SamplerConfig,
    rng: RngStream,
    *,
    x0: np.ndarray | None = None,
    eps0: float = EPS_INITIAL,
    steps_per_round: int = STEPS_PER_ROUND,
    rounds: int = ROUNDS,
    var_target: float = VAR_E_TARGET,
    burn_in_fraction: float = BURN_IN_FRACTION,
    max_retries: int = MAX_RETRIES,
) -> StepSizeTuning:
    """에너지 요동 목표로 ε 결정, σ_eff 동시 추정.

    Raises:
        SamplerError: 재시도 후에도 Var[E]가 유한하지 않음
    """
    d = target.d
    eps = eps0
    L = math.sqrt(d)
    x = x0
    spent = 0
    kept: list[np.ndarray] = []
    var_e = math.nan

    for round_idx in range(rounds):
        for _attempt in range(max_retries):
            round_config = config.model_copy(update={
                "algorithm": Algorithm.MCLMC,
                "eps": eps,
                "L": L,
                "n_steps": steps_per_round,
                "record_energy": True,
            })
            result = run_mclmc(target, round_config, rng, x0=x, keep_samples=True)
            spent += result.grad_evals
            energies = result.energy_trace.values[1:]
            burn = int(burn_in_fraction * energies.size)
            var_e = float(np.var(energies[burn:]))
            divergent = result.divergences > _DIVERGENT_FRACTION * steps_per_round
            if math.isfinite(var_e) and not divergent:
                break
            logger.warning(
                f"⚠️ divergent warmup at ε={eps:.4g} "
                f"(Var[E]={var_e}, divergences={result.divergences}); halving"
            )
            eps *= 0.5
        else:
            raise SamplerError(
                f"step-size tuning diverged after {max_retries} retries on {target.name}"
            )

        x = result.final_state.x
        kept.append(result.samples[burn:])
        new_eps = step_size_update(eps, var_e, d, var_target)
        logger.debug(
            f"🎯 round {round_idx + 1}/{rounds}: Var[E]/d={var_e / d:.3g} "
            f"ε {eps:.4g} → {new_eps:.4g}"
        )
        eps = new_eps

    sigma_eff = effective_width(target, np.concatenate(kept))
    logger.info(f"🎯 ε tuned to {eps:.4g}, σ_eff={sigma_eff:.4g} ({spent} grads)")
    return StepSizeTuning(
        eps=eps,
        sigma_eff=sigma_eff,
        var_e_per_d=var_e / d,
        grad_evals=spent,
        x=x,
    )


# ── 2단계: L ──────────────────────────────────────────────────

def refine_decoherence_length(
    target: TargetDistribution,
    config: SamplerConfig,
    n: int,
    rng: RngStream,
    *,
    x0: np.ndarray | None = None,
) -> RefinedLength:
    """예비 실행 n 스텝의 좌표별 n_eff로 L을 보정.

    n_eff 추정이 실패하면 failed=True, L은 config.L 유지.
    """
    run_config = config.model_copy(update={"n_steps": n})
    result = _run(target, run_config, rng, x0, keep_samples=True)
    x_final = result.final_state.x

    try:
        neff = np.atleast_1d(autocorr_neff(result.samples))
    except (ConstantChainError, InsufficientChainError) as e:
        logger.warning(f"⚠️ L refinement failed ({e}); keeping L={config.L:.4g}")
        return RefinedLength(
            L=config.L, l=math.nan, neff_per_dim=np.zeros(0), steps=n,
            grad_evals=result.grad_evals, sufficient=False, failed=True, x=x_final,
        )

    fraction = float(np.mean(neff)) / n
    if not (math.isfinite(fraction) and fraction > 0):
        logger.warning(f"⚠️ non-positive n_eff estimate; keeping L={config.L:.4g}")
        return RefinedLength(
            L=config.L, l=math.nan, neff_per_dim=neff, steps=n,
            grad_evals=result.grad_evals, sufficient=False, failed=True, x=x_final,
        )

    l, L = decoherence_length_from_neff(config.eps, fraction)
    sufficient = n > SUFFICIENT_LENGTHS * l / config.eps
    logger.info(
        f"🎯 L refined: mean n_eff/n={fraction:.4g}, l={l:.4g}, L={L:.4g}"
        + ("" if sufficient else " (preliminary run too short)")
    )
    return RefinedLength(
        L=L, l=l, neff_per_dim=neff, steps=n,
        grad_evals=result.grad_evals, sufficient=sufficient, failed=False, x=x_final,
    )


def auto_tune(
    target: TargetDistribution,
    config: SamplerConfig,
    rng: RngStream,
    *,
    eps0: float = EPS_INITIAL,
    steps_per_round: int = STEPS_PER_ROUND,
    rounds: int = ROUNDS,
    var_target: float = VAR_E_TARGET,
    refine_steps: int | None = None,
) -> TuningReport:
    """ε → L 초기값 → L 보정 전체 파이프라인.

    Raises:
        ConfigurationError: mchmc/mclmc 이외의 알고리즘
    """
    if config.algorithm not in (Algorithm.MCHMC, Algorithm.MCLMC):
        raise ConfigurationError(
            f"auto-tuning supports mchmc/mclmc; use --tune grid for {config.algorithm.value}"
        )
    stage1 = tune_step_size(
        target, config, rng,
        eps0=eps0, steps_per_round=steps_per_round, rounds=rounds, var_target=var_target,
    )
    L_init = initial_decoherence_length(stage1.sigma_eff, target.d)
    base = config.with_hyperparameters(stage1.eps, L_init)

    n = refine_steps or int(np.clip(
        math.ceil(SUFFICIENT_LENGTHS * L_init / (L_FACTOR * stage1.eps)),
        MIN_REFINE_STEPS, MAX_REFINE_STEPS,
    ))
    refined = refine_decoherence_length(target, base, n, rng, x0=stage1.x)
    spent = stage1.grad_evals + refined.grad_evals

    if not refined.failed and not refined.sufficient and refine_steps is None:
        longer = int(min(math.ceil(1.2 * SUFFICIENT_LENGTHS * refined.l / stage1.eps), MAX_REFINE_STEPS))
        if longer > n:
            refined = refine_decoherence_length(target, base, longer, rng, x0=refined.x)
            spent += refined.grad_evals

    report = TuningReport(
        eps=stage1.eps,
        L=refined.L if not refined.failed else L_init,
        sigma_eff=stage1.sigma_eff,
        var_e_per_d=stage1.var_e_per_d,
        grad_evals=spent,
        neff_per_dim=[float(v) for v in refined.neff_per_dim],
        L_initial=L_init,
        refine_steps=refined.steps,
        refine_sufficient=refined.sufficient,
        refine_failed=refined.failed,
    )
    logger.info(
        f"✅ auto-tune {target.name}: ε={report.eps:.4g}, L={report.L:.4g} "
        f"(cost {report.grad_evals} grads)"
    )
    return report
