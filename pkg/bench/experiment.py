"""
Experiment — 설정 · 튜닝 · 시드 분산 · 집계
===========================================
하나의 실험은 다음 순서로 진행됩니다:

1. 타겟 생성 (registry)
2. 하이퍼파라미터 결정: auto-tune | grid search | 고정값
3. 시드별 체인 실행 (ProcessPoolExecutor로 병렬 가능)
4. 결정적 병합 → ExperimentReport

시드 k의 난수 스트림은 (seed, k)만으로 정해지므로 병렬/순차 실행의
결과가 동일합니다. 튜닝은 한 번 수행하고 모든 시드가 공유합니다.
"""

from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from core.config_loader import ConfigLoader
from core.errors import ConfigurationError, SamplerError
from core.observability import record_chain, record_tuning
from core.state import (
    INTEGRATOR_ALIASES,
    Algorithm,
    InitPolicy,
    Integrator,
    SamplerConfig,
    TuneMode,
    TuningReport,
)
from engine.autotune import EPS_INITIAL, ROUNDS, STEPS_PER_ROUND, VAR_E_TARGET, auto_tune
from engine.decoherence import RngStream
from engine.estimators import MIN_CHAIN_LENGTH
from engine.samplers import ChainResult, run_chain, run_ensemble
from targets.base import TargetDistribution
from targets.registry import DEFAULT_DIMENSIONS, TARGET_NAMES, TargetSpec, build_target
from utils.hardware_probe import HardwareProbe
from utils.structured_logger import RunEventLogger

logger = logging.getLogger(__name__)

# ── 키 매핑 ───────────────────────────────────────────────────
# 평탄한 key → TargetSpec 필드
TARGET_KEYS: dict[str, str] = {
    "target": "name",
    "d": "d",
    "kappa": "kappa",
    "q": "Q",
    "spacing": "spacing",
    "target_seed": "seed",
    "returns_csv": "returns_csv",
    "reference": "reference",
}

EXPERIMENT_KEYS = frozenset({
    "alg", "integrator", "eps", "L", "steps", "seeds", "seed", "tune", "out",
    "chains", "workers", "eps_grid", "L_grid", "init", "init_scale",
    "var_e_target", "checkpoint_start", "checkpoint_ratio", "refine_steps",
    "divergence_flag_fraction",
})

RECOGNISED_KEYS = frozenset(TARGET_KEYS) | EXPERIMENT_KEYS

TUNING_STREAM = 1   # RngStream.for_chain purpose (0 = 체인)


def _describe(err: ValidationError) -> str:
    return "; ".join(
        f"{'.'.join(str(p) for p in e['loc']) or 'config'}: {e['msg']}" for e in err.errors()
    )


def base_defaults(loader: ConfigLoader) -> dict[str, Any]:
    """base.yaml에서 실험 기본값 추출 (평탄한 key 형태)."""
    defaults = {
        "alg": loader.get("sampler.algorithm"),
        "integrator": loader.get("sampler.integrator"),
        "steps": loader.get("sampler.steps"),
        "seeds": loader.get("sampler.seeds"),
        "seed": loader.get("sampler.seed"),
        "init": loader.get("sampler.init"),
        "init_scale": loader.get("sampler.init_scale"),
        "divergence_flag_fraction": loader.get("sampler.divergence_flag_fraction"),
        "checkpoint_start": loader.get("checkpoints.start"),
        "checkpoint_ratio": loader.get("checkpoints.ratio"),
        "var_e_target": loader.get("tuning.var_e_target"),
        "workers": loader.get("harness.workers"),
        "out": loader.get("harness.out"),
    }
    return {k: v for k, v in defaults.items() if v is not None}


# ── Experiment Config ─────────────────────────────────────────

class ExperimentConfig(BaseModel):
    """실험 한 번의 전체 설정.

    ε/L은 튜닝 모드에 따라 비어 있을 수 있으므로, SamplerConfig는
    하이퍼파라미터가 정해진 뒤 sampler_config()로 만듭니다.
    """

    model_config = ConfigDict(frozen=True, extra="forbid", ser_json_inf_nan="constants")

    target: TargetSpec
    algorithm: Algorithm = Algorithm.MCLMC
    integrator: Integrator = Integrator.LEAPFROG
    eps: float | None = Field(default=None, gt=0)
    L: float | None = Field(default=None, gt=0)
    steps: int = Field(default=10_000, ge=1)
    seeds: int = Field(default=10, ge=1)
    seed: int = 0
    tune: TuneMode = TuneMode.AUTO
    chains: int | None = Field(default=None, ge=1)
    workers: int = Field(default=0, ge=0)
    out: Path = Path("results")
    eps_grid: tuple[float, ...] = ()
    L_grid: tuple[float, ...] = ()

    init: InitPolicy = InitPolicy.PRIOR
    init_scale: float = Field(default=1.0, gt=0)
    var_e_target: float = Field(default=VAR_E_TARGET, gt=0)
    checkpoint_start: float = Field(default=100.0, gt=0)
    checkpoint_ratio: float = Field(default=1.1, gt=1)
    divergence_flag_fraction: float = Field(default=0.1, ge=0, le=1)
    refine_steps: int | None = Field(default=None, ge=MIN_CHAIN_LENGTH)

    @field_validator("integrator", mode="before")
    @classmethod
    def _resolve_alias(cls, value: object) -> object:
        if isinstance(value, str) and value.lower() in INTEGRATOR_ALIASES:
            return INTEGRATOR_ALIASES[value.lower()]
        return value

    @field_validator("eps", "L", mode="before")
    @classmethod
    def _parse_float(cls, value: object) -> object:
        if isinstance(value, str):
            if value.strip().lower() in ("", "none"):
                return None
            return float(value)
        return value

    @field_validator("eps_grid", "L_grid", mode="before")
    @classmethod
    def _parse_grid(cls, value: object) -> object:
        if isinstance(value, str):
            return tuple(float(v) for v in value.replace(",", " ").split())
        return value

    @field_validator("eps_grid", "L_grid")
    @classmethod
    def _positive_grid(cls, value: tuple[float, ...]) -> tuple[float, ...]:
        if any(not v > 0 for v in value):
            raise ValueError("grid values must be > 0")
        return value

    @model_validator(mode="after")
    def _check_combination(self) -> ExperimentConfig:
        if self.target.name.lower() not in TARGET_NAMES:
            raise ValueError(
                f"unknown target {self.target.name!r}; choose from {', '.join(TARGET_NAMES)}"
            )
        q0 = self.algorithm in (Algorithm.MCHMC, Algorithm.MCLMC)
        if self.tune is TuneMode.NONE and self.eps is None:
            raise ValueError("tune=none requires eps")
        if self.tune is TuneMode.AUTO and not q0:
            raise ValueError(f"auto-tuning supports mchmc/mclmc; use tune=grid for {self.algorithm.value}")
        if self.chains is not None and not q0:
            raise ValueError(f"ensemble mode supports mchmc/mclmc, not {self.algorithm.value}")
        return self

    @classmethod
    def from_sources(
        cls,
        file_values: dict[str, Any] | None = None,
        cli_values: dict[str, Any] | None = None,
        *,
        loader: ConfigLoader | None = None,
    ) -> ExperimentConfig:
        """base.yaml < 실험 파일 < CLI 순으로 병합 후 검증.

        Raises:
            ConfigurationError: 알 수 없는 키, 타겟 누락, 검증 실패
        """
        loader = loader or ConfigLoader()
        merged: dict[str, Any] = {
            **base_defaults(loader),
            **(file_values or {}),
            **{k: v for k, v in (cli_values or {}).items() if v is not None},
        }
        unknown = sorted(set(merged) - RECOGNISED_KEYS)
        if unknown:
            raise ConfigurationError(f"unrecognised config keys: {', '.join(unknown)}")
        if "target" not in merged:
            raise ConfigurationError("no target given (set 'target' or pass --target)")

        target_fields = {TARGET_KEYS[k]: merged.pop(k) for k in list(merged) if k in TARGET_KEYS}
        merged["algorithm"] = merged.pop("alg", Algorithm.MCLMC)
        try:
            return cls(target=TargetSpec(**target_fields), **merged)
        except ValidationError as e:
            raise ConfigurationError(_describe(e)) from e
        except ValueError as e:
            raise ConfigurationError(str(e)) from e

    @property
    def dimension(self) -> int:
        return self.target.d or DEFAULT_DIMENSIONS.get(self.target.name.lower(), 0)

    def sampler_config(self, eps: float, L: float) -> SamplerConfig:
        """정해진 (ε, L)로 체인 설정 생성.

        Raises:
            ConfigurationError: K = round(L/ε) < 1 등 검증 실패
        """
        try:
            return SamplerConfig(
                algorithm=self.algorithm,
                integrator=self.integrator,
                eps=eps,
                L=L,
                n_steps=self.steps,
                seed=self.seed,
                checkpoint_start=self.checkpoint_start,
                checkpoint_ratio=self.checkpoint_ratio,
                init=self.init,
                init_scale=self.init_scale,
                divergence_flag_fraction=self.divergence_flag_fraction,
            )
        except ValidationError as e:
            raise ConfigurationError(_describe(e)) from e


# ── Seed fan-out ──────────────────────────────────────────────

@dataclass(frozen=True)
class SeedTask:
    """시드 하나의 실행 단위 (프로세스 간 전달 가능)."""
    index: int
    base_seed: int
    target: TargetDistribution
    config: SamplerConfig
    tuning_cost: int = 0
    chains: int | None = None


def run_seed(task: SeedTask) -> ChainResult:
    rng = RngStream.for_chain(task.base_seed, task.index)
    if task.chains is not None:
        return run_ensemble(task.target, task.config, task.chains, rng)
    return run_chain(task.target, task.config, rng, tuning_cost=task.tuning_cost)


def run_seeds(
    target: TargetDistribution,
    config: SamplerConfig,
    n_seeds: int,
    base_seed: int = 0,
    *,
    tuning_cost: int = 0,
    chains: int | None = None,
    workers: int = 1,
) -> list[ChainResult]:
    """시드 0..n_seeds−1 실행. 결과 순서는 시드 순서와 같습니다."""
    tasks = [
        SeedTask(index=k, base_seed=base_seed, target=target, config=config,
                 tuning_cost=tuning_cost, chains=chains)
        for k in range(n_seeds)
    ]
    if workers <= 1 or n_seeds == 1:
        return [run_seed(t) for t in tasks]
    logger.info(f"🔁 fanning out {n_seeds} seeds over {workers} workers")
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run_seed, tasks))


def resolve_workers(config: ExperimentConfig, n_tasks: int, loader: ConfigLoader | None = None) -> int:
    """config.workers > 0이면 그대로, 0이면 하드웨어 기반 추천."""
    if config.workers > 0:
        return min(config.workers, max(n_tasks, 1))
    loader = loader or ConfigLoader()
    return HardwareProbe().recommend_workers(
        n_tasks, memory_per_task_mb=float(loader.get("harness.memory_per_task_mb", 256))
    )


def _ess_stats(values: list[float]) -> tuple[float, float]:
    arr = np.asarray(values, dtype=float)
    std = float(np.std(arr, ddof=1)) if arr.size > 1 else 0.0
    return float(np.mean(arr)), std


# ── Grid search ───────────────────────────────────────────────

class GridCell(BaseModel):
    """그리드 한 칸의 결과."""
    model_config = ConfigDict(ser_json_inf_nan="constants")

    eps: float
    L: float
    ess_mean: float = 0.0
    ess_std: float = 0.0
    final_b2: float | None = None
    grad_evals: int = 0
    skipped: bool = False


class GridSearchResult(BaseModel):
    """전체 그리드 결과 + ESS 최대 칸."""
    model_config = ConfigDict(ser_json_inf_nan="constants")

    cells: list[GridCell]
    best_eps: float
    best_L: float
    best_ess: float
    converged: bool


def default_grid(d: int, loader: ConfigLoader | None = None) -> tuple[tuple[float, ...], tuple[float, ...]]:
    """base.yaml grid.*_factors × √d."""
    loader = loader or ConfigLoader()
    scale = math.sqrt(d)
    eps_factors = loader.get("grid.eps_factors", [0.1, 0.4, 1.0])
    L_factors = loader.get("grid.L_factors", [0.5, 1.0, 2.0])
    return (
        tuple(float(f) * scale for f in eps_factors),
        tuple(float(f) * scale for f in L_factors),
    )


def grid_search(
    config: ExperimentConfig,
    eps_grid: tuple[float, ...] | list[float],
    L_grid: tuple[float, ...] | list[float],
    *,
    target: TargetDistribution | None = None,
    workers: int = 1,
) -> GridSearchResult:
    """(ε, L) 전체 조합 평가 후 평균 ESS 최대 칸 선택.

    동점이면 그리드 순서상 먼저 나온 칸. 모든 칸의 ESS가 0이면
    converged=False이고, 최종 b₂가 가장 작은 칸을 best로 보고합니다.

    Raises:
        ConfigurationError: 빈 그리드, 모든 칸이 무효
    """
    if len(eps_grid) == 0 or len(L_grid) == 0:
        raise ConfigurationError("grid search needs non-empty eps and L grids")
    target = target or build_target(config.target)

    cells: list[GridCell] = []
    for eps in eps_grid:
        for L in L_grid:
            try:
                sampler = config.sampler_config(eps, L)
            except ConfigurationError as e:
                logger.warning(f"⚠️ skipping grid cell ε={eps:.4g}, L={L:.4g}: {e}")
                cells.append(GridCell(eps=eps, L=L, skipped=True))
                continue
            results = run_seeds(
                target, sampler, config.seeds, config.seed,
                chains=config.chains, workers=workers,
            )
            ess_mean, ess_std = _ess_stats([r.report.ess for r in results])
            final_b2 = float(np.mean([r.report.checkpoints[-1].b2 for r in results]))
            cells.append(GridCell(
                eps=eps, L=L, ess_mean=ess_mean, ess_std=ess_std,
                final_b2=final_b2 if math.isfinite(final_b2) else None,
                grad_evals=sum(r.grad_evals for r in results),
            ))
            logger.debug(f"🎯 grid ε={eps:.4g}, L={L:.4g}: ESS={ess_mean:.4g}")

    valid = [c for c in cells if not c.skipped]
    if not valid:
        raise ConfigurationError("every grid cell was invalid for this algorithm")

    best = valid[0]
    for cell in valid[1:]:
        if cell.ess_mean > best.ess_mean:
            best = cell
    converged = best.ess_mean > 0
    if not converged:
        with_b2 = [c for c in valid if c.final_b2 is not None]
        if with_b2:
            best = min(with_b2, key=lambda c: c.final_b2)
        logger.warning(
            f"⚠️ no grid cell reached the convergence threshold on {target.name}; "
            f"reporting lowest final b₂ cell ε={best.eps:.4g}, L={best.L:.4g}"
        )
    else:
        logger.info(f"✅ grid best ε={best.eps:.4g}, L={best.L:.4g}, ESS={best.ess_mean:.4g}")

    return GridSearchResult(
        cells=cells, best_eps=best.eps, best_L=best.L,
        best_ess=best.ess_mean, converged=converged,
    )


# ── Report ────────────────────────────────────────────────────

@dataclass
class ExperimentReport:
    """시드별 ChainResult + 집계. 집계 값은 항상 시드 기록에서 재계산됩니다."""
    config: ExperimentConfig
    target_name: str
    chains: list[ChainResult]
    eps: float
    L: float
    tuning: TuningReport | None = None
    grid: GridSearchResult | None = None
    wall_time: float = 0.0
    metadata: dict[str, Any] = field(default_factory=dict)

    @property
    def ess_per_seed(self) -> list[float]:
        return [r.report.ess for r in self.chains]

    @property
    def ess_mean(self) -> float:
        return _ess_stats(self.ess_per_seed)[0]

    @property
    def ess_std(self) -> float:
        return _ess_stats(self.ess_per_seed)[1]

    @property
    def tuning_cost(self) -> int:
        return self.tuning.grad_evals if self.tuning is not None else 0

    @property
    def grad_evals_total(self) -> int:
        return self.tuning_cost + sum(r.grad_evals for r in self.chains)

    @property
    def divergences(self) -> int:
        return sum(r.divergences for r in self.chains)


def _require_ground_truth(target: TargetDistribution) -> None:
    if target.truth_second_moments is None and target.entropy_per_dimension is None:
        raise ConfigurationError(
            f"target {target.name!r} has no ground-truth second moments; "
            f"build one with the 'reference' command and pass --reference"
        )


def resolve_hyperparameters(
    config: ExperimentConfig,
    target: TargetDistribution,
    *,
    loader: ConfigLoader,
    workers: int = 1,
) -> tuple[float, float, TuningReport | None, GridSearchResult | None]:
    """튜닝 모드에 따라 (ε, L) 결정."""
    if config.tune is TuneMode.AUTO:
        eps0 = config.eps or float(loader.get("tuning.eps0", EPS_INITIAL))
        base = config.sampler_config(eps0, config.L or math.sqrt(target.d))
        tuning = auto_tune(
            target, base, RngStream.for_chain(config.seed, 0, TUNING_STREAM),
            eps0=eps0,
            steps_per_round=int(loader.get("tuning.steps_per_round", STEPS_PER_ROUND)),
            rounds=int(loader.get("tuning.rounds", ROUNDS)),
            var_target=config.var_e_target,
            refine_steps=config.refine_steps,
        )
        return tuning.eps, tuning.L, tuning, None

    if config.tune is TuneMode.GRID:
        eps_grid, L_grid = config.eps_grid, config.L_grid
        if not eps_grid or not L_grid:
            default_eps, default_L = default_grid(target.d, loader)
            eps_grid = eps_grid or default_eps
            L_grid = L_grid or default_L
        grid = grid_search(config, eps_grid, L_grid, target=target, workers=workers)
        return grid.best_eps, grid.best_L, None, grid

    L = config.L if config.L is not None else math.sqrt(target.d)
    return float(config.eps), L, None, None


def run_experiment(
    config: ExperimentConfig,
    *,
    events: RunEventLogger | None = None,
    loader: ConfigLoader | None = None,
) -> ExperimentReport:
    """튜닝 → 시드별 체인 → 집계.

    Raises:
        ConfigurationError: 잘못된 타겟/알고리즘, 정답 모멘트 없음
    """
    started = time.perf_counter()
    loader = loader or ConfigLoader()
    if events is None:
        events = RunEventLogger(config.out, enabled=bool(loader.get("logging.structured_events", True)))

    alg = config.algorithm.value
    try:
        target = build_target(config.target)
        _require_ground_truth(target)
    except SamplerError as e:
        events.error("target", str(e), error_type=type(e).__name__)
        raise
    workers = resolve_workers(config, config.seeds, loader)

    try:
        eps, L, tuning, grid = resolve_hyperparameters(config, target, loader=loader, workers=workers)
    except SamplerError as e:
        events.error("tuning", str(e), error_type=type(e).__name__, tune=config.tune.value)
        raise
    tuning_cost = tuning.grad_evals if tuning is not None else 0
    if config.tune is not TuneMode.NONE:
        events.tuning(
            config.tune.value, eps, L, tuning_cost,
            converged=grid.converged if grid is not None else True,
        )
        record_tuning(target.name, alg, tuning_cost)

    sampler = config.sampler_config(eps, L)
    logger.info(
        f"🔁 {alg}/{config.integrator.value} on {target.name} (d={target.d}): "
        f"ε={eps:.4g}, L={L:.4g}, {config.seeds} seeds × {config.steps} steps"
    )
    try:
        results = run_seeds(
            target, sampler, config.seeds, config.seed,
            tuning_cost=tuning_cost, chains=config.chains, workers=workers,
        )
    except SamplerError as e:
        events.error("chains", str(e), error_type=type(e).__name__, eps=eps, L=L)
        raise

    for k, result in enumerate(results):
        record_chain(target.name, alg, result)
        events.chain(k, result.report.ess, result.grad_evals, result.divergences,
                     weight_cv=result.report.weight_cv)
        final = result.report.checkpoints[-1]
        events.checkpoint(k, len(result.report.checkpoints), final.b2)
        if result.report.divergence_flagged:
            events.divergence(k, result.divergences, result.n_steps)

    report = ExperimentReport(
        config=config,
        target_name=target.name,
        chains=results,
        eps=eps,
        L=L,
        tuning=tuning,
        grid=grid,
        wall_time=time.perf_counter() - started,
    )
    events.metric("ess_mean", report.ess_mean)
    events.metric("wall_time", report.wall_time, unit="s")
    logger.info(
        f"✅ {target.name}: ESS = {report.ess_mean:.4g} ± {report.ess_std:.2g} "
        f"({report.grad_evals_total} grads, {report.wall_time:.1f}s)"
    )
    return report
