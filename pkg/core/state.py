"""
SamplerModels — 설정 및 리포트 데이터 모델
==========================================
샘플러 설정, 체크포인트 기록, 수렴 리포트, 튜닝 결과를
Pydantic 모델로 정의합니다. 모든 리포트는 JSON 직렬화가 가능하며
inf/nan 값은 JSON 상수(Infinity/NaN)로 보존됩니다.
"""

from __future__ import annotations

import math
from enum import Enum

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from core.errors import ConfigurationError


# ── Enums ─────────────────────────────────────────────────────

class Algorithm(str, Enum):
    """샘플러 종류."""
    MCHMC = "mchmc"   # 전체 bounce (K 스텝마다)
    MCLMC = "mclmc"   # 매 스텝 부분 방향 갱신
    Q2 = "q2"         # q=2 해밀토니안 + bounce
    UHMC = "uhmc"     # 비보정 HMC 기준선


class Integrator(str, Enum):
    """적분기 종류."""
    LEAPFROG = "leapfrog"
    MINIMAL_NORM = "minimal_norm"


INTEGRATOR_ALIASES: dict[str, Integrator] = {
    "lf": Integrator.LEAPFROG,
    "leapfrog": Integrator.LEAPFROG,
    "mn": Integrator.MINIMAL_NORM,
    "minimal_norm": Integrator.MINIMAL_NORM,
}


class TuneMode(str, Enum):
    """하이퍼파라미터 결정 방식."""
    AUTO = "auto"
    GRID = "grid"
    NONE = "none"


class InitPolicy(str, Enum):
    """초기 위치 정책."""
    PRIOR = "prior"     # 타겟이 선언한 prior draw
    NORMAL = "normal"   # N(0, init_scale²)


_JSON_CONFIG = ConfigDict(ser_json_inf_nan="constants")


# ── Sampler Config ────────────────────────────────────────────

class SamplerConfig(BaseModel):
    """단일 체인 실행 설정."""

    model_config = ConfigDict(frozen=True, ser_json_inf_nan="constants")

    algorithm: Algorithm = Algorithm.MCLMC
    integrator: Integrator = Integrator.LEAPFROG
    eps: float = Field(gt=0)
    L: float = Field(default=math.inf, gt=0)
    n_steps: int = Field(ge=1)
    seed: int = 0

    # ── 체크포인트 ──
    checkpoint_start: float = Field(default=100.0, gt=0)
    checkpoint_ratio: float = Field(default=1.1, gt=1)

    # ── 초기화 ──
    init: InitPolicy = InitPolicy.PRIOR
    init_scale: float = Field(default=1.0, gt=0)

    divergence_flag_fraction: float = Field(default=0.1, ge=0, le=1)
    record_energy: bool = False

    @field_validator("integrator", mode="before")
    @classmethod
    def _resolve_alias(cls, value: object) -> object:
        if isinstance(value, str) and value.lower() in INTEGRATOR_ALIASES:
            return INTEGRATOR_ALIASES[value.lower()]
        return value

    @model_validator(mode="after")
    def _check_bounce_interval(self) -> SamplerConfig:
        if self.algorithm is not Algorithm.MCLMC and math.isfinite(self.L):
            if round(self.L / self.eps) < 1:
                raise ConfigurationError(
                    f"bounce interval K = round(L/eps) = "
                    f"{round(self.L / self.eps)} must be >= 1 "
                    f"(L={self.L}, eps={self.eps})"
                )
        return self

    @property
    def bounce_interval(self) -> int | None:
        """K = round(L/ε). L=∞이면 None (bounce 없음)."""
        if not math.isfinite(self.L):
            return None
        return max(1, round(self.L / self.eps))

    def with_hyperparameters(self, eps: float, L: float) -> SamplerConfig:
        """ε, L만 교체한 새 설정."""
        return self.model_copy(update={"eps": float(eps), "L": float(L)})


# ── Reports ───────────────────────────────────────────────────

class BiasSummary(BaseModel):
    """2차 모멘트 상대 오차 요약 (b₂² = b₁² + σ²)."""
    model_config = _JSON_CONFIG

    b1: float
    sigma: float = Field(ge=0)
    b2: float = Field(ge=0)


class Checkpoint(BaseModel):
    """수렴 곡선의 한 점."""
    model_config = _JSON_CONFIG

    step: int
    grad_evals: int
    b1: float = math.nan
    sigma: float = math.nan
    b2: float = math.nan
    var_e_per_d: float = math.nan
    divergences: int = 0
    entropy_bias: float | None = None   # Cauchy 전용 b_𝓛²


class EnergySummary(BaseModel):
    """에너지 편차 궤적 요약."""
    model_config = _JSON_CONFIG

    n: int = 0
    mean: float = 0.0
    var: float = 0.0
    var_per_d: float = 0.0
    max_abs: float = 0.0


class ConvergenceReport(BaseModel):
    """체크포인트별 수렴 기록 + 최종 ESS."""
    model_config = _JSON_CONFIG

    checkpoints: list[Checkpoint] = Field(default_factory=list)
    ess: float = 0.0
    eps: float
    L: float
    tuning_cost: int = 0
    divergences: int = 0
    divergence_flagged: bool = False
    weight_cv: float = 0.0   # ECW 가중치 변동계수

    @property
    def converged(self) -> bool:
        return self.ess > 0


class TuningReport(BaseModel):
    """자동 튜닝 결과 (불변, 체인 간 공유)."""
    model_config = ConfigDict(frozen=True, ser_json_inf_nan="constants")

    eps: float = Field(gt=0)
    L: float = Field(gt=0)
    sigma_eff: float = Field(ge=0)
    var_e_per_d: float
    grad_evals: int = Field(ge=0)
    neff_per_dim: list[float] = Field(default_factory=list)
    L_initial: float = Field(gt=0)
    refine_steps: int = 0
    refine_sufficient: bool = True
    refine_failed: bool = False
