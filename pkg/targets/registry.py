"""
Target registry — 식별자 → 타겟 팩토리
"""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from core.errors import ConfigurationError
from targets.base import TargetDistribution
from targets.cauchy import make_cauchy
from targets.funnel import make_funnel
from targets.gaussian import (
    make_ill_conditioned_gaussian,
    make_linear_variance_gaussian,
    make_standard_gaussian,
)
from targets.mixture import make_bimodal_mixture
from targets.returns import load_returns_csv
from targets.rosenbrock import make_rosenbrock
from targets.volatility import make_stochastic_volatility

logger = logging.getLogger(__name__)

# 타겟별 기본 차원
DEFAULT_DIMENSIONS: dict[str, int] = {
    "gaussian": 100,
    "icg": 100,
    "bimodal": 50,
    "rosenbrock": 36,
    "funnel": 20,
    "cauchy": 1000,
}

TARGET_NAMES = (*DEFAULT_DIMENSIONS, "sv")


class TargetSpec(BaseModel):
    """타겟 이름 + 파라미터."""

    model_config = ConfigDict(frozen=True)

    name: str
    d: int | None = Field(default=None, ge=1)
    kappa: float = 100.0
    Q: float = 0.1
    spacing: Literal["log", "linear"] = "log"
    seed: int = 0
    returns_csv: Path | None = None
    reference: Path | None = None


def build_target(spec: TargetSpec) -> TargetDistribution:
    """TargetSpec으로부터 타겟 생성.

    Raises:
        ConfigurationError: 알 수 없는 이름, sv에 CSV 누락
    """
    name = spec.name.lower()
    if name not in TARGET_NAMES:
        raise ConfigurationError(
            f"unknown target {spec.name!r}; choose from {', '.join(TARGET_NAMES)}"
        )
    d = spec.d or DEFAULT_DIMENSIONS.get(name, 0)

    if name == "gaussian":
        target = make_standard_gaussian(d)
    elif name == "icg":
        if spec.spacing == "linear":
            target = make_linear_variance_gaussian(d, seed=spec.seed)
        else:
            target = make_ill_conditioned_gaussian(d, spec.kappa, spec.seed)
    elif name == "bimodal":
        target = make_bimodal_mixture(d)
    elif name == "rosenbrock":
        target = make_rosenbrock(d, spec.Q)
    elif name == "funnel":
        target = make_funnel(d)
    elif name == "cauchy":
        target = make_cauchy(d)
    else:
        if spec.returns_csv is None:
            raise ConfigurationError("target 'sv' requires --returns-csv")
        target = make_stochastic_volatility(load_returns_csv(spec.returns_csv))

    if spec.reference is not None:
        target = target.with_truth(np.load(spec.reference))

    logger.info(f"🎯 Target ready: {target}")
    return target
