"""
Reference — 긴 소(小)-ε MCLMC 실행으로 정답 2차 모멘트 생성
==========================================================
해석적 정답이 없는 타겟(SV)에 대해 튜닝된 ε보다 작은 스텝으로
더 길게 돌려 E[x²]를 추정하고 .npy로 저장합니다.
"""

from __future__ import annotations

import logging
import math
from pathlib import Path

import numpy as np

from bench.experiment import TUNING_STREAM, ExperimentConfig
from core.config_loader import ConfigLoader
from core.errors import ReportWriteError
from core.state import Algorithm, SamplerConfig
from engine.autotune import auto_tune
from engine.decoherence import RngStream
from engine.samplers import run_mclmc
from targets.base import TargetDistribution
from targets.registry import build_target

logger = logging.getLogger(__name__)

REFERENCE_STREAM = 2


def build_reference(
    target: TargetDistribution,
    config: SamplerConfig,
    rng: RngStream,
) -> np.ndarray:
    """단일 MCLMC 체인의 ECW 가중 E[x²] (eval 좌표)."""
    run_config = config.model_copy(update={"algorithm": Algorithm.MCLMC})
    result = run_mclmc(target, run_config, rng)
    m2 = np.array(result.accumulator.m2, copy=True)
    if not np.all(np.isfinite(m2)) or np.any(m2 <= 0):
        raise ValueError("reference run produced non-positive or non-finite second moments")
    logger.info(
        f"✅ reference for {target.name}: {result.n_steps} steps at ε={config.eps:.4g}, "
        f"{result.divergences} divergences"
    )
    return m2


def reference_from_config(
    config: ExperimentConfig,
    *,
    loader: ConfigLoader | None = None,
) -> np.ndarray:
    """config로 타겟을 만들고 ε, L을 정한 뒤 긴 참조 실행.

    ε을 직접 주지 않으면 auto-tune 결과에 reference.eps_fraction을 곱하고,
    스텝 수는 config.steps × reference.length_multiplier.
    """
    loader = loader or ConfigLoader()
    target = build_target(config.target)
    fraction = float(loader.get("reference.eps_fraction", 0.25))
    multiplier = int(loader.get("reference.length_multiplier", 10))

    if config.eps is not None:
        eps = config.eps
        L = config.L if config.L is not None else math.sqrt(target.d)
    else:
        base = config.sampler_config(0.5, math.sqrt(target.d)).model_copy(
            update={"algorithm": Algorithm.MCLMC}
        )
        tuning = auto_tune(
            target, base, RngStream.for_chain(config.seed, 0, TUNING_STREAM),
            var_target=config.var_e_target, refine_steps=config.refine_steps,
        )
        eps, L = tuning.eps * fraction, tuning.L

    run_config = config.sampler_config(eps, L).model_copy(update={
        "algorithm": Algorithm.MCLMC,
        "n_steps": config.steps * multiplier,
    })
    return build_reference(target, run_config, RngStream.for_chain(config.seed, 0, REFERENCE_STREAM))


def save_reference(m2: np.ndarray, path: str | Path) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        np.save(path, m2)
    except OSError as e:
        raise ReportWriteError(f"cannot write reference {path}: {e}") from e
    # np.save가 확장자를 붙임
    return path if path.suffix == ".npy" else path.with_name(path.name + ".npy")
