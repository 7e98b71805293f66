"""
Engine Layer
============
샘플링 엔진: q=0 동역학, 결맞음 제어, 샘플러, 자동 튜닝, 추정기를 제공합니다.
"""

from engine.autotune import auto_tune, step_size_update
from engine.decoherence import RngStream, full_bounce, nu_coefficient, partial_refresh
from engine.dynamics import SamplerState, leapfrog_step, minimal_norm_step
from engine.estimators import (
    EnergyTrace,
    MomentAccumulator,
    autocorr_neff,
    ess_from_curve,
    second_moment_bias,
)
from engine.samplers import (
    ChainResult,
    run_chain,
    run_ensemble,
    run_mchmc,
    run_mclmc,
    run_q2,
    run_uhmc,
)

__all__ = [
    "ChainResult",
    "EnergyTrace",
    "MomentAccumulator",
    "RngStream",
    "SamplerState",
    "auto_tune",
    "autocorr_neff",
    "ess_from_curve",
    "full_bounce",
    "leapfrog_step",
    "minimal_norm_step",
    "nu_coefficient",
    "partial_refresh",
    "run_chain",
    "run_ensemble",
    "run_mchmc",
    "run_mclmc",
    "run_q2",
    "run_uhmc",
    "second_moment_bias",
    "step_size_update",
]
