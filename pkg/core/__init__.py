"""
Core Infrastructure Layer
=========================
설정/리포트 모델, 예외 계층, 계층적 설정 로더를 제공합니다.
"""

from core.config_loader import ConfigLoader, load_experiment_file
from core.errors import ConfigurationError, DivergenceError, SamplerError
from core.state import Algorithm, ConvergenceReport, Integrator, SamplerConfig, TuningReport

__all__ = [
    "Algorithm",
    "ConfigLoader",
    "ConfigurationError",
    "ConvergenceReport",
    "DivergenceError",
    "Integrator",
    "SamplerConfig",
    "SamplerError",
    "TuningReport",
    "load_experiment_file",
]
