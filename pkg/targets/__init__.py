"""
Targets
=======
벤치마크 타겟 분포 모음:
- gaussian / icg: 표준 및 나쁜 조건수 가우시안
- bimodal: 두 모드 혼합
- rosenbrock / funnel: 곡률이 변하는 분포
- cauchy: 두꺼운 꼬리
- sv: 확률 변동성 사후분포 (수익률 CSV 필요)
"""

from targets.base import TargetDistribution
from targets.cauchy import make_cauchy
from targets.funnel import make_funnel
from targets.gaussian import (
    make_ill_conditioned_gaussian,
    make_linear_variance_gaussian,
    make_standard_gaussian,
)
from targets.mixture import make_bimodal_mixture
from targets.registry import TargetSpec, build_target
from targets.returns import ReturnsSeries, load_returns_csv, simulate_returns
from targets.rosenbrock import make_rosenbrock
from targets.volatility import make_stochastic_volatility

__all__ = [
    "TargetDistribution",
    "TargetSpec",
    "ReturnsSeries",
    "build_target",
    "load_returns_csv",
    "simulate_returns",
    "make_standard_gaussian",
    "make_ill_conditioned_gaussian",
    "make_linear_variance_gaussian",
    "make_bimodal_mixture",
    "make_rosenbrock",
    "make_funnel",
    "make_cauchy",
    "make_stochastic_volatility",
]
