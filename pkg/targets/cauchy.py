"""
Cauchy — 독립 표준 코시 d개
===========================
2차 모멘트가 무한하므로 b₂ 대신 차원별 엔트로피 편향
b_𝓛² = d⁻¹ Σ (E[−log C(x_i)] − log 4π)² 로 수렴을 측정합니다.
"""

from __future__ import annotations

import numpy as np

from targets.base import TargetDistribution

_LOG_PI = np.log(np.pi)


class Cauchy(TargetDistribution):
    name = "cauchy"
    entropy_per_dimension = float(np.log(4.0 * np.pi))

    def __init__(self, d: int) -> None:
        super().__init__(d, truth_second_moments=None)

    def neg_log_density(self, x: np.ndarray) -> np.ndarray:
        return np.sum(np.log1p(np.square(x)), axis=-1) + self.d * _LOG_PI

    def grad(self, x: np.ndarray) -> np.ndarray:
        return 2.0 * x / (1.0 + np.square(x))

    def neg_log_marginal(self, x: np.ndarray) -> np.ndarray:
        return np.log1p(np.square(x)) + _LOG_PI

    def exact_sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.standard_cauchy((n, self.d))


def make_cauchy(d: int = 1000) -> Cauchy:
    return Cauchy(d)
