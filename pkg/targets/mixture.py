"""
BimodalMixture — 0.8·N(0, I) + 0.2·N(8e₁, I)
"""

from __future__ import annotations

import numpy as np
from scipy.special import logsumexp

from targets.base import TargetDistribution

_LOG_2PI = np.log(2.0 * np.pi)


class BimodalMixture(TargetDistribution):
    """두 표준 가우시안의 혼합. 두 번째 모드는 첫 축 방향으로 분리."""

    name = "bimodal"

    def __init__(self, d: int, weight: float = 0.2, separation: float = 8.0) -> None:
        self.weight = float(weight)
        self.separation = float(separation)
        self.mu = np.zeros(d)
        self.mu[0] = separation
        truth = np.ones(d)
        truth[0] = 1.0 + weight * separation ** 2
        super().__init__(d, truth_second_moments=truth)
        self._log_weights = np.log([1.0 - weight, weight])

    @property
    def first_moments(self) -> np.ndarray:
        return self.weight * self.mu

    def _component_logits(self, x: np.ndarray) -> np.ndarray:
        # 형태 (..., 2)
        near = -0.5 * np.sum(np.square(x), axis=-1)
        far = -0.5 * np.sum(np.square(x - self.mu), axis=-1)
        return np.stack([near, far], axis=-1) + self._log_weights

    def neg_log_density(self, x: np.ndarray) -> np.ndarray:
        return 0.5 * self.d * _LOG_2PI - logsumexp(self._component_logits(x), axis=-1)

    def grad(self, x: np.ndarray) -> np.ndarray:
        return self.value_and_grad(x)[1]

    def value_and_grad(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        logits = self._component_logits(x)
        norm = logsumexp(logits, axis=-1)
        far = np.exp(logits[..., 1] - norm)
        return 0.5 * self.d * _LOG_2PI - norm, x - far[..., None] * self.mu

    def exact_sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        which = rng.random(n) < self.weight
        return rng.standard_normal((n, self.d)) + which[:, None] * self.mu


def make_bimodal_mixture(d: int) -> BimodalMixture:
    return BimodalMixture(d)
