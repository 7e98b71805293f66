"""
Funnel — θ ~ N(0, 3), z_i ~ N(0, e^{θ/2})
=========================================
좌표 배치: x[0] = θ, x[1:] = z.
평가 좌표는 가우시안화된 (θ/3, z_i·e^{−θ/2}) 이며, 그 좌표에서
모든 2차 모멘트가 1 입니다.
"""

from __future__ import annotations

import numpy as np

from core.errors import TargetDefinitionError
from targets.base import TargetDistribution

THETA_SCALE = 3.0


class Funnel(TargetDistribution):
    name = "funnel"

    def __init__(self, d: int) -> None:
        if d < 2:
            raise TargetDefinitionError(f"funnel needs d >= 2, got {d}")
        super().__init__(d, truth_second_moments=np.ones(d))
        self._const = 0.5 * d * np.log(2.0 * np.pi) + np.log(THETA_SCALE)

    @property
    def raw_second_moments(self) -> np.ndarray:
        # E[z²] = E[e^θ] = e^{9/2}
        raw = np.full(self.d, np.exp(0.5 * THETA_SCALE ** 2))
        raw[0] = THETA_SCALE ** 2
        return raw

    def neg_log_density(self, x: np.ndarray) -> np.ndarray:
        theta, z = x[..., 0], x[..., 1:]
        return (
            0.5 * np.square(theta / THETA_SCALE)
            + 0.5 * np.exp(-theta) * np.sum(np.square(z), axis=-1)
            + 0.5 * (self.d - 1) * theta
            + self._const
        )

    def grad(self, x: np.ndarray) -> np.ndarray:
        theta, z = x[..., 0], x[..., 1:]
        inv_var = np.exp(-theta)
        d_theta = (
            theta / THETA_SCALE ** 2
            - 0.5 * inv_var * np.sum(np.square(z), axis=-1)
            + 0.5 * (self.d - 1)
        )
        return np.concatenate([d_theta[..., None], z * inv_var[..., None]], axis=-1)

    def eval_transform(self, x: np.ndarray) -> np.ndarray:
        theta = x[..., :1]
        return np.concatenate([theta / THETA_SCALE, x[..., 1:] * np.exp(-0.5 * theta)], axis=-1)

    def exact_sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        theta = THETA_SCALE * rng.standard_normal((n, 1))
        z = np.exp(0.5 * theta) * rng.standard_normal((n, self.d - 1))
        return np.concatenate([theta, z], axis=-1)


def make_funnel(d: int = 20) -> Funnel:
    return Funnel(d)
