"""
Rosenbrock — 독립된 2차원 바나나 d/2개
======================================
p(x, y) = ∏ N(x_i | 1, 1) · N(y_i | x_i², √Q)

좌표 배치: 앞쪽 d/2개가 x, 뒤쪽 d/2개가 y.
"""

from __future__ import annotations

import numpy as np

from core.errors import TargetDefinitionError
from targets.base import TargetDistribution


class Rosenbrock(TargetDistribution):
    name = "rosenbrock"

    def __init__(self, d: int, Q: float = 0.1) -> None:
        if d < 2 or d % 2:
            raise TargetDefinitionError(f"Rosenbrock needs even d >= 2, got {d}")
        if not Q > 0:
            raise TargetDefinitionError(f"Q must be > 0, got {Q}")
        self.Q = float(Q)
        self.half = d // 2
        # E[x²] = 1 + 1, E[y²] = E[x⁴] + Q = 10 + Q
        truth = np.concatenate([np.full(self.half, 2.0), np.full(self.half, 10.0 + Q)])
        super().__init__(d, truth_second_moments=truth)
        self._const = 0.5 * self.half * (2.0 * np.log(2.0 * np.pi) + np.log(Q))

    def _split(self, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return z[..., : self.half], z[..., self.half:]

    def neg_log_density(self, z: np.ndarray) -> np.ndarray:
        x, y = self._split(z)
        return (
            0.5 * np.sum(np.square(x - 1.0), axis=-1)
            + np.sum(np.square(y - x ** 2), axis=-1) / (2.0 * self.Q)
            + self._const
        )

    def grad(self, z: np.ndarray) -> np.ndarray:
        x, y = self._split(z)
        residual = (y - x ** 2) / self.Q
        return np.concatenate([(x - 1.0) - 2.0 * x * residual, residual], axis=-1)

    def exact_sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        x = 1.0 + rng.standard_normal((n, self.half))
        y = x ** 2 + np.sqrt(self.Q) * rng.standard_normal((n, self.half))
        return np.concatenate([x, y], axis=-1)


def make_rosenbrock(d: int = 36, Q: float = 0.1) -> Rosenbrock:
    return Rosenbrock(d, Q)
