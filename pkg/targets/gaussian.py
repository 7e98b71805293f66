"""
Gaussian targets — 표준 정규 / 나쁜 조건수 가우시안
==================================================
- StandardGaussian: 𝓛 = |x|²/2
- IllConditionedGaussian: Σ = R diag(λ) Rᵀ, 고유값 로그/선형 간격
"""

from __future__ import annotations

import logging

import numpy as np

from core.errors import TargetDefinitionError
from targets.base import TargetDistribution

logger = logging.getLogger(__name__)


class StandardGaussian(TargetDistribution):
    """N(0, I)."""

    name = "gaussian"

    def __init__(self, d: int) -> None:
        super().__init__(d, truth_second_moments=np.ones(d))

    def neg_log_density(self, x: np.ndarray) -> np.ndarray:
        return 0.5 * np.sum(np.square(x), axis=-1)

    def grad(self, x: np.ndarray) -> np.ndarray:
        return np.array(x, dtype=float, copy=True)

    def exact_sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.standard_normal((n, self.d))


class IllConditionedGaussian(TargetDistribution):
    """회전된 대각 공분산 가우시안.

    평가 좌표계는 고유기저 y = Rᵀx 이며, 그 좌표에서 E[y_i²] = λ_i 입니다.
    """

    name = "icg"

    def __init__(self, eigenvalues: np.ndarray, rotation: np.ndarray) -> None:
        eigenvalues = np.asarray(eigenvalues, dtype=float)
        super().__init__(eigenvalues.size, truth_second_moments=eigenvalues)
        self.eigenvalues = eigenvalues
        self.rotation = np.asarray(rotation, dtype=float)
        self._precision = 1.0 / eigenvalues

    @property
    def covariance(self) -> np.ndarray:
        return (self.rotation * self.eigenvalues) @ self.rotation.T

    @property
    def condition_number(self) -> float:
        return float(self.eigenvalues.max() / self.eigenvalues.min())

    @property
    def raw_second_moments(self) -> np.ndarray:
        return np.diag(self.covariance).copy()

    def eval_transform(self, x: np.ndarray) -> np.ndarray:
        return x @ self.rotation

    def neg_log_density(self, x: np.ndarray) -> np.ndarray:
        y = x @ self.rotation
        return 0.5 * np.sum(np.square(y) * self._precision, axis=-1)

    def grad(self, x: np.ndarray) -> np.ndarray:
        y = x @ self.rotation
        return (y * self._precision) @ self.rotation.T

    def value_and_grad(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        y = x @ self.rotation
        scaled = y * self._precision
        return 0.5 * np.sum(y * scaled, axis=-1), scaled @ self.rotation.T

    def exact_sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        y = rng.standard_normal((n, self.d)) * np.sqrt(self.eigenvalues)
        return y @ self.rotation.T


def random_rotation(d: int, seed: int) -> np.ndarray:
    """독립 표준정규 행렬을 QR로 직교화한 회전 (Haar 분포)."""
    rng = np.random.default_rng(seed)
    q, r = np.linalg.qr(rng.standard_normal((d, d)))
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    return q * signs


def make_standard_gaussian(d: int) -> StandardGaussian:
    return StandardGaussian(d)


def make_ill_conditioned_gaussian(d: int, kappa: float, seed: int = 0) -> IllConditionedGaussian:
    """고유값이 [1/√κ, √κ]에서 로그 등간격 (양 끝점 포함)인 가우시안.

    Args:
        d: 차원
        kappa: 조건수 (≥ 1)
        seed: 회전 행렬 시드 (타겟 식별자의 일부)

    Raises:
        TargetDefinitionError: κ < 1
    """
    if not kappa >= 1.0:
        raise TargetDefinitionError(f"condition number must be >= 1, got {kappa}")
    if d < 1:
        raise TargetDefinitionError(f"dimension must be >= 1, got {d}")
    half = 0.5 * np.log(kappa)
    eigenvalues = np.exp(np.linspace(-half, half, d)) if d > 1 else np.ones(1)
    target = IllConditionedGaussian(eigenvalues, random_rotation(d, seed))
    logger.debug(f"🧮 ICG d={d} κ={kappa} seed={seed}")
    return target


def make_linear_variance_gaussian(
    d: int = 50,
    low: float = 0.01,
    high: float = 1.0,
    seed: int = 0,
) -> IllConditionedGaussian:
    """분산이 [low, high]에서 선형 등간격인 가우시안 (앙상블 비교용 변형)."""
    if not 0 < low <= high:
        raise TargetDefinitionError(f"need 0 < low <= high, got ({low}, {high})")
    eigenvalues = np.linspace(low, high, d) if d > 1 else np.array([high])
    return IllConditionedGaussian(eigenvalues, random_rotation(d, seed))
