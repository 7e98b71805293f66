"""
TargetDistribution — 타겟 분포 인터페이스
========================================
p(x) = e^{−𝓛(x)}/Z 형태의 타겟을 정의합니다.

모든 메서드는 (..., d) 형태의 배치 입력을 받습니다.
타겟 객체는 생성 후 불변이며, 여러 체인/프로세스에서 동시에
호출해도 안전합니다 (pickle 가능).
"""

from __future__ import annotations

import copy
import logging
from abc import ABC, abstractmethod

import numpy as np

from core.errors import TargetDefinitionError

logger = logging.getLogger(__name__)


class TargetDistribution(ABC):
    """음의 로그 밀도 𝓛와 해석적 gradient를 제공하는 타겟.

    Attributes:
        name: 식별자 (레지스트리 키와 동일)
        d: 차원
        truth_second_moments: 평가 좌표계의 E[x_i²] (없으면 None)
    """

    name: str = "target"
    entropy_per_dimension: float | None = None

    def __init__(self, d: int, truth_second_moments: np.ndarray | None = None) -> None:
        if d < 1:
            raise TargetDefinitionError(f"dimension must be >= 1, got {d}")
        self.d = int(d)
        self._truth = (
            None if truth_second_moments is None
            else np.asarray(truth_second_moments, dtype=float)
        )

    # ── 필수 구현 ─────────────────────────────────────────────

    @abstractmethod
    def neg_log_density(self, x: np.ndarray) -> np.ndarray:
        """𝓛(x), 형태 (...)."""

    @abstractmethod
    def grad(self, x: np.ndarray) -> np.ndarray:
        """∇𝓛(x), 형태 (..., d)."""

    # ── 선택 구현 ─────────────────────────────────────────────

    def value_and_grad(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return self.neg_log_density(x), self.grad(x)

    def eval_transform(self, x: np.ndarray) -> np.ndarray:
        """b₂를 계산하는 좌표계로의 변환 (기본: 항등)."""
        return x

    def prior_draw(self, rng: np.random.Generator, shape: tuple[int, ...] = ()) -> np.ndarray:
        """초기 위치 draw. 기본은 표준 정규 prior."""
        return rng.standard_normal((*shape, self.d))

    def exact_sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """생성 과정에서의 정확한 샘플 (가능한 타겟만)."""
        raise NotImplementedError(f"{self.name} has no exact sampler")

    def neg_log_marginal(self, x: np.ndarray) -> np.ndarray:
        """차원별 −log p_i(x_i) (엔트로피 편향 측정용)."""
        raise NotImplementedError(f"{self.name} has no factorized marginal")

    @property
    def truth_second_moments(self) -> np.ndarray | None:
        return self._truth

    @property
    def raw_second_moments(self) -> np.ndarray | None:
        """원래 좌표계의 E[x_i²]. 변환이 없는 타겟은 truth와 동일."""
        return self._truth

    def with_truth(self, second_moments: np.ndarray) -> TargetDistribution:
        """외부 기준값(예: 긴 참조 실행)을 붙인 사본."""
        moments = np.asarray(second_moments, dtype=float)
        if moments.shape != (self.d,):
            raise TargetDefinitionError(
                f"reference moments shape {moments.shape} != ({self.d},)"
            )
        clone = copy.copy(self)
        clone._truth = moments
        logger.info(f"📎 {self.name}: attached reference second moments")
        return clone

    # ── 검증 ──────────────────────────────────────────────────

    def check_gradient(self, x: np.ndarray, h: float = 1e-5) -> float:
        """중앙 차분 대비 해석적 gradient의 상대 오차.

        Args:
            x: 단일 점, 형태 (d,)
            h: 차분 간격

        Returns:
            |g_fd − g| / |g| (|g| = 0 이면 분모는 float 최소 양수)
        """
        x = np.asarray(x, dtype=float)
        steps = h * np.eye(self.d)
        forward = self.neg_log_density(x + steps)
        backward = self.neg_log_density(x - steps)
        g_fd = (forward - backward) / (2.0 * h)
        g = self.grad(x)
        return float(np.linalg.norm(g_fd - g) / max(np.linalg.norm(g), np.finfo(float).tiny))

    def __repr__(self) -> str:
        return f"{type(self).__name__}(name={self.name!r}, d={self.d})"
