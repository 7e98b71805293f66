"""
Errors — 샘플러 예외 계층
=========================
라이브러리 전체에서 사용하는 예외 타입을 정의합니다.
CLI는 예외 종류에 따라 종료 코드를 결정합니다.
"""

from __future__ import annotations

from typing import Any


class SamplerError(Exception):
    """모든 샘플러 예외의 기반 클래스."""


class ConfigurationError(SamplerError, ValueError):
    """잘못된 실험/샘플러 설정."""


class TargetDefinitionError(ConfigurationError):
    """타겟 분포 생성 파라미터 오류 (κ < 1, 홀수 d 등)."""


class ReturnsFormatError(SamplerError, ValueError):
    """수익률 CSV 파싱 실패."""


class NonFiniteGradientError(SamplerError, FloatingPointError):
    """momentum_update에 유한하지 않은 gradient가 전달됨."""


class DivergenceError(SamplerError):
    """제안된 위치에서 𝓛 또는 ∇𝓛가 유한하지 않음.

    Attributes:
        mask: 발산한 체인 표시 (단일 체인이면 0-차원 bool)
        proposed: 유한한 체인에 대해서는 완결된 제안 상태
    """

    def __init__(self, mask: Any, proposed: Any = None) -> None:
        super().__init__("non-finite target evaluation at proposed position")
        self.mask = mask
        self.proposed = proposed


class ConstantChainError(SamplerError, ValueError):
    """분산 0인 체인 (n_eff 정의 불가)."""


class InsufficientChainError(SamplerError, ValueError):
    """자기상관 추정에 필요한 길이보다 짧은 체인."""


class EmptyCurveError(SamplerError, ValueError):
    """체크포인트가 하나도 없는 수렴 곡선."""


class ReportWriteError(SamplerError, OSError):
    """리포트 파일 쓰기 실패."""
