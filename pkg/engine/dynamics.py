"""
Dynamics — q=0 가변 질량 미소정준 동역학 (재척도 시간)
=====================================================
위치/운동량 갱신 맵, leapfrog 및 Minimal Norm 적분기,
ECW 가중치, 에너지 편차 모니터링을 제공합니다.

모든 커널은 (..., d) 형태의 배치 상태를 지원합니다.
단일 체인은 x.shape == (d,), 앙상블은 (n_chains, d).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Callable, Protocol

import numpy as np

from core.errors import DivergenceError, NonFiniteGradientError
from core.state import Integrator

logger = logging.getLogger(__name__)

# ── Constants ──────────────────────────────────────────────────
MINIMAL_NORM_LAMBDA = 0.19318
_LOG_2 = np.log(2.0)


class GradientSource(Protocol):
    def value_and_grad(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]: ...


# ── State ─────────────────────────────────────────────────────

@dataclass(frozen=True)
class SamplerState:
    """q=0 동역학 상태.

    u는 단위 벡터(Π/|Π|), log_r은 누적된 log(|Π|/|Π₀|).
    L_x, g_x는 항상 현재 x에 대응합니다.
    """
    x: np.ndarray
    u: np.ndarray
    log_r: np.ndarray
    L_x: np.ndarray
    g_x: np.ndarray

    @property
    def d(self) -> int:
        return self.x.shape[-1]


class GradientCounter:
    """value_and_grad 호출 횟수를 세는 래퍼.

    배치 호출 한 번은 체인당 gradient 평가 1회로 집계합니다.
    """

    def __init__(self, target: GradientSource) -> None:
        self.target = target
        self.evaluations = 0

    def value_and_grad(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        self.evaluations += 1
        with np.errstate(over="ignore", invalid="ignore", divide="ignore", under="ignore"):
            return self.target.value_and_grad(x)


def initial_state(x: np.ndarray, u: np.ndarray, target: GradientSource) -> SamplerState:
    """x, u에서 캐시를 채운 초기 상태 (log_r = 0)."""
    x = np.asarray(x, dtype=float)
    L, g = target.value_and_grad(x)
    if not (np.all(np.isfinite(L)) and np.all(np.isfinite(g))):
        raise DivergenceError(mask=~np.isfinite(L), proposed=None)
    return SamplerState(
        x=x,
        u=np.asarray(u, dtype=float),
        log_r=np.zeros(x.shape[:-1]),
        L_x=np.asarray(L, dtype=float),
        g_x=np.asarray(g, dtype=float),
    )


# ── Update maps ───────────────────────────────────────────────

def position_update(state: SamplerState, eps: float) -> SamplerState:
    """x ← x + εu. 캐시 갱신은 호출자 책임."""
    return replace(state, x=state.x + eps * state.u)


def momentum_update(state: SamplerState, eps: float, grad: np.ndarray) -> SamplerState:
    """상수 gradient에 대한 운동량 방향의 정확한 갱신.

    δ = ε|g|/d, e = −g/|g| 일 때
    u ← (u + (sinh δ + e·u(cosh δ − 1))e) / (cosh δ + e·u sinh δ),
    log_r ← log_r + log(cosh δ + e·u sinh δ).
    e^{−δ} 형태로 계산하여 큰 δ에서도 overflow가 없습니다.

    Raises:
        NonFiniteGradientError: grad에 유한하지 않은 성분
    """
    grad = np.asarray(grad, dtype=float)
    if not np.all(np.isfinite(grad)):
        raise NonFiniteGradientError("momentum_update received a non-finite gradient")

    d = grad.shape[-1]
    g_norm = np.linalg.norm(grad, axis=-1, keepdims=True)
    moving = g_norm > 0.0
    e = -grad / np.where(moving, g_norm, 1.0)
    ue = np.clip(np.sum(state.u * e, axis=-1, keepdims=True), -1.0, 1.0)
    delta = eps * g_norm / d
    zeta = np.exp(-delta)

    unnormalized = e * (1.0 - zeta) * (1.0 + zeta + ue * (1.0 - zeta)) + 2.0 * zeta * state.u
    norm = np.linalg.norm(unnormalized, axis=-1, keepdims=True)
    # u = −e 는 고정점 (ζ² underflow 시 0 벡터)
    u_new = np.where(norm > 0.0, unnormalized / np.where(norm > 0.0, norm, 1.0), state.u)
    with np.errstate(divide="ignore"):
        mix = np.logaddexp(np.log1p(ue), np.log1p(-ue) - 2.0 * delta)
    delta_r = delta - _LOG_2 + mix

    u_new = np.where(moving, u_new, state.u)
    delta_r = np.where(moving, delta_r, 0.0)[..., 0]
    return replace(state, u=u_new, log_r=state.log_r + delta_r)


# ── Integrators ───────────────────────────────────────────────

def _evaluate(state: SamplerState, target: GradientSource) -> tuple[SamplerState, np.ndarray]:
    """새 위치에서 𝓛, ∇𝓛 평가. 유한하지 않은 체인의 gradient는 0으로 대체."""
    L, g = target.value_and_grad(state.x)
    L = np.asarray(L, dtype=float)
    g = np.asarray(g, dtype=float)
    finite = np.isfinite(L) & np.all(np.isfinite(g), axis=-1)
    g = np.where(finite[..., None], g, 0.0)
    return replace(state, L_x=L, g_x=g), finite


def _finish(state: SamplerState, finite: np.ndarray) -> SamplerState:
    finite = finite & np.isfinite(state.log_r) & np.all(np.isfinite(state.u), axis=-1)
    if not np.all(finite):
        raise DivergenceError(mask=~finite, proposed=state)
    return state


def leapfrog_step(state: SamplerState, eps: float, target: GradientSource) -> SamplerState:
    """Φ^V(ε/2) ∘ Φ^T(ε) ∘ Φ^V(ε/2). 새 gradient 1회.

    Raises:
        DivergenceError: 제안 위치에서 타겟 평가가 유한하지 않음
    """
    state = momentum_update(state, 0.5 * eps, state.g_x)
    state = position_update(state, eps)
    state, finite = _evaluate(state, target)
    state = momentum_update(state, 0.5 * eps, state.g_x)
    return _finish(state, finite)


def minimal_norm_step(state: SamplerState, eps: float, target: GradientSource) -> SamplerState:
    """V(λε) T(ε/2) V((1−2λ)ε) T(ε/2) V(λε), λ = 0.19318. 새 gradient 2회."""
    lam = MINIMAL_NORM_LAMBDA
    state = momentum_update(state, lam * eps, state.g_x)
    state = position_update(state, 0.5 * eps)
    state, finite_mid = _evaluate(state, target)
    state = momentum_update(state, (1.0 - 2.0 * lam) * eps, state.g_x)
    state = position_update(state, 0.5 * eps)
    state, finite_end = _evaluate(state, target)
    state = momentum_update(state, lam * eps, state.g_x)
    return _finish(state, finite_mid & finite_end)


INTEGRATORS: dict[Integrator, Callable[[SamplerState, float, GradientSource], SamplerState]] = {
    Integrator.LEAPFROG: leapfrog_step,
    Integrator.MINIMAL_NORM: minimal_norm_step,
}


# ── Energy & weights ──────────────────────────────────────────

def energy_deviation(state: SamplerState, L0: np.ndarray | float) -> np.ndarray:
    """ΔE = d·log_r + (𝓛(x) − 𝓛₀)."""
    return state.d * state.log_r + (state.L_x - L0)


def sample_weight(L_x: np.ndarray | float, L_ref: np.ndarray | float, d: int) -> np.ndarray:
    """ECW 가중치 exp(−(𝓛 − 𝓛_ref)/d). 비율로만 쓰이므로 기준점은 상쇄됩니다."""
    return np.exp(-(np.asarray(L_x) - L_ref) / d)
