"""
Decoherence — 에너지 보존 운동량 무작위화
=========================================
- full_bounce: 등방 단위 벡터로 방향 전체 재추출 (MCHMC)
- partial_refresh: u ← (u + νz)/|u + νz| 부분 갱신 (MCLMC)

두 연산 모두 x와 log_r을 건드리지 않으므로 에너지가 정확히 보존됩니다.
"""

from __future__ import annotations

import math
from dataclasses import replace

import numpy as np

from engine.dynamics import SamplerState


class RngStream:
    """(seed, chain, purpose)로 결정되는 난수 스트림 (PCG64 + SeedSequence).

    같은 시드는 같은 수열을 만들고, 각 체인은 자기 스트림을 단독 소유합니다.
    """

    def __init__(self, seed: int | np.random.SeedSequence | None = 0) -> None:
        if isinstance(seed, np.random.SeedSequence):
            self._seq = seed
        else:
            self._seq = np.random.SeedSequence(seed)
        self.generator = np.random.Generator(np.random.PCG64(self._seq))

    @classmethod
    def for_chain(cls, base_seed: int, index: int, purpose: int = 0) -> RngStream:
        """(base_seed, index, purpose)로 결정되는 체인 전용 스트림."""
        return cls(np.random.SeedSequence([base_seed, index, purpose]))

    def normal(self, shape: tuple[int, ...]) -> np.ndarray:
        return self.generator.standard_normal(shape)

    def unit_vector(self, shape: tuple[int, ...]) -> np.ndarray:
        """마지막 축 방향의 등방 단위 벡터."""
        while True:
            z = self.generator.standard_normal(shape)
            norm = np.linalg.norm(z, axis=-1, keepdims=True)
            if np.all(norm > 0):
                return z / norm


def full_bounce(state: SamplerState, rng: RngStream) -> SamplerState:
    return replace(state, u=rng.unit_vector(state.u.shape))


def nu_coefficient(eps: float, L: float, d: int) -> float:
    """ν = sqrt((e^{2ε/L} − 1)/d). L = ∞ 이면 0."""
    if math.isinf(L):
        return 0.0
    return math.sqrt(math.expm1(2.0 * eps / L) / d)


def partial_refresh(state: SamplerState, eps: float, L: float, rng: RngStream) -> SamplerState:
    """부분 방향 갱신. ⟨u_n·u₀⟩ = e^{−nε/L}로 상관이 감쇠합니다.

    u + νz = 0 (확률 0) 인 체인은 full bounce로 대체합니다.
    """
    nu = nu_coefficient(eps, L, state.d)
    if nu == 0.0:
        return state
    v = state.u + nu * rng.normal(state.u.shape)
    norm = np.linalg.norm(v, axis=-1, keepdims=True)
    degenerate = norm == 0.0
    if np.any(degenerate):
        fallback = rng.unit_vector(state.u.shape)
        v = np.where(degenerate, fallback, v)
        norm = np.where(degenerate, 1.0, norm)
    return replace(state, u=v / norm)
