"""
Estimators — 가중 모멘트 누적기 · 편향 지표 · ESS
=================================================
- MomentAccumulator: 칼만 필터 형태의 스트리밍 가중 1/2차 모멘트
- second_moment_bias: z_i = (m2_i − truth_i)/truth_i 로부터 (b₁, σ, b₂)
- entropy_bias_cauchy: 차원별 엔트로피 편향 b_𝓛²
- autocorr_neff: FFT 자기상관 + Geyer 초기 양수/단조 수열
- ess_from_curve: b₂ = 0.1 첫 교차점의 200/n
- EnergyTrace: 에너지 편차의 스트리밍(Welford/Chan) 통계
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.fft import irfft, next_fast_len, rfft

from core.errors import (
    ConstantChainError,
    EmptyCurveError,
    InsufficientChainError,
)
from core.state import BiasSummary, EnergySummary

logger = logging.getLogger(__name__)

# ── Constants ──────────────────────────────────────────────────
B2_THRESHOLD = 0.1
ENTROPY_THRESHOLD = 0.0165   # π²/3 / 200
EFFECTIVE_SAMPLES = 200
MIN_CHAIN_LENGTH = 50


# ── Moment Accumulator ────────────────────────────────────────

@dataclass
class MomentAccumulator:
    """가중 1/2차 모멘트의 스트리밍 누적기 (단일 writer).

    W ← W + w,  m ← (W_old/W)·m + (w/W)·f(x),  f ∈ {x, x²}
    """
    d: int
    W: float = 0.0
    m1: np.ndarray = field(default=None)  # type: ignore[assignment]
    m2: np.ndarray = field(default=None)  # type: ignore[assignment]
    count: int = 0

    def __post_init__(self) -> None:
        if self.m1 is None:
            self.m1 = np.zeros(self.d)
        if self.m2 is None:
            self.m2 = np.zeros(self.d)

    def accumulate(self, x: np.ndarray, w: float) -> MomentAccumulator:
        """샘플 하나를 누적 (in-place).

        Raises:
            ValueError: w ≤ 0 또는 유한하지 않은 x
        """
        if not w > 0:
            raise ValueError(f"sample weight must be > 0, got {w}")
        x = np.asarray(x, dtype=float)
        if not np.all(np.isfinite(x)):
            raise ValueError("cannot accumulate a non-finite sample")
        W_new = self.W + w
        keep, take = self.W / W_new, w / W_new
        self.m1 = keep * self.m1 + take * x
        self.m2 = keep * self.m2 + take * np.square(x)
        self.W = W_new
        self.count += 1
        return self

    def accumulate_batch(self, xs: np.ndarray, ws: np.ndarray) -> MomentAccumulator:
        """여러 샘플을 한 번에 누적 (가중 합 → merge)."""
        xs = np.asarray(xs, dtype=float)
        ws = np.asarray(ws, dtype=float)
        if np.any(ws <= 0):
            raise ValueError("sample weights must be > 0")
        total = float(np.sum(ws))
        batch = MomentAccumulator(
            d=self.d,
            W=total,
            m1=ws @ xs / total,
            m2=ws @ np.square(xs) / total,
            count=len(ws),
        )
        merged = self.merge(batch)
        self.W, self.m1, self.m2, self.count = merged.W, merged.m1, merged.m2, merged.count
        return self

    def merge(self, other: MomentAccumulator) -> MomentAccumulator:
        """두 누적기의 합집합과 동일한 새 누적기."""
        if other.d != self.d:
            raise ValueError(f"dimension mismatch: {self.d} vs {other.d}")
        W = self.W + other.W
        if W == 0:
            return MomentAccumulator(d=self.d)
        a, b = self.W / W, other.W / W
        return MomentAccumulator(
            d=self.d,
            W=W,
            m1=a * self.m1 + b * other.m1,
            m2=a * self.m2 + b * other.m2,
            count=self.count + other.count,
        )

    def rescale_weights(self, factor: float) -> None:
        """기존 가중치 전체에 factor를 곱함 (ECW 기준점 이동)."""
        self.W *= factor

    @property
    def variance(self) -> np.ndarray:
        return np.maximum(self.m2 - np.square(self.m1), 0.0)


def accumulate(acc: MomentAccumulator, x: np.ndarray, w: float) -> MomentAccumulator:
    return acc.accumulate(x, w)


# ── Bias metrics ──────────────────────────────────────────────

def second_moment_bias(
    acc: MomentAccumulator | np.ndarray,
    truth: np.ndarray,
) -> BiasSummary:
    """2차 모멘트 상대 오차 요약.

    Raises:
        ValueError: truth에 0 이하 성분
    """
    truth = np.asarray(truth, dtype=float)
    if np.any(truth <= 0):
        raise ValueError("ground-truth second moments must be strictly positive")
    m2 = acc.m2 if isinstance(acc, MomentAccumulator) else np.asarray(acc, dtype=float)
    z = (m2 - truth) / truth
    b1 = float(np.mean(z))
    b2 = float(np.sqrt(np.mean(np.square(z))))
    sigma = float(np.sqrt(np.mean(np.square(z - b1))))
    return BiasSummary(b1=b1, sigma=sigma, b2=b2)


def ensemble_bias(xs: np.ndarray, weights: np.ndarray, truth: np.ndarray) -> BiasSummary:
    """여러 체인의 현재 위치(가중)만으로 계산한 스냅샷 편향."""
    weights = np.asarray(weights, dtype=float)
    m2 = weights @ np.square(xs) / np.sum(weights)
    return second_moment_bias(m2, truth)


def entropy_bias_cauchy(acc_logC: MomentAccumulator, d: int | None = None) -> float:
    """b_𝓛² = d⁻¹ Σ (E[−log C(x_i)] − log 4π)²."""
    d = d or acc_logC.d
    entropy = math.log(4.0 * math.pi)
    return float(np.sum(np.square(acc_logC.m1 - entropy)) / d)


# ── Autocorrelation ───────────────────────────────────────────

def autocorr_neff(chain: np.ndarray) -> np.ndarray:
    """좌표별 유효 샘플 수 n / (1 + 2Σρ_k).

    자기상관 합은 Geyer의 초기 양수 수열에서 자르고 단조 감소로
    보정합니다. τ는 1/log10(n) 이상으로 제한합니다.

    Args:
        chain: (n,) 또는 (n, d)

    Returns:
        (d,) 형태의 n_eff (1차원 입력이면 스칼라 배열)

    Raises:
        InsufficientChainError: n < 50
        ConstantChainError: 분산이 0인 좌표
    """
    chain = np.asarray(chain, dtype=float)
    squeeze = chain.ndim == 1
    if squeeze:
        chain = chain[:, None]
    n = chain.shape[0]
    if n < MIN_CHAIN_LENGTH:
        raise InsufficientChainError(f"chain length {n} < {MIN_CHAIN_LENGTH}")

    centered = chain - chain.mean(axis=0)
    n_fft = next_fast_len(2 * n)
    spectrum = rfft(centered, n=n_fft, axis=0)
    acov = irfft(spectrum * np.conjugate(spectrum), n=n_fft, axis=0)[:n] / n
    if np.any(acov[0] <= 0):
        raise ConstantChainError("chain has a constant coordinate; n_eff undefined")
    rho = acov / acov[0]

    n_pairs = n // 2
    pairs = rho[: 2 * n_pairs : 2] + rho[1 : 2 * n_pairs : 2]
    positive = np.cumprod(pairs > 0, axis=0).astype(bool)
    monotone = np.minimum.accumulate(np.where(positive, pairs, 0.0), axis=0)
    tau = -1.0 + 2.0 * np.sum(monotone, axis=0)
    tau = np.maximum(tau, 1.0 / np.log10(n))

    neff = n / tau
    return neff[0] if squeeze else neff


# ── ESS ───────────────────────────────────────────────────────

def ess_from_curve(
    curve: Sequence[tuple[float, float]] | Iterable[tuple[float, float]],
    threshold: float = B2_THRESHOLD,
    n_target: int = EFFECTIVE_SAMPLES,
    cost_offset: float = 0.0,
) -> float:
    """수렴 곡선의 첫 임계값 교차점에서 ESS = n_target / n.

    교차점은 인접 체크포인트 사이에서 log(grad_evals)에 대해
    선형 보간합니다. 교차하지 않으면 0.

    Raises:
        EmptyCurveError: 빈 곡선
        ValueError: grad_evals가 단조 증가가 아님
    """
    points = [(float(n), float(b)) for n, b in curve]
    if not points:
        raise EmptyCurveError("convergence curve has no checkpoints")
    evals = np.array([n for n, _ in points])
    if np.any(np.diff(evals) < 0):
        raise ValueError("convergence curve must be monotone in grad_evals")

    for i, (n_i, b_i) in enumerate(points):
        if not b_i <= threshold:
            continue
        if i == 0:
            n_cross = n_i
        else:
            n_prev, b_prev = points[i - 1]
            if n_prev == n_i or not math.isfinite(b_prev):
                n_cross = n_i
            else:
                t = (b_prev - threshold) / (b_prev - b_i)
                n_cross = math.exp(math.log(n_prev) + t * (math.log(n_i) - math.log(n_prev)))
        return n_target / (n_cross + cost_offset)
    return 0.0


# ── Energy trace ──────────────────────────────────────────────

class EnergyTrace:
    """에너지 편차 ΔE_n 통계.

    기본은 스트리밍(평균/분산/최대 절대값)만 유지하며,
    record=True이면 전체 값을 보존합니다.
    """

    def __init__(self, d: int, record: bool = False) -> None:
        self.d = d
        self.record = record
        self._values: list[np.ndarray] = []
        self.n = 0
        self.mean = 0.0
        self._m2 = 0.0
        self.max_abs = 0.0

    def extend(self, delta_e: np.ndarray | float) -> None:
        """ΔE 값(스칼라 또는 체인 배열)을 추가 (Chan 병렬 결합)."""
        values = np.atleast_1d(np.asarray(delta_e, dtype=float))
        if self.record:
            self._values.append(values.copy())
        k = values.size
        batch_mean = float(values.mean())
        batch_m2 = float(np.sum(np.square(values - batch_mean)))
        total = self.n + k
        delta = batch_mean - self.mean
        self.mean += delta * k / total
        self._m2 += batch_m2 + delta ** 2 * self.n * k / total
        self.n = total
        self.max_abs = max(self.max_abs, float(np.max(np.abs(values))))

    @property
    def var(self) -> float:
        return self._m2 / self.n if self.n else 0.0

    @property
    def var_per_d(self) -> float:
        return self.var / self.d

    @property
    def values(self) -> np.ndarray:
        if not self.record:
            raise RuntimeError("energy trace was not recorded")
        return np.concatenate(self._values) if self._values else np.zeros(0)

    def summary(self) -> EnergySummary:
        return EnergySummary(
            n=self.n,
            mean=self.mean,
            var=self.var,
            var_per_d=self.var_per_d,
            max_abs=self.max_abs,
        )
