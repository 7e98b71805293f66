"""
StochasticVolatility — Student-t 수익률 + 로그 스케일 랜덤워크
==============================================================
파라미터 벡터 (d = N + 2):
  x[:N]  = log R_n        (일별 변동성 스케일의 로그)
  x[N]   = ν̃ = log(λν·ν)  (자유도, λν = 1/10)
  x[N+1] = σ̃ = log(λσ·σ)  (랜덤워크 스텝, λσ = 1/0.02)

모형:
  r_n / R_n ~ t_ν
  log R_n ~ N(log R_{n−1}, σ)   (n ≥ 2, log R₁은 평탄 prior)
  ν ~ Exp(λν), σ ~ Exp(λσ)  →  비제약 변수에서 log p(ν̃) = ν̃ − e^{ν̃}

log-density와 score는 모두 해석적으로 유도합니다.
"""

from __future__ import annotations

import logging

import numpy as np
from scipy.special import digamma, gammaln

from core.errors import TargetDefinitionError
from targets.base import TargetDistribution
from targets.returns import ReturnsSeries

logger = logging.getLogger(__name__)

# ── Constants ──────────────────────────────────────────────────
LAMBDA_NU = 1.0 / 10.0
LAMBDA_SIGMA = 1.0 / 0.02
_LOG_PI = np.log(np.pi)


class StochasticVolatility(TargetDistribution):
    name = "sv"

    def __init__(
        self,
        returns: np.ndarray,
        truth_second_moments: np.ndarray | None = None,
    ) -> None:
        returns = np.asarray(returns, dtype=float)
        if returns.ndim != 1 or returns.size < 2:
            raise TargetDefinitionError(
                f"stochastic volatility needs N >= 2 returns, got {returns.size}"
            )
        self.returns = returns
        self.n_obs = returns.size
        super().__init__(self.n_obs + 2, truth_second_moments=truth_second_moments)
        self._r2 = np.square(returns)
        self._log_scale0 = float(np.log(max(np.std(returns), 1e-12)))

    # ── 파라미터 변환 ─────────────────────────────────────────

    def unpack(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(log R, ν, σ). ν, σ는 원래 스케일."""
        s = x[..., : self.n_obs]
        nu = np.exp(x[..., self.n_obs]) / LAMBDA_NU
        sigma = np.exp(x[..., self.n_obs + 1]) / LAMBDA_SIGMA
        return s, nu, sigma

    # ── 구성 항 ───────────────────────────────────────────────

    def likelihood_terms(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Student-t 음의 로그우도와 (log R, ν̃)에 대한 gradient.

        Returns:
            (value (...), grad (..., d)); σ̃ 성분은 0
        """
        s, nu, _ = self.unpack(x)
        nu_b = nu[..., None]
        y2 = self._r2 * np.exp(-2.0 * s)
        ratio = y2 / nu_b
        half_nu1 = 0.5 * (nu + 1.0)

        value = (
            self.n_obs * (gammaln(0.5 * nu) - gammaln(half_nu1) + 0.5 * (np.log(nu) + _LOG_PI))
            + half_nu1 * np.sum(np.log1p(ratio), axis=-1)
            + np.sum(s, axis=-1)
        )

        grad = np.zeros(x.shape)
        grad[..., : self.n_obs] = 1.0 - (nu_b + 1.0) * y2 / (nu_b + y2)
        d_nu = (
            self.n_obs * (0.5 * digamma(0.5 * nu) - 0.5 * digamma(half_nu1) + 0.5 / nu)
            + 0.5 * np.sum(np.log1p(ratio), axis=-1)
            - half_nu1 * np.sum(y2 / (nu_b * (nu_b + y2)), axis=-1)
        )
        grad[..., self.n_obs] = d_nu * nu
        return value, grad

    def random_walk_terms(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """log R 랜덤워크 prior의 음의 로그밀도와 gradient."""
        s, _, sigma = self.unpack(x)
        steps = np.diff(s, axis=-1)
        inv_var = 1.0 / np.square(sigma)
        n_steps = self.n_obs - 1

        value = (
            0.5 * inv_var * np.sum(np.square(steps), axis=-1)
            + n_steps * (np.log(sigma) + 0.5 * np.log(2.0 * np.pi))
        )

        grad = np.zeros(x.shape)
        scaled = steps * inv_var[..., None]
        grad[..., 1: self.n_obs] += scaled
        grad[..., : self.n_obs - 1] -= scaled
        grad[..., self.n_obs + 1] = n_steps - inv_var * np.sum(np.square(steps), axis=-1)
        return value, grad

    def hyperprior_terms(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """ν̃, σ̃의 지수 prior (비제약 변수)."""
        tilde = x[..., self.n_obs:]
        value = np.sum(np.exp(tilde) - tilde, axis=-1)
        grad = np.zeros(x.shape)
        grad[..., self.n_obs:] = np.exp(tilde) - 1.0
        return value, grad

    # ── TargetDistribution ────────────────────────────────────

    def value_and_grad(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        x = np.asarray(x, dtype=float)
        value, grad = self.likelihood_terms(x)
        for term in (self.random_walk_terms, self.hyperprior_terms):
            v, g = term(x)
            value = value + v
            grad = grad + g
        return value, grad

    def neg_log_density(self, x: np.ndarray) -> np.ndarray:
        return self.value_and_grad(x)[0]

    def grad(self, x: np.ndarray) -> np.ndarray:
        return self.value_and_grad(x)[1]

    def prior_draw(self, rng: np.random.Generator, shape: tuple[int, ...] = ()) -> np.ndarray:
        """하이퍼파라미터는 prior(중심부로 절단), log R은 데이터 스케일에서 시작하는 랜덤워크."""
        tilde = np.log(np.clip(rng.exponential(size=(*shape, 2)), 0.2, 5.0))
        sigma = np.exp(tilde[..., 1:]) / LAMBDA_SIGMA
        walk = np.cumsum(sigma * rng.standard_normal((*shape, self.n_obs)), axis=-1)
        return np.concatenate([self._log_scale0 + walk, tilde], axis=-1)


def make_stochastic_volatility(
    series: ReturnsSeries,
    truth_second_moments: np.ndarray | None = None,
) -> StochasticVolatility:
    """수익률 시계열로부터 SV 사후분포 타겟 생성.

    Raises:
        TargetDefinitionError: N < 2
    """
    target = StochasticVolatility(series.to_array(), truth_second_moments)
    logger.info(f"📈 SV target: N={target.n_obs}, d={target.d}")
    return target
