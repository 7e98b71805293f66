from __future__ import annotations

import logging
from typing import TYPE_CHECKING

# Prometheus Metrics
from prometheus_client import Counter, Histogram

if TYPE_CHECKING:
    from engine.samplers import ChainResult

logger = logging.getLogger(__name__)

# Prometheus Counters for sampling cost
GRADIENT_EVALUATIONS = Counter(
    'sampler_gradient_evaluations_total', 'Gradient evaluations spent', ['target', 'algorithm']
)
DIVERGENCES = Counter(
    'sampler_divergences_total', 'Non-finite integration steps', ['target', 'algorithm']
)
CHAINS_COMPLETED = Counter(
    'sampler_chains_completed_total', 'Chains run to completion', ['target', 'algorithm']
)
TUNING_GRADIENT_EVALUATIONS = Counter(
    'sampler_tuning_gradient_evaluations_total', 'Gradient evaluations spent tuning', ['target', 'algorithm']
)
CHAIN_ESS = Histogram(
    'sampler_chain_ess', 'Per-chain effective sample size per gradient',
    ['target', 'algorithm'],
    buckets=(1e-5, 1e-4, 1e-3, 3e-3, 1e-2, 3e-2, 1e-1, 1.0),
)


def record_chain(target: str, algorithm: str, result: ChainResult) -> None:
    """체인 하나의 비용/발산/ESS를 Prometheus 메트릭으로 익스포트합니다."""
    GRADIENT_EVALUATIONS.labels(target=target, algorithm=algorithm).inc(result.grad_evals)
    if result.divergences > 0:
        DIVERGENCES.labels(target=target, algorithm=algorithm).inc(result.divergences)
    CHAINS_COMPLETED.labels(target=target, algorithm=algorithm).inc()
    CHAIN_ESS.labels(target=target, algorithm=algorithm).observe(result.report.ess)

    logger.debug(
        f"[Metrics] {target}/{algorithm}: grads={result.grad_evals}, "
        f"divergences={result.divergences}, ESS={result.report.ess:.4g}"
    )


def record_tuning(target: str, algorithm: str, grad_evals: int) -> None:
    if grad_evals > 0:
        TUNING_GRADIENT_EVALUATIONS.labels(target=target, algorithm=algorithm).inc(grad_evals)
