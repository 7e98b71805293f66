"""
RunEventLogger — 실행 이벤트의 구조화 기록
==========================================
튜닝 결과, 체인 완료, 발산, 오류, 메트릭을 출력 디렉토리의
`events.jsonl`에 한 줄씩 JSON 이벤트로 남깁니다.

이벤트 타입:
- tuning: 자동 튜닝/그리드 탐색 결과
- chain: 시드별 체인 완료
- checkpoint: 수렴 기록 요약
- divergence: 발산 비율 경고
- error: 실행 중 오류
- metric: 실행 단위 지표 (평균 ESS, 경과 시간 등)
"""

from __future__ import annotations

import logging
import uuid
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

from pydantic import BaseModel, ConfigDict, Field

logger = logging.getLogger(__name__)

EVENTS_FILENAME = "events.jsonl"


class StructuredEvent(BaseModel):
    """events.jsonl의 한 줄."""

    model_config = ConfigDict(ser_json_inf_nan="constants")

    event_id: str = Field(
        default_factory=lambda: str(uuid.uuid4())
    )
    timestamp: str = Field(
        default_factory=lambda: datetime.now(timezone.utc).isoformat()
    )
    event_type: str  # "tuning" | "chain" | "checkpoint" | "divergence" | "error" | "metric"
    source: str      # "autotune" | "grid" | "harness" | "seed-<k>"
    content: str
    metadata: dict[str, Any] = Field(default_factory=dict)

    def to_jsonl(self) -> str:
        """JSON-line 형태 직렬화."""
        return self.model_dump_json()


class RunEventLogger:
    """실행 이벤트를 파일 + 메모리에 기록.

    기존 logging.Logger를 보완하여, 한 번의 실험 실행을
    사후 분석할 수 있는 형태로 남깁니다.
    """

    def __init__(
        self,
        out_dir: str | Path,
        run_id: str = "",
        enabled: bool = True,
    ) -> None:
        self.out_dir = Path(out_dir)
        self.run_id = run_id or str(uuid.uuid4())[:8]
        self.enabled = enabled
        self._events: list[StructuredEvent] = []
        self._log_file = self.out_dir / EVENTS_FILENAME

        if self.enabled:
            self.out_dir.mkdir(parents=True, exist_ok=True)
            logger.info(f"📊 RunEventLogger initialized → {self._log_file}")

    @property
    def path(self) -> Path:
        return self._log_file

    def _emit(self, event: StructuredEvent) -> None:
        event.metadata.setdefault("run_id", self.run_id)
        self._events.append(event)
        if not self.enabled:
            return
        try:
            with open(self._log_file, "a", encoding="utf-8") as f:
                f.write(event.to_jsonl() + "\n")
        except OSError as e:
            logger.error(f"❌ Failed to write event log: {e}")

    # ── 이벤트 발행 메서드 ────────────────────────────────────

    def tuning(self, source: str, eps: float, L: float, grad_evals: int, **metadata: Any) -> None:
        """하이퍼파라미터 결정 결과를 기록합니다."""
        self._emit(StructuredEvent(
            event_type="tuning",
            source=source,
            content=f"eps={eps:.6g}, L={L:.6g}",
            metadata={"eps": eps, "L": L, "grad_evals": grad_evals, **metadata},
        ))

    def chain(self, seed_index: int, ess: float, grad_evals: int, divergences: int, **metadata: Any) -> None:
        self._emit(StructuredEvent(
            event_type="chain",
            source=f"seed-{seed_index}",
            content=f"ESS={ess:.6g}",
            metadata={
                "seed_index": seed_index,
                "ess": ess,
                "grad_evals": grad_evals,
                "divergences": divergences,
                **metadata,
            },
        ))

    def checkpoint(self, seed_index: int, n_checkpoints: int, final_b2: float, **metadata: Any) -> None:
        self._emit(StructuredEvent(
            event_type="checkpoint",
            source=f"seed-{seed_index}",
            content=f"{n_checkpoints} checkpoints, final b2={final_b2:.6g}",
            metadata={"n_checkpoints": n_checkpoints, "final_b2": final_b2, **metadata},
        ))

    def divergence(self, seed_index: int, divergences: int, n_steps: int, **metadata: Any) -> None:
        """발산 비율 초과 경고를 기록합니다."""
        self._emit(StructuredEvent(
            event_type="divergence",
            source=f"seed-{seed_index}",
            content=f"{divergences} divergences in {n_steps} steps",
            metadata={"divergences": divergences, "n_steps": n_steps, **metadata},
        ))

    def error(self, source: str, error: str, **metadata: Any) -> None:
        """오류를 기록합니다."""
        self._emit(StructuredEvent(
            event_type="error",
            source=source,
            content=error,
            metadata=metadata,
        ))

    def metric(self, key: str, value: float, unit: str = "", **metadata: Any) -> None:
        """실행 단위 지표를 기록합니다."""
        self._emit(StructuredEvent(
            event_type="metric",
            source="harness",
            content=f"{key}={value}{unit}",
            metadata={"key": key, "value": value, "unit": unit, **metadata},
        ))

    # ── 조회 ──────────────────────────────────────────────────

    def get_trace(
        self,
        event_type: str | None = None,
        limit: int = 50,
    ) -> list[dict[str, Any]]:
        """이벤트 트레이스를 반환합니다.

        Args:
            event_type: 필터링할 이벤트 타입
            limit: 최대 반환 개수
        """
        events = self._events
        if event_type:
            events = [e for e in events if e.event_type == event_type]
        return [e.model_dump() for e in events[-limit:]]

    @property
    def event_count(self) -> int:
        return len(self._events)
