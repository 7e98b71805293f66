"""
HardwareProbe — 병렬 실행 자원 감지
===================================
시드별 체인을 병렬로 돌릴 때 사용할 워커 수를 결정합니다.

기능:
- 물리/논리 코어 수 감지 (psutil, 없으면 os.cpu_count)
- 가용 메모리 조회
- 메모리 압박 수준 판별
- 태스크 수 · 코어 · 메모리 기반 워커 수 추천
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass
from enum import Enum

logger = logging.getLogger(__name__)

# ── psutil import guard ───────────────────────────────────────
_PSUTIL_AVAILABLE = False
try:
    import psutil  # type: ignore[import-untyped]
    _PSUTIL_AVAILABLE = True
except ImportError:
    logger.debug("psutil not available, limited monitoring")


class MemoryPressure(str, Enum):
    """메모리 압박 수준."""
    NOMINAL = "nominal"
    WARN = "warn"
    CRITICAL = "critical"     # 병렬 실행 중단, 순차 실행


@dataclass
class CpuInfo:
    physical_cores: int = 1
    logical_cores: int = 1


@dataclass
class MemoryInfo:
    """메모리 정보."""
    total_gb: float = 0.0
    available_gb: float = 0.0
    pressure: MemoryPressure = MemoryPressure.NOMINAL


class HardwareProbe:
    """코어/메모리 감지 및 워커 수 추천."""

    def __init__(self) -> None:
        self._cpu_info: CpuInfo | None = None

    def detect_cpu(self) -> CpuInfo:
        """코어 수를 감지합니다 (결과 캐싱)."""
        if self._cpu_info is not None:
            return self._cpu_info

        logical = os.cpu_count() or 1
        physical = logical
        if _PSUTIL_AVAILABLE:
            physical = psutil.cpu_count(logical=False) or logical
            logical = psutil.cpu_count(logical=True) or logical
        self._cpu_info = CpuInfo(physical_cores=physical, logical_cores=logical)
        return self._cpu_info

    def get_memory_info(self) -> MemoryInfo:
        """현재 메모리 상태를 조회합니다. psutil이 없으면 압박 없음으로 간주."""
        mem = MemoryInfo()
        if not _PSUTIL_AVAILABLE:
            return mem

        vm = psutil.virtual_memory()
        mem.total_gb = round(vm.total / (1024 ** 3), 1)
        mem.available_gb = round(vm.available / (1024 ** 3), 1)
        if mem.available_gb < 1.0:
            mem.pressure = MemoryPressure.CRITICAL
        elif mem.available_gb < 2.0:
            mem.pressure = MemoryPressure.WARN
        return mem

    def recommend_workers(self, n_tasks: int, memory_per_task_mb: float = 256.0) -> int:
        """태스크 수, 물리 코어, 가용 메모리 중 가장 작은 값.

        Returns:
            1 이상 n_tasks 이하의 워커 수 (n_tasks=0이면 1)
        """
        if n_tasks <= 1:
            return 1
        cpu = self.detect_cpu()
        workers = min(n_tasks, cpu.physical_cores)

        mem = self.get_memory_info()
        if mem.pressure is MemoryPressure.CRITICAL:
            logger.warning(f"⚠️ Memory pressure CRITICAL: {mem.available_gb:.1f}GB available; running serially")
            return 1
        if mem.available_gb > 0 and memory_per_task_mb > 0:
            by_memory = int(mem.available_gb * 1024 // memory_per_task_mb)
            workers = min(workers, max(1, by_memory))

        logger.debug(f"🖥️ {workers} workers for {n_tasks} tasks ({cpu.physical_cores} cores)")
        return max(1, workers)
