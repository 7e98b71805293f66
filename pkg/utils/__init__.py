"""
Utils Module
============
유틸리티 기능 모듈:
- RunEventLogger: 실행 이벤트 JSONL 기록
- HardwareProbe: 병렬 워커 수 추천
"""

from utils.hardware_probe import HardwareProbe
from utils.structured_logger import RunEventLogger

__all__ = ["HardwareProbe", "RunEventLogger"]
