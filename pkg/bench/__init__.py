"""
Bench
=====
실험 실행 하네스: 설정 병합, 튜닝, 시드 분산, 그리드 탐색, 리포트 출력.
"""

from bench.experiment import (
    ExperimentConfig,
    ExperimentReport,
    GridCell,
    GridSearchResult,
    grid_search,
    run_experiment,
    run_seeds,
)
from bench.reference import build_reference, reference_from_config, save_reference
from bench.report import ReportSummary, emit_report, read_summary

__all__ = [
    "ExperimentConfig",
    "ExperimentReport",
    "GridCell",
    "GridSearchResult",
    "ReportSummary",
    "build_reference",
    "emit_report",
    "grid_search",
    "read_summary",
    "reference_from_config",
    "run_experiment",
    "run_seeds",
    "save_reference",
]
