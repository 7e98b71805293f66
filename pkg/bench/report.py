"""
Report — 수렴 곡선 CSV · 요약 JSON 출력
=======================================
- convergence_seed<k>.csv: 시드별 체크포인트 기록
- summary.json: 실험 요약 (JSON 상수로 inf/nan 보존)
"""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Iterable, Literal

import pandas as pd
from pydantic import BaseModel, ConfigDict

from bench.experiment import ExperimentReport, GridSearchResult
from core.errors import ReportWriteError
from core.state import Checkpoint, TuningReport

logger = logging.getLogger(__name__)

CSV_COLUMNS = ["step", "grad_evals", "b1", "sigma", "b2", "varE_per_d", "divergences"]
ENTROPY_COLUMN = "entropy_bias"
FLOAT_FORMAT = "%.10g"
SUMMARY_FILENAME = "summary.json"

ReportFormat = Literal["csv", "json"]


class ReportSummary(BaseModel):
    """summary.json 스키마."""

    model_config = ConfigDict(ser_json_inf_nan="constants")

    target: str
    algorithm: str
    integrator: str
    eps: float
    L: float
    ess_mean: float
    ess_std: float
    tuning_cost: int
    seeds: int
    ess_per_seed: list[float]
    grad_evals_total: int
    divergences: int
    chains: int | None = None
    tuning: TuningReport | None = None
    grid: GridSearchResult | None = None

    @classmethod
    def from_report(cls, report: ExperimentReport) -> ReportSummary:
        cfg = report.config
        return cls(
            target=report.target_name,
            algorithm=cfg.algorithm.value,
            integrator=cfg.integrator.value,
            eps=report.eps,
            L=report.L,
            ess_mean=report.ess_mean,
            ess_std=report.ess_std,
            tuning_cost=report.tuning_cost,
            seeds=len(report.chains),
            ess_per_seed=report.ess_per_seed,
            grad_evals_total=report.grad_evals_total,
            divergences=report.divergences,
            chains=cfg.chains,
            tuning=report.tuning,
            grid=report.grid,
        )


def convergence_frame(checkpoints: Iterable[Checkpoint]) -> pd.DataFrame:
    """체크포인트 → DataFrame. 엔트로피 편향이 있으면 열 추가."""
    rows = [
        {
            "step": c.step,
            "grad_evals": c.grad_evals,
            "b1": c.b1,
            "sigma": c.sigma,
            "b2": c.b2,
            "varE_per_d": c.var_e_per_d,
            "divergences": c.divergences,
            ENTROPY_COLUMN: c.entropy_bias,
        }
        for c in checkpoints
    ]
    if not rows:
        return pd.DataFrame(columns=CSV_COLUMNS)
    frame = pd.DataFrame(rows)
    if frame[ENTROPY_COLUMN].isna().all():
        frame = frame.drop(columns=ENTROPY_COLUMN)
    return frame


def write_convergence_csv(checkpoints: Iterable[Checkpoint], path: str | Path) -> Path:
    """빈 곡선이면 헤더만 기록합니다."""
    path = Path(path)
    frame = convergence_frame(checkpoints)
    try:
        frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, na_rep="nan")
    except OSError as e:
        raise ReportWriteError(f"cannot write {path}: {e}") from e
    return path


def write_summary(summary: ReportSummary, path: str | Path) -> Path:
    path = Path(path)
    try:
        path.write_text(summary.model_dump_json(indent=2) + "\n", encoding="utf-8")
    except OSError as e:
        raise ReportWriteError(f"cannot write {path}: {e}") from e
    return path


def read_summary(path: str | Path) -> ReportSummary:
    return ReportSummary.model_validate_json(Path(path).read_text(encoding="utf-8"))


def emit_report(
    report: ExperimentReport,
    out_dir: str | Path | None = None,
    formats: Iterable[ReportFormat] = ("csv", "json"),
) -> list[Path]:
    """리포트를 파일로 출력.

    Returns:
        생성된 파일 경로 (시드 순 CSV, 이후 summary.json)

    Raises:
        ReportWriteError: 디렉토리 생성/쓰기 실패
    """
    out = Path(out_dir) if out_dir is not None else report.config.out
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise ReportWriteError(f"cannot create output directory {out}: {e}") from e

    formats = set(formats)
    written: list[Path] = []
    if "csv" in formats:
        for k, chain in enumerate(report.chains):
            written.append(write_convergence_csv(chain.report.checkpoints, out / f"convergence_seed{k}.csv"))
    if "json" in formats:
        written.append(write_summary(ReportSummary.from_report(report), out / SUMMARY_FILENAME))

    logger.info(f"✅ Report written to {out} ({len(written)} files)")
    return written
