"""
Returns — 일별 수익률 시계열 입력
================================
- load_returns_csv: 한 줄에 숫자 하나인 CSV (숫자가 아닌 헤더 한 줄 허용)
- simulate_returns: 확률 변동성 생성 과정에서의 합성 시계열
"""

from __future__ import annotations

import logging
from pathlib import Path

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, field_validator

from core.errors import ReturnsFormatError

logger = logging.getLogger(__name__)


class ReturnsSeries(BaseModel):
    """수익률 시계열 (파일 순서 유지)."""

    model_config = ConfigDict(frozen=True)

    values: tuple[float, ...]

    @field_validator("values")
    @classmethod
    def _finite(cls, values: tuple[float, ...]) -> tuple[float, ...]:
        if not values:
            raise ValueError("returns series is empty")
        if not np.all(np.isfinite(values)):
            raise ValueError("returns series contains non-finite values")
        return values

    def __len__(self) -> int:
        return len(self.values)

    def to_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)


def _is_number(token: str) -> bool:
    try:
        float(token)
    except (TypeError, ValueError):
        return False
    return True


def load_returns_csv(path: str | Path) -> ReturnsSeries:
    """수익률 CSV 로드.

    Raises:
        FileNotFoundError: 파일 없음
        ReturnsFormatError: 빈 파일, 헤더 이후 숫자가 아닌 행, 여러 열
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"returns file not found: {path}")

    try:
        frame = pd.read_csv(path, header=None, dtype=str, skipinitialspace=True)
    except pd.errors.EmptyDataError as e:
        raise ReturnsFormatError(f"returns file is empty: {path}") from e
    except pd.errors.ParserError as e:
        raise ReturnsFormatError(f"cannot parse {path}: {e}") from e

    if frame.shape[1] != 1:
        raise ReturnsFormatError(
            f"expected one value per row, found {frame.shape[1]} columns in {path}"
        )

    column = frame.iloc[:, 0].str.strip()
    first_row = 1
    if len(column) and not _is_number(column.iloc[0]):
        logger.debug(f"📄 skipping header {column.iloc[0]!r} in {path.name}")
        column = column.iloc[1:]
        first_row = 2
    if column.empty:
        raise ReturnsFormatError(f"returns file has no data rows: {path}")

    numeric = pd.to_numeric(column, errors="coerce")
    bad = numeric.isna() | ~np.isfinite(numeric.to_numpy(dtype=float, na_value=np.nan))
    if bad.any():
        offset = int(np.flatnonzero(bad.to_numpy())[0])
        raise ReturnsFormatError(
            f"non-numeric value {column.iloc[offset]!r} at row {first_row + offset} of {path}"
        )

    series = ReturnsSeries(values=tuple(numeric.astype(float).tolist()))
    logger.info(f"📄 Loaded {len(series)} returns from {path.name}")
    return series


def simulate_returns(
    n: int,
    seed: int = 0,
    nu: float = 10.0,
    sigma: float = 0.02,
    log_scale0: float = -4.5,
) -> ReturnsSeries:
    """log R_n 가우시안 랜덤워크 + Student-t 잡음으로 합성 수익률 생성."""
    rng = np.random.default_rng(seed)
    log_scale = log_scale0 + np.cumsum(sigma * rng.standard_normal(n))
    returns = np.exp(log_scale) * rng.standard_t(nu, size=n)
    return ReturnsSeries(values=tuple(returns.tolist()))
