#!/usr/bin/env python3
"""
합성 수익률 CSV 생성기
=====================
확률 변동성 생성 과정(가우시안 랜덤워크 log-scale + Student-t 잡음)에서
수익률을 뽑아 한 열짜리 CSV로 저장합니다.

사용: python scripts/simulate_returns.py --n 2427 --seed 0 --out data/returns.csv
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import pandas as pd

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from targets.returns import simulate_returns  # noqa: E402

logging.basicConfig(level=logging.INFO, format="%(levelname)-7s │ %(message)s")
logger = logging.getLogger("simulate_returns")


def main() -> int:
    parser = argparse.ArgumentParser(description="write a synthetic returns series")
    parser.add_argument("--n", type=int, default=2427)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--nu", type=float, default=10.0)
    parser.add_argument("--sigma", type=float, default=0.02)
    parser.add_argument("--out", default="data/returns.csv")
    args = parser.parse_args()

    series = simulate_returns(args.n, seed=args.seed, nu=args.nu, sigma=args.sigma)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame({"return": series.to_array()}).to_csv(out, index=False, float_format="%.10g")
    logger.info(f"✅ {len(series)} returns → {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
