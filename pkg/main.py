"""
Microcanonical Sampler Bench — CLI
==================================
메인 진입점: 실험 설정을 병합하고 샘플링 실험 또는 참조 실행을 수행합니다.

명령어:
- sample: 튜닝(auto|grid|none) → 시드별 체인 → CSV/JSON 리포트
- reference: 긴 소(小)-ε MCLMC 실행으로 정답 2차 모멘트(.npy) 생성

설정 우선순위 (낮음 → 높음):
configs/base.yaml < --config 실험 파일 < 환경 변수 < CLI 플래그

종료 코드:
- 0: 성공
- 1: 샘플링 오류
- 2: 설정 오류
- 3: 입출력 오류

실행: python main.py sample --target icg --alg mclmc --tune auto --out results/icg
"""

from __future__ import annotations

import argparse
import logging
import sys
from typing import Any, Sequence

from dotenv import load_dotenv

from bench.experiment import ExperimentConfig, run_experiment
from bench.reference import reference_from_config, save_reference
from bench.report import emit_report
from core.config_loader import ConfigLoader, load_experiment_file
from core.errors import ConfigurationError, ReportWriteError, SamplerError
from core.state import Algorithm, TuneMode
from targets.registry import TARGET_NAMES

logger = logging.getLogger("sampler")

EXIT_OK = 0
EXIT_SAMPLER = 1
EXIT_CONFIG = 2
EXIT_IO = 3


def _float_or_inf(value: str) -> float:
    try:
        return float(value)
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected a number or 'inf', got {value!r}") from e


def _add_target_args(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("target")
    group.add_argument("--target", choices=TARGET_NAMES)
    group.add_argument("--d", type=int)
    group.add_argument("--kappa", type=float)
    group.add_argument("--q", type=float, help="Rosenbrock Q")
    group.add_argument("--spacing", choices=["log", "linear"], help="ICG eigenvalue spacing")
    group.add_argument("--target-seed", type=int)
    group.add_argument("--returns-csv")
    group.add_argument("--reference", help="ground-truth second moments (.npy)")


def _add_sampler_args(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("sampler")
    group.add_argument("--alg", choices=[a.value for a in Algorithm])
    group.add_argument("--integrator", choices=["lf", "mn", "leapfrog", "minimal_norm"])
    group.add_argument("--eps", type=_float_or_inf)
    group.add_argument("--L", type=_float_or_inf)
    group.add_argument("--steps", type=int)
    group.add_argument("--seed", type=int)
    group.add_argument("--init", choices=["prior", "normal"])
    group.add_argument("--init-scale", type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sampler",
        description="Microcanonical HMC / Langevin sampler benchmarks",
    )
    parser.add_argument("--log-level", help="override logging.level from base.yaml")
    sub = parser.add_subparsers(dest="command", required=True)

    sample = sub.add_parser("sample", help="run a sampling experiment")
    sample.add_argument("--config", help="flat key = value experiment file")
    _add_target_args(sample)
    _add_sampler_args(sample)
    sample.add_argument("--seeds", type=int)
    sample.add_argument("--tune", choices=[t.value for t in TuneMode])
    sample.add_argument("--chains", type=int, help="ensemble mode: chains integrated together")
    sample.add_argument("--workers", type=int, help="parallel seed workers (0 = auto)")
    sample.add_argument("--eps-grid", help="comma-separated ε values for --tune grid")
    sample.add_argument("--L-grid", help="comma-separated L values for --tune grid")
    sample.add_argument("--var-e-target", type=float)
    sample.add_argument("--out")

    reference = sub.add_parser("reference", help="build ground-truth second moments")
    reference.add_argument("--config", help="flat key = value experiment file")
    _add_target_args(reference)
    _add_sampler_args(reference)
    reference.add_argument("--out", required=True, help="output .npy path")
    return parser


def _cli_values(args: argparse.Namespace) -> dict[str, Any]:
    """argparse 결과 → 평탄한 설정 key (None은 제외)."""
    keys = {
        "target": "target", "d": "d", "kappa": "kappa", "q": "q", "spacing": "spacing",
        "target_seed": "target_seed", "returns_csv": "returns_csv", "reference": "reference",
        "alg": "alg", "integrator": "integrator", "eps": "eps", "L": "L", "steps": "steps",
        "seed": "seed", "init": "init", "init_scale": "init_scale",
        "seeds": "seeds", "tune": "tune", "chains": "chains", "workers": "workers",
        "eps_grid": "eps_grid", "L_grid": "L_grid", "var_e_target": "var_e_target", "out": "out",
    }
    values = {key: getattr(args, attr, None) for attr, key in keys.items()}
    return {k: v for k, v in values.items() if v is not None}


def setup_logging(loader: ConfigLoader, level: str | None = None) -> None:
    logging.basicConfig(
        level=(level or loader.get("logging.level", "INFO")).upper(),
        format=loader.get("logging.format", "%(asctime)s │ %(levelname)-7s │ %(name)-20s │ %(message)s"),
        datefmt=loader.get("logging.datefmt", "%H:%M:%S"),
        force=True,
    )


def cmd_sample(args: argparse.Namespace, loader: ConfigLoader) -> int:
    file_values = load_experiment_file(args.config) if args.config else {}
    config = ExperimentConfig.from_sources(file_values, _cli_values(args), loader=loader)
    report = run_experiment(config, loader=loader)
    emit_report(report)
    print(
        f"{report.target_name}: ESS {report.ess_mean:.4g} ± {report.ess_std:.2g} "
        f"(ε={report.eps:.4g}, L={report.L:.4g}) → {config.out}"
    )
    return EXIT_OK


def cmd_reference(args: argparse.Namespace, loader: ConfigLoader) -> int:
    file_values = load_experiment_file(args.config) if args.config else {}
    cli = _cli_values(args)
    out = cli.pop("out")
    config = ExperimentConfig.from_sources(
        file_values, {**cli, "tune": TuneMode.NONE.value if "eps" in cli else TuneMode.AUTO.value},
        loader=loader,
    )
    path = save_reference(reference_from_config(config, loader=loader), out)
    print(f"reference second moments → {path}")
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    load_dotenv()
    args = build_parser().parse_args(argv)
    loader = ConfigLoader()
    setup_logging(loader, args.log_level)

    commands = {"sample": cmd_sample, "reference": cmd_reference}
    try:
        return commands[args.command](args, loader)
    except ConfigurationError as e:
        logger.error(f"❌ Configuration error: {e}")
        return EXIT_CONFIG
    except (ReportWriteError, OSError) as e:
        logger.error(f"❌ I/O error: {e}")
        return EXIT_IO
    except SamplerError as e:
        logger.error(f"❌ Sampling failed: {e}")
        return EXIT_SAMPLER


if __name__ == "__main__":
    sys.exit(main())
