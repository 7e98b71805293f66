"""
ConfigLoader — 계층적 설정 로더
===============================
전역 기본값(configs/base.yaml)과 실험 파일(평탄한 `key = value`)을
읽어 실험 설정의 원천 값을 제공합니다.

우선순위 (낮음 → 높음):
- base.yaml: 전역 기본값 (튜닝 상수, 체크포인트, 그리드, 로깅)
- 실험 파일: configs/experiments/*.cfg
- 환경 변수 (.env 포함): SAMPLER_LOG_LEVEL, SAMPLER_WORKERS
- CLI 플래그
"""

from __future__ import annotations

import logging
import os
from pathlib import Path
from typing import Any

import yaml

from core.errors import ConfigurationError

logger = logging.getLogger(__name__)

# ── Constants ──────────────────────────────────────────────────
DEFAULT_CONFIGS_DIR = os.path.join(
    os.path.dirname(os.path.dirname(os.path.abspath(__file__))),
    "configs",
)

ENV_OVERRIDES: dict[str, str] = {
    "SAMPLER_LOG_LEVEL": "logging.level",
    "SAMPLER_WORKERS": "harness.workers",
}


class ConfigLoader:
    """전역 설정 로더 (Singleton).

    base.yaml을 한 번 읽어 캐싱하고, 점(.) 표기법 조회를 제공합니다.
    """

    _instance: ConfigLoader | None = None
    _initialized: bool = False

    def __new__(cls, configs_dir: str = DEFAULT_CONFIGS_DIR) -> ConfigLoader:
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __init__(self, configs_dir: str = DEFAULT_CONFIGS_DIR) -> None:
        if ConfigLoader._initialized:
            return
        ConfigLoader._initialized = True

        self.configs_dir = configs_dir
        self._base_config: dict[str, Any] = {}
        self._load_base()
        self._apply_env()
        logger.debug(f"⚙️ ConfigLoader initialized (dir: {self.configs_dir})")

    def _load_base(self) -> None:
        """base.yaml 기본 설정 로드."""
        base_path = os.path.join(self.configs_dir, "base.yaml")
        if not os.path.exists(base_path):
            logger.warning(f"⚠️ base.yaml not found at {base_path}")
            self._base_config = {}
            return
        try:
            with open(base_path, "r", encoding="utf-8") as f:
                self._base_config = yaml.safe_load(f) or {}
        except (OSError, yaml.YAMLError) as e:
            logger.error(f"❌ Failed to load base.yaml: {e}")
            self._base_config = {}

    def _apply_env(self) -> None:
        for env_key, dotted in ENV_OVERRIDES.items():
            value = os.environ.get(env_key)
            if value:
                self.set(dotted, yaml.safe_load(value))
                logger.debug(f"⚙️ {dotted} overridden by {env_key}")

    @property
    def base(self) -> dict[str, Any]:
        """전역 기본 설정."""
        return self._base_config

    def get(self, key: str, default: Any = None) -> Any:
        """점(.) 표기법으로 중첩 설정 값 조회.

        Example:
            config.get("tuning.var_e_target", 0.0005)
        """
        value: Any = self._base_config
        for k in key.split("."):
            if not isinstance(value, dict):
                return default
            value = value.get(k)
            if value is None:
                return default
        return value

    def set(self, key: str, value: Any) -> None:
        node = self._base_config
        *parents, leaf = key.split(".")
        for k in parents:
            node = node.setdefault(k, {})
        node[leaf] = value

    def reload(self) -> None:
        """base.yaml 재로딩."""
        self._load_base()
        self._apply_env()
        logger.info("⚙️ Config reloaded")

    @classmethod
    def reset(cls) -> None:
        """싱글톤 인스턴스 초기화 (테스트용)."""
        cls._instance = None
        cls._initialized = False


def load_experiment_file(path: str | Path) -> dict[str, str]:
    """평탄한 `key = value` 실험 파일 파싱.

    `#` 주석과 빈 줄은 무시합니다. 값은 문자열 그대로 반환하며
    형 변환은 ExperimentConfig 검증 단계에서 수행합니다.

    Raises:
        FileNotFoundError: 파일 없음
        ConfigurationError: `=` 없는 줄, 빈 키, 중복 키
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"experiment config not found: {path}")

    values: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            key = key.strip()
            if not sep or not key:
                raise ConfigurationError(f"{path}:{lineno}: expected 'key = value', got {raw.strip()!r}")
            if key in values:
                raise ConfigurationError(f"{path}:{lineno}: duplicate key {key!r}")
            values[key] = value.strip()

    logger.info(f"⚙️ Loaded {len(values)} keys from {path.name}")
    return values
