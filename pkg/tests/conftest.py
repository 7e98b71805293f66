import pytest

from core.config_loader import ENV_OVERRIDES, ConfigLoader


@pytest.fixture(autouse=True)
def fresh_loader(monkeypatch):
    """테스트마다 ConfigLoader 싱글톤과 환경 변수 오버라이드 초기화."""
    for key in ENV_OVERRIDES:
        monkeypatch.delenv(key, raising=False)
    ConfigLoader.reset()
    yield
    ConfigLoader.reset()
