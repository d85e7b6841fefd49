from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

CONFIGS = Path(__file__).resolve().parents[1] / "src" / "hetnet" / "configs"


@pytest.fixture
def configs() -> Path:
    return CONFIGS
