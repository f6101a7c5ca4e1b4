import sys
from collections.abc import Generator
from pathlib import Path

import pytest

from densenav.config import get_settings
from densenav.logging_config import configure_logging

pytest_plugins = [
    "tests.fixtures.scenarios",
    "tests.fixtures.models",
    "tests.fixtures.configs",
]

sys.path.insert(0, str(Path(__file__).parent.parent / "src"))


@pytest.fixture(autouse=True)
def quiet_logging() -> None:
    configure_logging("WARNING")


@pytest.fixture(autouse=True)
def fresh_settings() -> Generator[None]:
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()
