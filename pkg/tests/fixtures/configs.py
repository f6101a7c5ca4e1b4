from collections.abc import Callable
from pathlib import Path
from typing import Any

import orjson
import pytest


@pytest.fixture
def write_config(tmp_path: Path) -> Callable[..., Path]:
    """Write a run config dict as JSON and return its path."""

    def _write(data: dict[str, Any], name: str = "config.json") -> Path:
        path = tmp_path / "configs" / name
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(orjson.dumps(data))
        return path

    return _write


@pytest.fixture
def small_train_config() -> dict[str, Any]:
    return {
        "seed": 7,
        "train": {
            "dimension": 2,
            "hidden_sizes": [16],
            "parallel_envs": 2,
            "n_step": 4,
            "stages": [{"agent_count": 2, "episodes": 4}],
            "world": {"dimension": 2, "bounds": [8.0, 8.0], "dt": 0.2, "t_max": 4.0},
        },
    }
