"""Run configuration files and process settings.

Run configs are JSON documents validated before any work starts. Only the
values in the file (plus command-line overrides) count; environment
variables never reach a run config so that reruns reproduce results.
"""

from __future__ import annotations

from functools import lru_cache
from pathlib import Path
from typing import TYPE_CHECKING, Any, Literal, Self

import orjson
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from .constants import MANIFEST_SCHEMA
from .models import WorldConfig
from .planner_registry import PlannerKind, PlannerSpec
from .trainer import TrainConfig
from .utils.hashing import get_json_hash

if TYPE_CHECKING:
    from pydantic_settings import PydanticBaseSettingsSource


class ConfigError(ValueError):
    """A config file is missing, unreadable or fails validation."""


class Settings(BaseSettings):
    """
    Process settings.

    All variables are prefixed with DENSENAV_ (e.g. DENSENAV_LOG_LEVEL).
    They only affect diagnostics, never results.
    """

    LOG_LEVEL: str = "INFO"

    model_config = SettingsConfigDict(
        env_prefix="DENSENAV_",
        extra="ignore",
    )


@lru_cache
def get_settings() -> Settings:
    return Settings()


# ─────────────────────────────────────────────────────────────────────────────
# Command Sections
# ─────────────────────────────────────────────────────────────────────────────


class BenchConfig(BaseModel):
    """Density sweep: every planner at every agent count."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    agent_counts: tuple[int, ...] = Field(default=(2, 4, 6, 8, 10), min_length=1)
    cases: int = Field(default=50, ge=1)
    planners: tuple[PlannerSpec, ...] = Field(
        default=(PlannerSpec(kind=PlannerKind.FMP),), min_length=1
    )
    safety_checks: bool = True
    keep_trajectories: bool = False

    @model_validator(mode="after")
    def _check(self) -> Self:
        if any(count < 1 for count in self.agent_counts):
            raise ValueError(f"agent_counts must be positive, got {self.agent_counts}")
        names = [spec.name for spec in self.planners]
        if len(set(names)) != len(names):
            raise ValueError(f"Planner labels must be unique, got {names}")
        return self


class SimulateConfig(BaseModel):
    """One episode, logged step by step and optionally rendered."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    scenario: Literal["random", "circle", "swap", "file"] = "circle"
    scenario_path: Path | None = None
    agent_count: int = Field(default=4, ge=1)
    circle_radius: float = Field(default=3.0, gt=0)
    lateral_offset: float = 0.0
    planner: PlannerSpec = PlannerSpec(kind=PlannerKind.FMP)
    safety_checks: bool = True
    render: bool = True

    @model_validator(mode="after")
    def _check(self) -> Self:
        if (self.scenario == "file") != (self.scenario_path is not None):
            raise ValueError("scenario_path is required exactly when scenario is 'file'")
        return self


class GenScenariosConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    n: int = Field(default=50, ge=1)
    agent_count: int = Field(default=4, ge=1)


class RenderConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    # trajectory logs to draw, relative paths resolve against the config file
    trajectories: tuple[Path, ...] = ()


# ─────────────────────────────────────────────────────────────────────────────
# Run Config
# ─────────────────────────────────────────────────────────────────────────────


class _FileSettings(BaseSettings):
    model_config = SettingsConfigDict(frozen=True, extra="forbid")

    @classmethod
    def settings_customise_sources(
        cls,
        settings_cls: type[BaseSettings],
        init_settings: PydanticBaseSettingsSource,
        env_settings: PydanticBaseSettingsSource,
        dotenv_settings: PydanticBaseSettingsSource,
        file_secret_settings: PydanticBaseSettingsSource,
    ) -> tuple[PydanticBaseSettingsSource, ...]:
        # init kwargs only: the file is the whole truth
        return (init_settings,)


class RunConfig(_FileSettings):
    seed: int = Field(default=0, ge=0, lt=2**64)
    world: WorldConfig = WorldConfig(dimension=2, bounds=(8.0, 8.0))
    train: TrainConfig = TrainConfig()
    bench: BenchConfig = BenchConfig()
    simulate: SimulateConfig = SimulateConfig()
    gen_scenarios: GenScenariosConfig = GenScenariosConfig()
    render: RenderConfig = RenderConfig()
    log_level: str | None = None

    def snapshot(self) -> dict[str, Any]:
        return self.model_dump(mode="json")

    def digest(self) -> str:
        return get_json_hash(self.snapshot())

    def with_overrides(self, **changes: Any) -> RunConfig:
        """Copy with top-level sections replaced, validated again."""
        data = {**self.snapshot(), **{k: _dump(v) for k, v in changes.items()}}
        return RunConfig(**data)


def _dump(value: Any) -> Any:
    return value.model_dump(mode="json") if isinstance(value, BaseModel) else value


def _resolve_paths(data: dict[str, Any], base: Path) -> dict[str, Any]:
    """Make model, scenario and trajectory paths relative to the config file."""

    def fix(path: str | None) -> str | None:
        if path is None or Path(path).is_absolute():
            return path
        return str(base / path)

    bench = data.get("bench")
    if isinstance(bench, dict):
        for planner in bench.get("planners", []):
            if isinstance(planner, dict) and "model_path" in planner:
                planner["model_path"] = fix(planner["model_path"])
    simulate = data.get("simulate")
    if isinstance(simulate, dict):
        if "scenario_path" in simulate:
            simulate["scenario_path"] = fix(simulate["scenario_path"])
        planner = simulate.get("planner")
        if isinstance(planner, dict) and "model_path" in planner:
            planner["model_path"] = fix(planner["model_path"])
    render = data.get("render")
    if isinstance(render, dict) and "trajectories" in render:
        render["trajectories"] = [fix(p) for p in render["trajectories"]]
    return data


def load_run_config(path: Path) -> RunConfig:
    """Read a run config, or the config snapshot inside a run manifest.

    Raises:
        ConfigError: unreadable file, bad JSON or a schema violation.
    """
    try:
        data = orjson.loads(path.read_bytes())
    except OSError as e:
        raise ConfigError(f"Cannot read config {path}: {e}") from e
    except orjson.JSONDecodeError as e:
        raise ConfigError(f"Config {path} is not valid JSON: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError(f"Config {path} must hold a JSON object")

    if data.get("kind") == MANIFEST_SCHEMA:
        # snapshots already carry resolved paths
        data = data.get("config")
        if not isinstance(data, dict):
            raise ConfigError(f"Manifest {path} has no config snapshot")
    else:
        data = _resolve_paths(data, path.resolve().parent)

    try:
        return RunConfig(**data)
    except ValidationError as e:
        raise ConfigError(f"Invalid config {path}: {e}") from e
