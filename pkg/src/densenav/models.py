from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import TYPE_CHECKING, Any, Literal, Self

import numpy as np
import orjson
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .constants import (
    DEFAULT_BOUNDS_2D,
    DEFAULT_BOUNDS_3D,
    DEFAULT_NEIGHBOR_RADIUS,
    DEFAULT_T_MAX,
    EVAL_DT,
    MIN_ARRIVAL_TOLERANCE,
    SPEED_TOLERANCE,
)
from .geometry import (
    DimensionMismatchError,
    clamp,
    heading_angles,
    heading_vector,
    norm,
    normalize_angle,
    surface_distance,
)

if TYPE_CHECKING:
    import numpy.typing as npt

    Vector = npt.NDArray[np.float64]


def as_vector(values: Any, dimension: int | None = None) -> Vector:
    """Copy values into a read-only float64 vector of dimension 2 or 3."""
    vector = np.array(values, dtype=np.float64)
    if vector.ndim != 1 or vector.size not in (2, 3):
        raise DimensionMismatchError(f"Expected a 2D or 3D vector, got shape {vector.shape}")
    if dimension is not None and vector.size != dimension:
        raise DimensionMismatchError(
            f"Expected a {dimension}D vector, got a {vector.size}D one"
        )
    if not np.all(np.isfinite(vector)):
        raise ValueError(f"Vector has non-finite components: {vector.tolist()}")
    vector.flags.writeable = False
    return vector


# ─────────────────────────────────────────────────────────────────────────────
# Status Enums
# ─────────────────────────────────────────────────────────────────────────────


class AgentStatus(str, Enum):
    ACTIVE = "active"
    ARRIVED = "arrived"
    COLLIDED = "collided"


class AgentOutcome(str, Enum):
    SUCCESS = "success"
    COLLISION = "collision"
    STUCK = "stuck"
    RUNNING = "running"


class ScenarioOutcome(str, Enum):
    SUCCESS = "success"
    COLLISION = "collision"
    STUCK = "stuck"


class ControllerMode(str, Enum):
    POLICY = "policy"
    FMP = "fmp"


class SwitchReason(str, Enum):
    NORMAL = "normal"
    HIGH_RISK = "high_risk"
    SIMPLE = "simple"
    STUCK = "stuck"


# ─────────────────────────────────────────────────────────────────────────────
# Agent State
# ─────────────────────────────────────────────────────────────────────────────


@dataclass(frozen=True, slots=True, eq=False)
class ObservableState:
    """The part of an agent that other agents can see."""

    id: int
    position: Vector
    velocity: Vector
    radius: float


@dataclass(frozen=True, slots=True, eq=False)
class AgentState:
    id: int
    position: Vector
    velocity: Vector
    radius: float
    goal: Vector
    v_pref: float
    psi: float = 0.0
    phi: float = math.pi / 2
    status: AgentStatus = AgentStatus.ACTIVE
    v_max_factor: float = 1.0

    def __post_init__(self) -> None:
        position = as_vector(self.position)
        dimension = position.size
        object.__setattr__(self, "position", position)
        object.__setattr__(self, "velocity", as_vector(self.velocity, dimension))
        object.__setattr__(self, "goal", as_vector(self.goal, dimension))

        if not self.radius > 0:
            raise ValueError(f"Agent {self.id}: radius must be positive, got {self.radius}")
        if not self.v_pref > 0:
            raise ValueError(f"Agent {self.id}: v_pref must be positive, got {self.v_pref}")
        if not self.v_max_factor > 0:
            raise ValueError(f"Agent {self.id}: v_max_factor must be positive")
        if norm(self.velocity) > self.v_max + SPEED_TOLERANCE:
            raise ValueError(
                f"Agent {self.id}: speed {norm(self.velocity)} exceeds v_max {self.v_max}"
            )

        object.__setattr__(self, "psi", normalize_angle(self.psi))
        phi = math.pi / 2 if dimension == 2 else clamp(self.phi, 0.0, math.pi)
        object.__setattr__(self, "phi", phi)

    @property
    def dimension(self) -> int:
        return int(self.position.size)

    @property
    def v_max(self) -> float:
        return self.v_max_factor * self.v_pref

    @property
    def heading(self) -> Vector:
        return heading_vector(self.psi, self.phi, self.dimension)

    @property
    def arrival_tolerance(self) -> float:
        return max(MIN_ARRIVAL_TOLERANCE, self.radius / 2)

    @property
    def goal_distance(self) -> float:
        return norm(self.goal - self.position)

    @property
    def is_active(self) -> bool:
        return self.status is AgentStatus.ACTIVE

    def observable(self) -> ObservableState:
        return ObservableState(
            id=self.id, position=self.position, velocity=self.velocity, radius=self.radius
        )

    def replace(self, **changes: Any) -> AgentState:
        return dataclasses.replace(self, **changes)


# ─────────────────────────────────────────────────────────────────────────────
# World and Scenario Files
# ─────────────────────────────────────────────────────────────────────────────


class WorldConfig(BaseModel):
    """Axis-aligned box centered on the origin plus episode timing."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    dimension: Literal[2, 3] = 2
    bounds: tuple[float, ...]
    dt: float = Field(default=EVAL_DT, gt=0)
    t_max: float = Field(default=DEFAULT_T_MAX, gt=0)
    neighbor_radius: float = Field(default=DEFAULT_NEIGHBOR_RADIUS, gt=0)
    v_max_factor: float = Field(default=1.0, gt=0)

    @model_validator(mode="before")
    @classmethod
    def _default_bounds(cls, data: Any) -> Any:
        if isinstance(data, dict) and data.get("bounds") is None:
            dimension = data.get("dimension", 2)
            bounds = DEFAULT_BOUNDS_3D if dimension == 3 else DEFAULT_BOUNDS_2D
            data = {**data, "bounds": bounds}
        return data

    @model_validator(mode="after")
    def _check_consistency(self) -> Self:
        if len(self.bounds) != self.dimension:
            raise ValueError(
                f"bounds has {len(self.bounds)} extents for a {self.dimension}D world"
            )
        if any(not extent > 0 for extent in self.bounds):
            raise ValueError(f"bounds extents must be positive, got {self.bounds}")
        if self.t_max < self.dt:
            raise ValueError(f"t_max ({self.t_max}) must be at least dt ({self.dt})")
        return self

    @property
    def half_extents(self) -> Vector:
        return np.array(self.bounds) / 2

    @property
    def max_steps(self) -> int:
        return math.ceil(self.t_max / self.dt - 1e-9)

    def contains(self, point: Vector, margin: float = 0.0) -> bool:
        return bool(np.all(np.abs(point) <= self.half_extents - margin + 1e-12))

    def with_dt(self, dt: float) -> WorldConfig:
        return WorldConfig.model_validate({**self.model_dump(), "dt": dt})


class AgentSpec(BaseModel):
    """Initial conditions of one agent as stored in a scenario file."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    id: int = Field(ge=0)
    position: tuple[float, ...]
    goal: tuple[float, ...]
    radius: float = Field(gt=0)
    v_pref: float = Field(gt=0)
    # None means "facing the goal"
    psi: float | None = None
    phi: float | None = None

    def to_state(self, v_max_factor: float = 1.0) -> AgentState:
        position = as_vector(self.position)
        goal = as_vector(self.goal, position.size)
        psi, phi = self.psi, self.phi
        if psi is None or (phi is None and position.size == 3):
            to_goal = goal - position
            facing = heading_angles(to_goal) if norm(to_goal) > 0 else (0.0, math.pi / 2)
            psi = facing[0] if psi is None else psi
            phi = facing[1] if phi is None else phi
        return AgentState(
            id=self.id,
            position=position,
            velocity=np.zeros(position.size),
            radius=self.radius,
            goal=goal,
            v_pref=self.v_pref,
            psi=psi,
            phi=math.pi / 2 if phi is None else phi,
            v_max_factor=v_max_factor,
        )


class Scenario(BaseModel):
    """A seeded, replayable episode definition."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: Literal["densenav.scenario"] = "densenav.scenario"
    version: Literal[1] = 1
    label: str = "scenario"
    seed: int = Field(default=0, ge=0, lt=2**64)
    world: WorldConfig
    agents: tuple[AgentSpec, ...] = Field(min_length=1)

    @model_validator(mode="after")
    def _check_agents(self) -> Self:
        ids = [agent.id for agent in self.agents]
        if len(set(ids)) != len(ids):
            raise ValueError(f"Agent ids must be unique, got {ids}")

        states = [agent.to_state() for agent in self.agents]
        for state in states:
            if state.dimension != self.world.dimension:
                raise ValueError(
                    f"Agent {state.id} is {state.dimension}D in a "
                    f"{self.world.dimension}D world"
                )
            if not self.world.contains(state.position, margin=state.radius):
                raise ValueError(f"Agent {state.id} starts outside the world bounds")
            if not self.world.contains(state.goal):
                raise ValueError(f"Agent {state.id} has a goal outside the world bounds")

        for i, a in enumerate(states):
            for b in states[i + 1 :]:
                if surface_distance(a, b) <= 0:
                    raise ValueError(f"Agents {a.id} and {b.id} overlap or touch at the start")
        return self

    @property
    def agent_count(self) -> int:
        return len(self.agents)

    def initial_states(self) -> list[AgentState]:
        return [agent.to_state(self.world.v_max_factor) for agent in self.agents]

    def to_json(self) -> bytes:
        return orjson.dumps(self.model_dump(mode="json"), option=orjson.OPT_INDENT_2)

    @classmethod
    def from_json(cls, data: bytes | str) -> Scenario:
        return cls.model_validate(orjson.loads(data))

    def save(self, path: Path) -> None:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(self.to_json() + b"\n")

    @classmethod
    def load(cls, path: Path) -> Scenario:
        return cls.from_json(path.read_bytes())
