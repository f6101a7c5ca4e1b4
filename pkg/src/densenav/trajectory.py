"""Per-step trajectory records and their JSON-lines log format."""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Any, Literal

import orjson
from pydantic import BaseModel, ConfigDict

from .models import AgentStatus

if TYPE_CHECKING:
    from collections.abc import Iterable
    from pathlib import Path


@dataclass(frozen=True, slots=True)
class AgentRecord:
    id: int
    position: tuple[float, ...]
    velocity: tuple[float, ...]
    psi: float
    phi: float
    status: AgentStatus
    d_min: float
    mode: str | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "position": list(self.position),
            "velocity": list(self.velocity),
            "psi": self.psi,
            "phi": self.phi,
            "status": self.status.value,
            # JSON has no infinity; a lone agent has no nearest neighbor
            "d_min": self.d_min if self.d_min != float("inf") else None,
            "mode": self.mode,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> AgentRecord:
        d_min = data["d_min"]
        return cls(
            id=data["id"],
            position=tuple(data["position"]),
            velocity=tuple(data["velocity"]),
            psi=data["psi"],
            phi=data["phi"],
            status=AgentStatus(data["status"]),
            d_min=float("inf") if d_min is None else d_min,
            mode=data.get("mode"),
        )


@dataclass(frozen=True, slots=True)
class StepRecord:
    step: int
    t: float
    agents: tuple[AgentRecord, ...]

    def agent(self, agent_id: int) -> AgentRecord:
        for record in self.agents:
            if record.id == agent_id:
                return record
        raise KeyError(agent_id)

    def to_dict(self) -> dict[str, Any]:
        return {
            "step": self.step,
            "t": self.t,
            "agents": [record.to_dict() for record in self.agents],
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> StepRecord:
        return cls(
            step=data["step"],
            t=data["t"],
            agents=tuple(AgentRecord.from_dict(a) for a in data["agents"]),
        )


class GoalMarker(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    id: int
    radius: float
    goal: tuple[float, ...]


class TrajectoryHeader(BaseModel):
    """First line of a trajectory log."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: Literal["densenav.trajectory"] = "densenav.trajectory"
    version: Literal[1] = 1
    label: str
    seed: int
    planner: str | None = None
    dimension: Literal[2, 3]
    bounds: tuple[float, ...]
    dt: float
    # positions are checked at step boundaries only
    collision_check: Literal["sampled"] = "sampled"
    agents: tuple[GoalMarker, ...]


@dataclass(frozen=True, slots=True)
class TrajectoryLog:
    header: TrajectoryHeader
    records: list[StepRecord]


def write_trajectory(
    path: Path, header: TrajectoryHeader, records: Iterable[StepRecord]
) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("wb") as f:
        f.write(orjson.dumps(header.model_dump(mode="json")) + b"\n")
        for record in records:
            f.write(orjson.dumps(record.to_dict()) + b"\n")


def read_trajectory(path: Path) -> TrajectoryLog:
    lines = [line for line in path.read_bytes().splitlines() if line.strip()]
    if not lines:
        raise ValueError(f"Trajectory log is empty: {path}")
    header = TrajectoryHeader.model_validate(orjson.loads(lines[0]))
    records = [StepRecord.from_dict(orjson.loads(line)) for line in lines[1:]]
    return TrajectoryLog(header=header, records=records)
