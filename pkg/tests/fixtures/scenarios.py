import math
from collections.abc import Callable
from typing import Any

import pytest

from densenav.bench.scenarios import antipodal_circle, symmetric_swap
from densenav.models import AgentSpec, AgentState, Scenario, WorldConfig


@pytest.fixture
def world_2d() -> WorldConfig:
    return WorldConfig(dimension=2, bounds=(8.0, 8.0), dt=0.1, t_max=50.0)


@pytest.fixture
def world_3d() -> WorldConfig:
    return WorldConfig(dimension=3, bounds=(8.0, 8.0, 4.0), dt=0.1, t_max=50.0)


@pytest.fixture
def make_agent() -> Callable[..., AgentState]:
    """Agent factory with sensible defaults; pass only what a test cares about."""

    def _make(
        agent_id: int = 0,
        position: tuple[float, ...] = (0.0, 0.0),
        goal: tuple[float, ...] | None = None,
        *,
        velocity: tuple[float, ...] | None = None,
        radius: float = 0.3,
        v_pref: float = 1.0,
        psi: float = 0.0,
        phi: float = math.pi / 2,
        **changes: Any,
    ) -> AgentState:
        dim = len(position)
        return AgentState(
            id=agent_id,
            position=position,
            velocity=velocity if velocity is not None else (0.0,) * dim,
            radius=radius,
            goal=goal if goal is not None else position,
            v_pref=v_pref,
            psi=psi,
            phi=phi,
            **changes,
        )

    return _make


@pytest.fixture
def make_scenario() -> Callable[..., Scenario]:
    def _make(world: WorldConfig, *agents: dict[str, Any], label: str = "test") -> Scenario:
        specs = tuple(
            AgentSpec(id=agent.pop("id", i), **agent) for i, agent in enumerate(map(dict, agents))
        )
        return Scenario(label=label, world=world, agents=specs)

    return _make


@pytest.fixture
def swap_scenario(world_2d: WorldConfig) -> Scenario:
    return symmetric_swap(world_2d)


@pytest.fixture
def circle_scenario(world_2d: WorldConfig) -> Scenario:
    return antipodal_circle(4, world_2d)


@pytest.fixture
def lone_agent_scenario(world_2d: WorldConfig) -> Scenario:
    return Scenario(
        label="lone",
        world=world_2d,
        agents=(AgentSpec(id=0, position=(-3.0, 0.0), goal=(3.0, 0.0), radius=0.3, v_pref=1.0),),
    )
