"""Random and canonical scenario builders."""

from __future__ import annotations

import math
from typing import TYPE_CHECKING

import numpy as np

from ..constants import (
    MAX_PLACEMENT_ATTEMPTS,
    PLACEMENT_MARGIN,
    RADIUS_RANGE,
    V_PREF_RANGE,
)
from ..logging_config import get_logger
from ..models import AgentSpec, Scenario

if TYPE_CHECKING:
    import numpy.typing as npt

    from ..models import WorldConfig

logger = get_logger(__name__)


class ScenarioCapacityError(RuntimeError):
    """The world is too crowded to place the requested agents."""

    def __init__(self, agent_count: int, agent_index: int) -> None:
        super().__init__(
            f"Could not place agent {agent_index} of {agent_count} after "
            f"{MAX_PLACEMENT_ATTEMPTS} attempts; the world is too small for "
            f"{agent_count} agents"
        )
        self.agent_count = agent_count


def _place(
    rng: np.random.Generator,
    half_extents: npt.NDArray[np.float64],
    radius: float,
    taken: list[tuple[npt.NDArray[np.float64], float]],
    agent_count: int,
    agent_index: int,
) -> npt.NDArray[np.float64]:
    """Uniform point inside the shrunken box, clear of every taken (point, radius)."""
    low, high = -half_extents + radius, half_extents - radius
    if np.any(high < low):
        raise ScenarioCapacityError(agent_count, agent_index)
    if taken:
        centers = np.stack([center for center, _ in taken])
        clearance = np.array([r for _, r in taken]) + radius + PLACEMENT_MARGIN
    for _ in range(MAX_PLACEMENT_ATTEMPTS):
        point = rng.uniform(low, high)
        if not taken or np.all(np.linalg.norm(centers - point, axis=1) > clearance):
            return point
    raise ScenarioCapacityError(agent_count, agent_index)


def sample_scenario(
    rng: np.random.Generator,
    agent_count: int,
    world: WorldConfig,
    *,
    seed: int = 0,
    label: str = "random",
) -> Scenario:
    """Draw one scenario from rng; seed is only recorded in the result."""
    if agent_count < 1:
        raise ValueError(f"agent_count must be at least 1, got {agent_count}")
    half = world.half_extents
    radii = rng.uniform(*RADIUS_RANGE, size=agent_count)
    speeds = rng.uniform(*V_PREF_RANGE, size=agent_count)

    starts: list[tuple[npt.NDArray[np.float64], float]] = []
    goals: list[tuple[npt.NDArray[np.float64], float]] = []
    for i in range(agent_count):
        radius = float(radii[i])
        starts.append((_place(rng, half, radius, starts, agent_count, i), radius))
        goals.append((_place(rng, half, radius, goals, agent_count, i), radius))

    agents = tuple(
        AgentSpec(
            id=i,
            position=tuple(start.tolist()),
            goal=tuple(goal.tolist()),
            radius=radius,
            v_pref=float(speeds[i]),
        )
        for i, ((start, radius), (goal, _)) in enumerate(zip(starts, goals, strict=True))
    )
    return Scenario(label=label, seed=seed, world=world, agents=agents)


def generate_scenarios(
    n: int, agent_count: int, world: WorldConfig, seed: int
) -> list[Scenario]:
    """n independent scenarios; scenario i draws from the i-th child of seed."""
    if n < 1:
        raise ValueError(f"n must be at least 1, got {n}")
    children = np.random.SeedSequence(seed).spawn(n)
    scenarios = []
    for i, child in enumerate(children):
        scenario_seed = int(child.generate_state(1, np.uint64)[0])
        scenarios.append(
            sample_scenario(
                np.random.default_rng(scenario_seed),
                agent_count,
                world,
                seed=scenario_seed,
                label=f"random-{agent_count}a-{i:03d}",
            )
        )
    logger.debug("Generated scenarios", n=n, agent_count=agent_count, seed=seed)
    return scenarios


def antipodal_circle(
    agent_count: int,
    world: WorldConfig,
    *,
    circle_radius: float = 3.0,
    radius: float = 0.3,
    v_pref: float = 1.0,
) -> Scenario:
    """Agents evenly spaced on a horizontal circle, each heading for the opposite point."""
    agents = []
    for i in range(agent_count):
        angle = math.tau * i / agent_count
        point = [circle_radius * math.cos(angle), circle_radius * math.sin(angle)]
        tail = [0.0] if world.dimension == 3 else []
        agents.append(
            AgentSpec(
                id=i,
                position=(point[0], point[1], *tail),
                goal=(-point[0], -point[1], *tail),
                radius=radius,
                v_pref=v_pref,
            )
        )
    return Scenario(label=f"circle-{agent_count}a", world=world, agents=tuple(agents))


def symmetric_swap(
    world: WorldConfig,
    *,
    separation: float = 6.0,
    lateral_offset: float = 0.0,
    radius: float = 0.3,
    v_pref: float = 1.0,
) -> Scenario:
    """Two agents facing each other along x, trading places."""
    half = separation / 2
    tail = (0.0,) if world.dimension == 3 else ()
    a = AgentSpec(
        id=0,
        position=(-half, lateral_offset / 2, *tail),
        goal=(half, lateral_offset / 2, *tail),
        radius=radius,
        v_pref=v_pref,
    )
    b = AgentSpec(
        id=1,
        position=(half, -lateral_offset / 2, *tail),
        goal=(-half, -lateral_offset / 2, *tail),
        radius=radius,
        v_pref=v_pref,
    )
    return Scenario(label="swap", world=world, agents=(a, b))
