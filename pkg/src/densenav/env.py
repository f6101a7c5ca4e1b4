"""Seeded kinematic multi-agent environment.

Agents move with a unicycle-like model: each step picks a speed and a bounded
heading change, and the new velocity points along the new heading. Collisions
and arrivals are evaluated at step boundaries only.
"""

from __future__ import annotations

import math
from collections.abc import Mapping
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np

from .constants import (
    HEADING_CAP,
    MOVE_EPSILON,
    NEIGHBOR_SLOTS,
    SPEED_TOLERANCE,
)
from .geometry import (
    clamp,
    goal_frame,
    heading_vector,
    norm,
    normalize_angle,
    pairwise_surface_distances,
    surface_distance,
)
from .logging_config import get_logger
from .models import (
    AgentOutcome,
    AgentState,
    AgentStatus,
    ObservableState,
    ScenarioOutcome,
)
from .trajectory import AgentRecord, GoalMarker, StepRecord, TrajectoryHeader

if TYPE_CHECKING:
    import numpy.typing as npt

    from .models import Scenario, WorldConfig

    Vector = npt.NDArray[np.float64]

logger = get_logger(__name__)

_ANGLE_TOLERANCE = 1e-12


@dataclass(frozen=True, slots=True)
class Action:
    """Speed and heading change for one step."""

    speed: float
    dpsi: float = 0.0
    dphi: float = 0.0

    def __post_init__(self) -> None:
        if not all(math.isfinite(x) for x in (self.speed, self.dpsi, self.dphi)):
            raise ValueError(f"Action has non-finite components: {self}")
        if self.speed < 0:
            raise ValueError(f"Action speed must be non-negative, got {self.speed}")
        for name, value in (("dpsi", self.dpsi), ("dphi", self.dphi)):
            if abs(value) > HEADING_CAP + _ANGLE_TOLERANCE:
                raise ValueError(f"Action {name}={value} exceeds the heading cap")


# ─────────────────────────────────────────────────────────────────────────────
# Episode State
# ─────────────────────────────────────────────────────────────────────────────


@dataclass
class EpisodeState:
    world: WorldConfig
    agents: list[AgentState]
    label: str = "episode"
    seed: int = 0
    step_index: int = 0
    stuck_counters: dict[int, int] = field(default_factory=dict)
    arrival_times: dict[int, float] = field(default_factory=dict)
    # goal distance where each agent's hybrid stuck fallback engaged
    stuck_escapes: dict[int, float] = field(default_factory=dict)
    records: list[StepRecord] = field(default_factory=list)

    def __post_init__(self) -> None:
        for agent in self.agents:
            if agent.dimension != self.world.dimension:
                raise ValueError(
                    f"Agent {agent.id} is {agent.dimension}D in a "
                    f"{self.world.dimension}D world"
                )
            self.stuck_counters.setdefault(agent.id, 0)
        if not self.records:
            self.records.append(_record(self, None))

    @classmethod
    def from_scenario(cls, scenario: Scenario, dt: float | None = None) -> EpisodeState:
        world = scenario.world if dt is None else scenario.world.with_dt(dt)
        return cls(
            world=world,
            agents=scenario.initial_states(),
            label=scenario.label,
            seed=scenario.seed,
        )

    @property
    def t(self) -> float:
        return self.step_index * self.world.dt

    def agent(self, agent_id: int) -> AgentState:
        for agent in self.agents:
            if agent.id == agent_id:
                return agent
        raise KeyError(f"Unknown agent id: {agent_id}")

    def active_ids(self) -> list[int]:
        return [agent.id for agent in self.agents if agent.is_active]

    @property
    def last_record(self) -> StepRecord:
        return self.records[-1]

    def trajectory_header(self, planner: str | None = None) -> TrajectoryHeader:
        return TrajectoryHeader(
            label=self.label,
            seed=self.seed,
            planner=planner,
            dimension=self.world.dimension,
            bounds=self.world.bounds,
            dt=self.world.dt,
            agents=tuple(
                GoalMarker(id=a.id, radius=a.radius, goal=tuple(a.goal.tolist()))
                for a in self.agents
            ),
        )


def _live_d_min(agents: list[AgentState], live: npt.NDArray[np.bool_]) -> Vector:
    """Per-agent smallest surface distance to non-collided others."""
    positions = np.stack([agent.position for agent in agents])
    radii = np.array([agent.radius for agent in agents])
    gaps = pairwise_surface_distances(positions, radii)
    gaps[:, ~live] = np.inf
    return np.min(gaps, axis=1) if len(agents) > 1 else np.full(1, np.inf)


def _record(
    state: EpisodeState,
    modes: Mapping[int, str] | None,
    live: npt.NDArray[np.bool_] | None = None,
) -> StepRecord:
    """Snapshot of every agent.

    d_min ignores agents that were already collided before this step, so a
    pair that collides now still sees each other.
    """
    if live is None:
        live = np.array([a.status is not AgentStatus.COLLIDED for a in state.agents])
    d_mins = _live_d_min(state.agents, live)
    return StepRecord(
        step=state.step_index,
        t=state.t,
        agents=tuple(
            AgentRecord(
                id=agent.id,
                position=tuple(agent.position.tolist()),
                velocity=tuple(agent.velocity.tolist()),
                psi=agent.psi,
                phi=agent.phi,
                status=agent.status,
                d_min=float(d_min),
                mode=None if modes is None else modes.get(agent.id),
            )
            for agent, d_min in zip(state.agents, d_mins, strict=True)
        ),
    )


def _check_action_keys(state: EpisodeState, actions: Mapping[int, Action]) -> None:
    known = {agent.id for agent in state.agents}
    active = set(state.active_ids())
    if unknown := set(actions) - known:
        raise ValueError(f"Actions given for unknown agents: {sorted(unknown)}")
    if inactive := set(actions) - active:
        raise ValueError(f"Actions given for non-active agents: {sorted(inactive)}")
    if missing := active - set(actions):
        raise ValueError(f"Missing actions for active agents: {sorted(missing)}")


def _apply(agent: AgentState, action: Action, dt: float) -> AgentState:
    if action.speed > agent.v_pref + SPEED_TOLERANCE:
        raise ValueError(
            f"Agent {agent.id}: speed {action.speed} exceeds v_pref {agent.v_pref}"
        )
    if agent.dimension == 2 and action.dphi != 0:
        raise ValueError(f"Agent {agent.id}: dphi is only meaningful in 3D")

    psi = normalize_angle(agent.psi + action.dpsi)
    phi = agent.phi if agent.dimension == 2 else clamp(agent.phi + action.dphi, 0.0, math.pi)
    speed = min(action.speed, agent.v_pref)
    velocity = speed * heading_vector(psi, phi, agent.dimension)
    return agent.replace(
        position=agent.position + dt * velocity, velocity=velocity, psi=psi, phi=phi
    )


def step(
    state: EpisodeState,
    actions: Mapping[int, Action],
    modes: Mapping[int, str] | None = None,
) -> EpisodeState:
    """Advance every active agent by one dt and append a step record.

    Collision is resolved before arrival: an agent that reaches its goal while
    overlapping another is collided. Both agents of an overlapping pair are
    marked, including an arrived agent that is struck.
    """
    _check_action_keys(state, actions)
    dt = state.world.dt
    previous = state.agents

    moved: list[AgentState] = []
    for agent in previous:
        if not agent.is_active:
            moved.append(agent)
            continue
        after = _apply(agent, actions[agent.id], dt)
        displacement = norm(after.position - agent.position)
        if displacement > MOVE_EPSILON:
            state.stuck_counters[agent.id] = 0
        else:
            state.stuck_counters[agent.id] += 1
        moved.append(after)

    live = np.array([a.status is not AgentStatus.COLLIDED for a in previous])
    was_active = np.array([a.is_active for a in previous])
    if len(moved) > 1:
        positions = np.stack([a.position for a in moved])
        radii = np.array([a.radius for a in moved])
        gaps = pairwise_surface_distances(positions, radii)
        checked = np.outer(live, live) & (was_active[:, None] | was_active[None, :])
        hit = np.any((gaps < 0) & checked, axis=1)
    else:
        hit = np.zeros(len(moved), dtype=bool)

    state.step_index += 1
    zero = np.zeros(state.world.dimension)
    updated: list[AgentState] = []
    for agent, collided in zip(moved, hit, strict=True):
        if collided:
            logger.debug("Collision", agent_id=agent.id, t=state.t, label=state.label)
            updated.append(agent.replace(status=AgentStatus.COLLIDED, velocity=zero))
        elif agent.is_active and agent.goal_distance <= agent.arrival_tolerance:
            state.arrival_times[agent.id] = state.t
            updated.append(agent.replace(status=AgentStatus.ARRIVED, velocity=zero))
        else:
            updated.append(agent)
    state.agents = updated

    state.records.append(_record(state, modes, live))
    return state


# ─────────────────────────────────────────────────────────────────────────────
# Observation
# ─────────────────────────────────────────────────────────────────────────────


def observation_size(dimension: int) -> int:
    """3 + D ego features plus K neighbor blocks of 2D + 4 features."""
    return 3 + dimension + NEIGHBOR_SLOTS * (2 * dimension + 4)


def neighbors_of(state: EpisodeState, agent_id: int) -> list[ObservableState]:
    """Other agents within neighbor_radius (center distance), nearest first.

    Every status counts: arrived and collided agents are obstacles too.
    Ties on surface distance go to the lower id.
    """
    me = state.agent(agent_id)
    found = [
        (surface_distance(me, other), other.id, other.observable())
        for other in state.agents
        if other.id != agent_id
        and norm(other.position - me.position) <= state.world.neighbor_radius
    ]
    found.sort(key=lambda item: (item[0], item[1]))
    return [observable for _, _, observable in found]


def observe(state: EpisodeState, agent_id: int) -> Vector:
    """Fixed-length, goal-frame observation for one agent."""
    me = state.agent(agent_id)
    dim = me.dimension
    frame = goal_frame(me.position, me.goal, me.heading)

    ego = np.concatenate(
        [[me.goal_distance, me.v_pref, me.radius], frame @ me.heading]
    )
    block = 2 * dim + 4
    slots = np.zeros(NEIGHBOR_SLOTS * block)
    for k, other in enumerate(neighbors_of(state, agent_id)[:NEIGHBOR_SLOTS]):
        slots[k * block : (k + 1) * block] = np.concatenate(
            [
                frame @ (other.position - me.position),
                frame @ (other.velocity - me.velocity),
                [
                    other.radius,
                    me.radius + other.radius,
                    surface_distance(me, other),
                    1.0,
                ],
            ]
        )
    return np.concatenate([ego, slots])


# ─────────────────────────────────────────────────────────────────────────────
# Termination
# ─────────────────────────────────────────────────────────────────────────────


@dataclass(frozen=True, slots=True)
class TerminationReport:
    done: bool
    agent_outcomes: dict[int, AgentOutcome]
    scenario_outcome: ScenarioOutcome | None


def episode_terminated(state: EpisodeState) -> TerminationReport:
    """Done when no agent is active or t_max is reached.

    A scenario with any collision is a collision even if others got stuck.
    """
    timed_out = state.t >= state.world.t_max - 1e-9
    done = timed_out or not state.active_ids()

    outcomes: dict[int, AgentOutcome] = {}
    for agent in state.agents:
        if agent.status is AgentStatus.ARRIVED:
            outcomes[agent.id] = AgentOutcome.SUCCESS
        elif agent.status is AgentStatus.COLLIDED:
            outcomes[agent.id] = AgentOutcome.COLLISION
        else:
            outcomes[agent.id] = AgentOutcome.STUCK if done else AgentOutcome.RUNNING

    scenario_outcome: ScenarioOutcome | None = None
    if done:
        values = set(outcomes.values())
        if AgentOutcome.COLLISION in values:
            scenario_outcome = ScenarioOutcome.COLLISION
        elif AgentOutcome.STUCK in values:
            scenario_outcome = ScenarioOutcome.STUCK
        else:
            scenario_outcome = ScenarioOutcome.SUCCESS
    return TerminationReport(
        done=done, agent_outcomes=outcomes, scenario_outcome=scenario_outcome
    )
