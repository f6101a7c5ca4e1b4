"""Force-based motion planner.

Each agent is a double integrator driven by a navigational feedback toward its
goal plus a short-range repulsion that only switches on inside an activation
radius. The activation radius is chosen so that the repulsive work done from
the radius down to contact equals the kinetic energy at v_pref, which is what
lets an agent moving at v_pref stop before touching a neighbor.
"""

from __future__ import annotations

import math
from typing import TYPE_CHECKING

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from .constants import (
    DEFAULT_C1,
    DEFAULT_C2,
    DEFAULT_RHO,
    DETOUR_SPEED_FRACTION,
    HEADING_CAP,
    SPEED_TOLERANCE,
    STEP_GUARD_MARGIN,
)
from .env import Action
from .geometry import (
    DimensionMismatchError,
    clamp,
    heading_angles,
    heading_vector,
    norm,
    normalize_angle,
    surface_distance,
)
from .utils.hashing import pair_seed

if TYPE_CHECKING:
    from collections.abc import Sequence

    import numpy.typing as npt

    from .models import AgentState, ObservableState

    Vector = npt.NDArray[np.float64]

_PROGRESS_EPSILON = 1e-9
_CLOSING_EPSILON = 1e-9
_UP = np.array([0.0, 0.0, 1.0])
_EAST = np.array([1.0, 0.0, 0.0])


class FmpConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    rho: float = Field(default=DEFAULT_RHO, gt=0)
    c1: float = Field(default=DEFAULT_C1, gt=0)
    c2: float = Field(default=DEFAULT_C2, gt=0)


def r_fmp(v_pref: float, rho: float) -> float:
    """Activation radius cbrt(3 v_pref² / (2 rho))."""
    if not v_pref > 0:
        raise ValueError(f"v_pref must be positive, got {v_pref}")
    if not rho > 0:
        raise ValueError(f"rho must be positive, got {rho}")
    return math.cbrt(3 * v_pref**2 / (2 * rho))


def separation_direction(agent_id: int, other_id: int, dimension: int) -> Vector:
    """Deterministic unit vector for agents whose centers coincide.

    The pair shares one random direction and each side gets its opposite.
    """
    rng = np.random.default_rng(pair_seed(agent_id, other_id))
    direction = rng.standard_normal(dimension)
    direction /= norm(direction)
    return direction if agent_id < other_id else -direction


def navigational_force(agent: AgentState, c1: float, c2: float) -> Vector:
    return -c1 * (agent.position - agent.goal) - c2 * agent.velocity


def repulsive_force(
    agent: AgentState, neighbors: Sequence[ObservableState], rho: float
) -> Vector:
    """Sum of rho (r_fmp - d)² pushes away from every neighbor closer than r_fmp.

    Contributions are summed in id order so any permutation of neighbors
    gives the same bits.
    """
    radius = r_fmp(agent.v_pref, rho)
    contributions: list[Vector] = []
    for other in sorted(neighbors, key=lambda n: n.id):
        if other.position.shape != agent.position.shape:
            raise DimensionMismatchError(
                f"Neighbor {other.id} is {other.position.size}D, agent {agent.id} "
                f"is {agent.dimension}D"
            )
        gap = surface_distance(agent, other)
        if gap >= radius:
            continue
        offset = agent.position - other.position
        distance = norm(offset)
        if distance > 1e-12:
            direction = offset / distance
        else:
            direction = separation_direction(agent.id, other.id, agent.dimension)
        contributions.append(rho * (radius - gap) ** 2 * direction)

    if not contributions:
        return np.zeros(agent.dimension)
    return np.sum(np.stack(contributions), axis=0)


def fmp_control(
    agent: AgentState,
    neighbors: Sequence[ObservableState],
    config: FmpConfig,
    *,
    repulsion: bool = True,
) -> Vector:
    """Acceleration command; zero while at v_max and still pushing forward."""
    u = navigational_force(agent, config.c1, config.c2)
    if repulsion:
        u = u + repulsive_force(agent, neighbors, config.rho)
    at_speed_limit = norm(agent.velocity) >= agent.v_max - SPEED_TOLERANCE
    if at_speed_limit and float(agent.velocity @ u) > 0:
        return np.zeros(agent.dimension)
    return u


def _candidate_heading(agent: AgentState, dpsi: float, dphi: float) -> Vector:
    psi = normalize_angle(agent.psi + dpsi)
    phi = agent.phi if agent.dimension == 2 else clamp(agent.phi + dphi, 0.0, math.pi)
    return heading_vector(psi, phi, agent.dimension)


def _guard(
    agent: AgentState,
    heading: Vector,
    neighbors: Sequence[ObservableState],
    dt: float,
) -> tuple[float, ObservableState | None]:
    limit = math.inf
    binding: ObservableState | None = None
    for other in neighbors:
        offset = other.position - agent.position
        distance = norm(offset)
        if distance <= 1e-12:
            return 0.0, other
        closing = float(heading @ offset) / distance
        # headings square to the neighbor round to a tiny closing rate either way
        if closing <= _CLOSING_EPSILON:
            continue
        gap = distance - (agent.radius + other.radius)
        allowance = max(0.0, gap / 2 - STEP_GUARD_MARGIN)
        bound = allowance / (dt * closing)
        if bound < limit:
            limit, binding = bound, other
    return limit, binding


def step_guard_speed(
    agent: AgentState,
    heading: Vector,
    neighbors: Sequence[ObservableState],
    dt: float,
) -> float:
    """Largest speed along heading that closes on no neighbor by more than half the gap."""
    return _guard(agent, heading, neighbors, dt)[0]


def tangent_direction(desired: Vector, toward: Vector) -> Vector:
    """Unit direction across ``toward`` on the side ``desired`` leans to.

    When desired points straight at the neighbor the agent passes on its right.
    """
    side = desired - float(desired @ toward) * toward
    length = norm(side)
    if length > 1e-9:
        return side / length
    if toward.size == 2:
        return np.array([toward[1], -toward[0]])
    right = np.cross(toward, _UP)
    if norm(right) <= 1e-9:
        right = np.cross(toward, _EAST)
    return right / norm(right)


def _turn_toward(agent: AgentState, direction: Vector) -> tuple[float, float]:
    psi_target, phi_target = heading_angles(direction)
    dpsi = clamp(normalize_angle(psi_target - agent.psi), -HEADING_CAP, HEADING_CAP)
    dphi = 0.0
    if agent.dimension == 3:
        dphi = clamp(phi_target - agent.phi, -HEADING_CAP, HEADING_CAP)
    return dpsi, dphi


def _detour(
    agent: AgentState,
    desired: Vector,
    neighbors: Sequence[ObservableState],
    dt: float,
    speed: float,
) -> Action | None:
    """Slide along the neighbor that blocks the desired direction.

    The side nearer the desired direction is tried first, then the other one.
    Returns None when neither side is open.
    """
    guard, blocker = _guard(agent, desired, neighbors, dt)
    if blocker is None or guard >= speed:
        return None
    offset = blocker.position - agent.position
    distance = norm(offset)
    if distance > 1e-12:
        toward = offset / distance
    else:
        toward = -separation_direction(agent.id, blocker.id, agent.dimension)

    first = tangent_direction(desired, toward)
    for side in (first, -first):
        if step_guard_speed(agent, side, neighbors, dt) < DETOUR_SPEED_FRACTION * speed:
            continue
        dpsi, dphi = _turn_toward(agent, side)
        heading = _candidate_heading(agent, dpsi, dphi)
        return Action(
            speed=min(speed, step_guard_speed(agent, heading, neighbors, dt)),
            dpsi=dpsi,
            dphi=dphi,
        )
    return None


def fmp_action(
    agent: AgentState,
    neighbors: Sequence[ObservableState],
    config: FmpConfig,
    dt: float,
    *,
    repulsion: bool = True,
) -> Action:
    """Turn the acceleration command into a speed and a capped heading change.

    With repulsion on, the step guard keeps the agent from closing more than
    half of any gap in one step. When the neighbor ahead holds progress below
    half the speed, the agent slides along it instead of creeping closer. If
    both sides are closed and no heading within the cap makes progress, it
    yields to its right.
    """
    u = fmp_control(agent, neighbors, config, repulsion=repulsion)
    v_next = agent.velocity + dt * u
    magnitude = norm(v_next)
    if magnitude > agent.v_max:
        v_next = v_next * (agent.v_max / magnitude)
        magnitude = agent.v_max
    speed = min(magnitude, agent.v_pref)
    if speed <= 1e-12:
        return Action(speed=0.0)

    dpsi, dphi = _turn_toward(agent, v_next)
    if not repulsion:
        return Action(speed=speed, dpsi=dpsi, dphi=dphi)

    desired = v_next / magnitude
    half = HEADING_CAP / 2
    offsets = [(0.0, 0.0), (-half, 0.0), (-HEADING_CAP, 0.0), (half, 0.0), (HEADING_CAP, 0.0)]
    if agent.dimension == 3:
        offsets += [(0.0, -HEADING_CAP), (0.0, HEADING_CAP)]

    best: tuple[float, float, float, float] | None = None
    seen: set[tuple[float, float]] = set()
    for off_psi, off_phi in offsets:
        cand_psi = clamp(dpsi + off_psi, -HEADING_CAP, HEADING_CAP)
        cand_phi = clamp(dphi + off_phi, -HEADING_CAP, HEADING_CAP) if agent.dimension == 3 else 0.0
        if (cand_psi, cand_phi) in seen:
            continue
        seen.add((cand_psi, cand_phi))
        heading = _candidate_heading(agent, cand_psi, cand_phi)
        cand_speed = min(speed, step_guard_speed(agent, heading, neighbors, dt))
        progress = cand_speed * float(heading @ desired)
        if best is None or progress > best[0]:
            best = (progress, cand_speed, cand_psi, cand_phi)

    assert best is not None
    progress, cand_speed, cand_psi, cand_phi = best
    if progress < DETOUR_SPEED_FRACTION * speed:
        detour = _detour(agent, desired, neighbors, dt, speed)
        if detour is not None:
            return detour
    if progress > _PROGRESS_EPSILON:
        return Action(speed=cand_speed, dpsi=cand_psi, dphi=cand_phi)

    if float(_candidate_heading(agent, dpsi, dphi) @ desired) > 0:
        # blocked ahead: yield right
        heading = _candidate_heading(agent, -HEADING_CAP, 0.0)
        guard = step_guard_speed(agent, heading, neighbors, dt)
        return Action(speed=min(speed, guard), dpsi=-HEADING_CAP, dphi=0.0)
    # wants to reverse: turn on the spot
    return Action(speed=0.0, dpsi=dpsi, dphi=dphi)
