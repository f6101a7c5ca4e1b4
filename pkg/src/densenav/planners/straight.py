from __future__ import annotations

from typing import TYPE_CHECKING

from ..constants import HEADING_CAP
from ..env import Action
from ..geometry import clamp, heading_angles, normalize_angle
from .base import Planner, PlannerStep

if TYPE_CHECKING:
    from ..env import EpisodeState
    from ..models import AgentState


def straight_line_action(agent: AgentState, dt: float) -> Action:
    """Turn toward the goal and drive at v_pref without overshooting it."""
    distance = agent.goal_distance
    if distance <= 1e-12:
        return Action(speed=0.0)
    psi, phi = heading_angles(agent.goal - agent.position)
    dpsi = clamp(normalize_angle(psi - agent.psi), -HEADING_CAP, HEADING_CAP)
    dphi = 0.0 if agent.dimension == 2 else clamp(phi - agent.phi, -HEADING_CAP, HEADING_CAP)
    return Action(speed=min(agent.v_pref, distance / dt), dpsi=dpsi, dphi=dphi)


class StraightLinePlanner(Planner):
    """Ignores every other agent; a reference for extra-time numbers."""

    PLANNER_NAME = "straight"

    def plan(self, state: EpisodeState) -> PlannerStep:
        actions = {
            agent.id: straight_line_action(agent, state.world.dt)
            for agent in state.agents
            if agent.is_active
        }
        return PlannerStep(actions=actions, modes=dict.fromkeys(actions, self.PLANNER_NAME))
