from __future__ import annotations

from typing import TYPE_CHECKING

from ..env import neighbors_of
from ..fmp import FmpConfig, fmp_action
from .base import Planner, PlannerStep

if TYPE_CHECKING:
    from ..env import EpisodeState


class FmpPlanner(Planner):
    PLANNER_NAME = "fmp"

    def __init__(self, config: FmpConfig | None = None) -> None:
        self.config = config or FmpConfig()

    def plan(self, state: EpisodeState) -> PlannerStep:
        actions = {
            agent.id: fmp_action(
                agent, neighbors_of(state, agent.id), self.config, state.world.dt
            )
            for agent in state.agents
            if agent.is_active
        }
        return PlannerStep(actions=actions, modes=dict.fromkeys(actions, self.PLANNER_NAME))
