from __future__ import annotations

from typing import TYPE_CHECKING

from ..env import observe
from ..policy import ActionSpace, forward, greedy_action
from .base import Planner, PlannerStep

if TYPE_CHECKING:
    from ..env import EpisodeState
    from ..policy import PolicyModel


class PolicyPlanner(Planner):
    """Greedy decoding of the learned policy for every agent."""

    PLANNER_NAME = "policy"

    def __init__(self, model: PolicyModel) -> None:
        self.model = model
        self.space = ActionSpace.for_dimension(model.dimension)

    def plan(self, state: EpisodeState) -> PlannerStep:
        actions = {}
        for agent in state.agents:
            if not agent.is_active:
                continue
            probs, _ = forward(self.model, observe(state, agent.id))
            actions[agent.id] = self.space.to_action(greedy_action(probs), agent.v_pref)
        return PlannerStep(actions=actions, modes=dict.fromkeys(actions, self.PLANNER_NAME))
