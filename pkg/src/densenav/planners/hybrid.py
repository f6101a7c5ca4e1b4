from __future__ import annotations

from typing import TYPE_CHECKING

from ..env import neighbors_of, observe
from ..hybrid import HybridConfig, hybrid_action
from ..models import SwitchReason
from ..policy import ActionSpace
from .base import Planner, PlannerStep

if TYPE_CHECKING:
    from ..env import EpisodeState
    from ..policy import PolicyModel


class HybridPlanner(Planner):
    """Learned policy with force-planner fallback; modes are tagged by reason."""

    PLANNER_NAME = "hybrid"

    def __init__(self, model: PolicyModel, config: HybridConfig | None = None) -> None:
        self.model = model
        self.space = ActionSpace.for_dimension(model.dimension)
        self.config = config or HybridConfig()

    def plan(self, state: EpisodeState) -> PlannerStep:
        """Pick every active agent's controller.

        Records on the state where each stuck fallback engaged and forgets it
        once the policy is back in charge.
        """
        step = PlannerStep(actions={}, modes={}, reasons={})
        for agent in state.agents:
            if not agent.is_active:
                continue
            action, decision = hybrid_action(
                agent,
                neighbors_of(state, agent.id),
                state.stuck_counters[agent.id],
                observe(state, agent.id),
                self.model,
                self.space,
                self.config,
                state.world.dt,
                escape_from=state.stuck_escapes.get(agent.id),
            )
            if decision.reason is SwitchReason.STUCK:
                state.stuck_escapes.setdefault(agent.id, agent.goal_distance)
            elif decision.reason is SwitchReason.NORMAL:
                state.stuck_escapes.pop(agent.id, None)
            step.actions[agent.id] = action
            step.modes[agent.id] = decision.reason.value
            step.reasons[agent.id] = decision.reason
        return step
