"""Per-agent switching between the learned policy and the force planner.

The force planner takes over when a neighbor is inside the activation radius
(high risk), when there is nobody around (simple), or when the agent has not
moved for more than c_stuck steps (stuck). Otherwise the policy acts.

A stuck trigger keeps the force planner engaged until the agent has come
stuck_release metres closer to its goal than where the trigger fired.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

from pydantic import BaseModel, ConfigDict, Field

from .constants import DEFAULT_C_STUCK, DEFAULT_STUCK_RELEASE
from .fmp import FmpConfig, fmp_action, r_fmp
from .geometry import d_min
from .models import ControllerMode, SwitchReason
from .policy import forward, greedy_action

if TYPE_CHECKING:
    from collections.abc import Sequence

    import numpy as np
    import numpy.typing as npt

    from .env import Action
    from .models import AgentState, ObservableState
    from .policy import ActionSpace, PolicyModel


class HybridConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    # None disables the stuck trigger
    c_stuck: int | None = Field(default=DEFAULT_C_STUCK, ge=1)
    # 0 hands back to the policy after a single force-planner step
    stuck_release: float = Field(default=DEFAULT_STUCK_RELEASE, ge=0)
    fmp: FmpConfig = FmpConfig()


@dataclass(frozen=True, slots=True)
class ModeDecision:
    mode: ControllerMode
    reason: SwitchReason


def select_mode(
    agent: AgentState,
    neighbors: Sequence[ObservableState],
    stuck_counter: int,
    config: HybridConfig,
    *,
    escape_from: float | None = None,
) -> ModeDecision:
    """High risk beats simple beats stuck; every comparison is strict.

    escape_from is the goal distance at which an earlier stuck trigger fired;
    the agent stays stuck until it is stuck_release closer than that.
    """
    if d_min(agent, neighbors) < r_fmp(agent.v_pref, config.fmp.rho):
        return ModeDecision(ControllerMode.FMP, SwitchReason.HIGH_RISK)
    if not neighbors:
        return ModeDecision(ControllerMode.FMP, SwitchReason.SIMPLE)
    if config.c_stuck is not None:
        if stuck_counter > config.c_stuck:
            return ModeDecision(ControllerMode.FMP, SwitchReason.STUCK)
        escaping = escape_from is not None and (
            agent.goal_distance > escape_from - config.stuck_release
        )
        if escaping:
            return ModeDecision(ControllerMode.FMP, SwitchReason.STUCK)
    return ModeDecision(ControllerMode.POLICY, SwitchReason.NORMAL)


def hybrid_action(
    agent: AgentState,
    neighbors: Sequence[ObservableState],
    stuck_counter: int,
    observation: npt.NDArray[np.float64],
    model: PolicyModel,
    space: ActionSpace,
    config: HybridConfig,
    dt: float,
    *,
    escape_from: float | None = None,
) -> tuple[Action, ModeDecision]:
    """Action from whichever controller select_mode picks.

    Simple mode runs the force planner without repulsion since there is
    nothing to repel.
    """
    decision = select_mode(agent, neighbors, stuck_counter, config, escape_from=escape_from)
    if decision.mode is ControllerMode.FMP:
        repulsion = decision.reason is not SwitchReason.SIMPLE
        action = fmp_action(agent, neighbors, config.fmp, dt, repulsion=repulsion)
        return action, decision
    probs, _ = forward(model, observation)
    return space.to_action(greedy_action(probs), agent.v_pref), decision
