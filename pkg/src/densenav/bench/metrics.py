"""Per-scenario outcomes and their aggregation into metric rows."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any

import numpy as np

from ..constants import EVAL_DT
from ..geometry import norm
from ..models import AgentOutcome, ScenarioOutcome, SwitchReason

if TYPE_CHECKING:
    from collections.abc import Sequence

    from ..models import AgentState, WorldConfig


def extra_time(agent: AgentState, t_goal: float | None, dt: float = EVAL_DT) -> float:
    """Arrival time beyond a straight run at v_pref, for an agent in its start state.

    Arriving inside the tolerance can beat the straight run by at most one
    step, so the result is floored at -dt.
    """
    if t_goal is None:
        raise ValueError(f"Agent {agent.id} did not reach its goal; no extra time")
    if t_goal < 0:
        raise ValueError(f"Arrival time must be non-negative, got {t_goal}")
    straight = norm(agent.goal - agent.position) / agent.v_pref
    return max(t_goal - straight, -dt)


@dataclass(frozen=True, slots=True)
class RunOutcome:
    """Result of running one scenario to termination."""

    label: str
    seed: int
    planner: str
    agent_count: int
    outcome: ScenarioOutcome
    agent_outcomes: dict[int, AgentOutcome]
    arrival_times: dict[int, float]
    steps: int
    t_end: float
    # mean over the scenario's agents; successful scenarios only
    extra_time: float | None = None
    mode_counts: dict[str, int] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {
            "label": self.label,
            "seed": self.seed,
            "planner": self.planner,
            "agent_count": self.agent_count,
            "outcome": self.outcome.value,
            "agent_outcomes": {str(k): v.value for k, v in sorted(self.agent_outcomes.items())},
            "arrival_times": {str(k): v for k, v in sorted(self.arrival_times.items())},
            "steps": self.steps,
            "t_end": self.t_end,
            "extra_time": self.extra_time,
            "mode_counts": dict(sorted(self.mode_counts.items())),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> RunOutcome:
        return cls(
            label=data["label"],
            seed=data["seed"],
            planner=data["planner"],
            agent_count=data["agent_count"],
            outcome=ScenarioOutcome(data["outcome"]),
            agent_outcomes={int(k): AgentOutcome(v) for k, v in data["agent_outcomes"].items()},
            arrival_times={int(k): v for k, v in data["arrival_times"].items()},
            steps=data["steps"],
            t_end=data["t_end"],
            extra_time=data.get("extra_time"),
            mode_counts=data.get("mode_counts", {}),
        )


@dataclass(frozen=True, slots=True)
class MetricsRow:
    planner: str
    agent_count: int
    world_size: str
    pct_success: float
    pct_collision: float
    pct_stuck: float
    mean_extra_time: float | None
    n_cases: int
    mode_fractions: dict[str, float] = field(default_factory=dict)

    @property
    def pct_failure(self) -> float:
        return self.pct_collision + self.pct_stuck

    def to_csv_row(self) -> dict[str, Any]:
        row: dict[str, Any] = {
            "planner": self.planner,
            "agent_count": self.agent_count,
            "world_size": self.world_size,
            "pct_success": self.pct_success,
            "pct_collision": self.pct_collision,
            "pct_stuck": self.pct_stuck,
            "mean_extra_time": "" if self.mean_extra_time is None else self.mean_extra_time,
            "n_cases": self.n_cases,
        }
        for reason in SwitchReason:
            fraction = self.mode_fractions.get(reason.value)
            row[f"frac_{reason.value}"] = "" if fraction is None else fraction
        return row


CSV_COLUMNS: tuple[str, ...] = (
    "planner",
    "agent_count",
    "world_size",
    "pct_success",
    "pct_collision",
    "pct_stuck",
    "mean_extra_time",
    "n_cases",
    *(f"frac_{reason.value}" for reason in SwitchReason),
)


def world_size(world: WorldConfig) -> str:
    return "x".join(f"{extent:g}" for extent in world.bounds)


def aggregate(
    planner: str,
    agent_count: int,
    world: WorldConfig,
    outcomes: Sequence[RunOutcome],
) -> MetricsRow:
    """Fold scenario outcomes into one row.

    Mean extra time averages the per-scenario means of successful scenarios
    only; mode fractions are kept when the planner tagged switch reasons.
    """
    if not outcomes:
        raise ValueError("Cannot aggregate zero outcomes")
    n = len(outcomes)
    counts = Counter(outcome.outcome for outcome in outcomes)

    extras = [
        o.extra_time
        for o in outcomes
        if o.outcome is ScenarioOutcome.SUCCESS and o.extra_time is not None
    ]
    modes: Counter[str] = Counter()
    for outcome in outcomes:
        modes.update(outcome.mode_counts)
    total_modes = sum(modes.values())
    fractions = (
        {reason.value: modes[reason.value] / total_modes for reason in SwitchReason}
        if total_modes
        else {}
    )

    return MetricsRow(
        planner=planner,
        agent_count=agent_count,
        world_size=world_size(world),
        pct_success=100.0 * counts[ScenarioOutcome.SUCCESS] / n,
        pct_collision=100.0 * counts[ScenarioOutcome.COLLISION] / n,
        pct_stuck=100.0 * counts[ScenarioOutcome.STUCK] / n,
        mean_extra_time=float(np.mean(extras)) if extras else None,
        n_cases=n,
        mode_fractions=fractions,
    )
