"""Run planners over scenarios and collect outcomes."""

from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass
from functools import lru_cache
from typing import TYPE_CHECKING

import numpy as np

from ..constants import EVAL_DT
from ..env import EpisodeState, episode_terminated, step
from ..logging_config import get_logger
from ..models import AgentStatus, ScenarioOutcome
from ..planner_registry import create_planner
from ..trajectory import TrajectoryLog
from ..worker import run_jobs
from .metrics import RunOutcome, aggregate, extra_time

if TYPE_CHECKING:
    from collections.abc import Sequence

    from ..models import Scenario
    from ..planner_registry import PlannerSpec
    from ..planners.base import Planner
    from .metrics import MetricsRow

logger = get_logger(__name__)


class SafetyViolationError(RuntimeError):
    """An overlap went unflagged by the environment."""


@dataclass(frozen=True, slots=True)
class ScenarioRun:
    outcome: RunOutcome
    trajectory: TrajectoryLog | None = None


def _check_safety(state: EpisodeState) -> None:
    for record in state.last_record.agents:
        if record.d_min < 0 and record.status is not AgentStatus.COLLIDED:
            raise SafetyViolationError(
                f"{state.label}: agent {record.id} overlaps a neighbor at "
                f"t={state.t:.3f} (d_min={record.d_min:.6f}) without being collided"
            )


def run_scenario(
    planner: Planner,
    scenario: Scenario,
    *,
    planner_name: str | None = None,
    dt: float = EVAL_DT,
    safety_checks: bool = True,
    keep_trajectory: bool = False,
) -> ScenarioRun:
    """Step one scenario to termination and classify it."""
    name = planner_name or planner.PLANNER_NAME
    state = EpisodeState.from_scenario(scenario, dt=dt)
    starts = {agent.id: agent for agent in state.agents}
    mode_counts: Counter[str] = Counter()

    report = episode_terminated(state)
    while not report.done:
        plan = planner.plan(state)
        mode_counts.update(reason.value for reason in plan.reasons.values())
        step(state, plan.actions, plan.modes)
        if safety_checks:
            _check_safety(state)
        report = episode_terminated(state)

    assert report.scenario_outcome is not None
    mean_extra: float | None = None
    if report.scenario_outcome is ScenarioOutcome.SUCCESS:
        mean_extra = float(
            np.mean(
                [
                    extra_time(starts[agent_id], state.arrival_times.get(agent_id), dt)
                    for agent_id in starts
                ]
            )
        )

    outcome = RunOutcome(
        label=scenario.label,
        seed=scenario.seed,
        planner=name,
        agent_count=scenario.agent_count,
        outcome=report.scenario_outcome,
        agent_outcomes=report.agent_outcomes,
        arrival_times=dict(state.arrival_times),
        steps=state.step_index,
        t_end=state.t,
        extra_time=mean_extra,
        mode_counts=dict(mode_counts),
    )
    logger.debug(
        "Scenario finished",
        label=scenario.label,
        planner=name,
        outcome=outcome.outcome.value,
        steps=outcome.steps,
    )
    trajectory = (
        TrajectoryLog(header=state.trajectory_header(name), records=state.records)
        if keep_trajectory
        else None
    )
    return ScenarioRun(outcome=outcome, trajectory=trajectory)


# ─────────────────────────────────────────────────────────────────────────────
# Batch Evaluation
# ─────────────────────────────────────────────────────────────────────────────


@dataclass(frozen=True, slots=True)
class _Job:
    spec: PlannerSpec
    scenario: Scenario
    dt: float
    safety_checks: bool
    keep_trajectory: bool


@lru_cache(maxsize=8)
def _cached_planner(spec: PlannerSpec, dimension: int) -> Planner:
    # planners keep no per-episode state, so one instance serves every scenario
    return create_planner(spec, dimension)


def _run_job(job: _Job) -> ScenarioRun:
    planner = _cached_planner(job.spec, job.scenario.world.dimension)
    return run_scenario(
        planner,
        job.scenario,
        planner_name=job.spec.name,
        dt=job.dt,
        safety_checks=job.safety_checks,
        keep_trajectory=job.keep_trajectory,
    )


@dataclass(frozen=True, slots=True)
class Evaluation:
    runs: list[ScenarioRun]
    rows: list[MetricsRow]

    @property
    def outcomes(self) -> list[RunOutcome]:
        return [run.outcome for run in self.runs]


def evaluate(
    spec: PlannerSpec,
    scenarios: Sequence[Scenario],
    *,
    workers: int = 1,
    dt: float = EVAL_DT,
    safety_checks: bool = True,
    keep_trajectories: bool = False,
) -> Evaluation:
    """Run a planner over scenarios and aggregate one row per agent count.

    The planner is built once up front, so a model whose dimension does not
    match the scenarios is rejected before any scenario runs.
    """
    if not scenarios:
        raise ValueError("No scenarios to evaluate")
    dimensions = {scenario.world.dimension for scenario in scenarios}
    if len(dimensions) != 1:
        raise ValueError(f"Scenarios mix dimensions: {sorted(dimensions)}")
    # a model file may have been rewritten since the last evaluation
    _cached_planner.cache_clear()
    _cached_planner(spec, dimensions.pop())

    log = logger.bind(planner=spec.name, scenarios=len(scenarios), workers=workers)
    log.info("Evaluating planner")

    jobs = [
        _Job(spec, scenario, dt, safety_checks, keep_trajectories) for scenario in scenarios
    ]
    runs = run_jobs(_run_job, jobs, workers=workers)

    by_count: dict[int, list[RunOutcome]] = defaultdict(list)
    worlds = {}
    for scenario, run in zip(scenarios, runs, strict=True):
        by_count[scenario.agent_count].append(run.outcome)
        worlds.setdefault(scenario.agent_count, scenario.world)
    rows = [
        aggregate(spec.name, count, worlds[count], by_count[count])
        for count in sorted(by_count)
    ]
    for row in rows:
        log.info(
            "Evaluation row",
            agent_count=row.agent_count,
            pct_success=row.pct_success,
            pct_collision=row.pct_collision,
            pct_stuck=row.pct_stuck,
        )
    return Evaluation(runs=runs, rows=rows)
