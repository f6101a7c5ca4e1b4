"""Synchronous advantage actor-critic training with a multi-stage curriculum.

Every agent in a training episode is an independent sample for one shared
network. Rollouts from ``parallel_envs`` environments are collected in
lock-step for ``n_step`` steps, then one gradient update is applied.
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Literal, Self

import numpy as np
import torch
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .bench.scenarios import sample_scenario
from .constants import TRAIN_DT
from .env import EpisodeState, episode_terminated, observe, step
from .logging_config import get_logger
from .models import AgentStatus, WorldConfig
from .policy import (
    ActionSpace,
    PolicyModel,
    forward_batch,
    model_digest,
    parameters_finite,
    sample_action,
    save_model,
)
from .reward import RewardConfig, RewardVariant, nsl_collision_term, step_reward

if TYPE_CHECKING:
    from pathlib import Path

    import numpy.typing as npt

logger = get_logger(__name__)

TELESCOPE_TOLERANCE = 1e-9
DEFAULT_TRAIN_T_MAX = 30.0


class TrainingDivergenceError(RuntimeError):
    """Parameters went non-finite during an update."""

    def __init__(self, message: str, checkpoint: Path | None = None) -> None:
        super().__init__(message)
        self.checkpoint = checkpoint


class RewardInvariantError(RuntimeError):
    """A logged reward broke the bounds of its variant."""


# ─────────────────────────────────────────────────────────────────────────────
# Configuration
# ─────────────────────────────────────────────────────────────────────────────


class StageSpec(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    agent_count: int = Field(ge=1)
    episodes: int = Field(ge=1)


class TrainConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    seed: int = Field(default=0, ge=0, lt=2**64)
    dimension: Literal[2, 3] = 2
    world: WorldConfig | None = None
    gamma: float = Field(default=0.97, gt=0, lt=1)
    beta: float = Field(default=1e-4, ge=0)
    n_step: int = Field(default=8, ge=1)
    learning_rate: float = Field(default=3e-4, ge=0)
    max_grad_norm: float | None = Field(default=5.0, gt=0)
    parallel_envs: int = Field(default=8, ge=1)
    hidden_sizes: tuple[int, ...] = (64, 64)
    stages: tuple[StageSpec, ...] = (
        StageSpec(agent_count=2, episodes=20_000),
        StageSpec(agent_count=4, episodes=20_000),
    )
    reward: RewardConfig = RewardConfig()
    rolling_window: int = Field(default=1000, ge=1)
    compare_with_scratch: bool = False
    check_reward_invariants: bool = True

    @model_validator(mode="after")
    def _check(self) -> Self:
        if not self.stages:
            raise ValueError("Curriculum needs at least one stage")
        counts = [stage.agent_count for stage in self.stages]
        if any(b <= a for a, b in zip(counts, counts[1:], strict=False)):
            raise ValueError(f"Stage agent counts must strictly increase, got {counts}")
        if self.world is not None and self.world.dimension != self.dimension:
            raise ValueError("world.dimension must match dimension")
        return self

    @property
    def training_world(self) -> WorldConfig:
        if self.world is not None:
            return self.world
        return WorldConfig.model_validate(
            {"dimension": self.dimension, "dt": TRAIN_DT, "t_max": DEFAULT_TRAIN_T_MAX}
        )

    def provenance(self) -> dict[str, object]:
        return {
            "seed": self.seed,
            "gamma": self.gamma,
            "beta": self.beta,
            "n_step": self.n_step,
            "learning_rate": self.learning_rate,
            "parallel_envs": self.parallel_envs,
            "reward_variant": self.reward.variant.value,
            "alpha": self.reward.alpha,
            "stages": [stage.model_dump() for stage in self.stages],
        }


# ─────────────────────────────────────────────────────────────────────────────
# Returns and Losses
# ─────────────────────────────────────────────────────────────────────────────


def discounted_return(
    rewards: Sequence[float], bootstrap: float, gamma: float
) -> list[float]:
    """n-step returns for every position of a segment, computed backward.

    Pass bootstrap 0 for segments that end in a terminal state.
    """
    if not rewards:
        raise ValueError("Segment must contain at least one reward")
    if not all(math.isfinite(r) for r in rewards) or not math.isfinite(bootstrap):
        raise ValueError("Rewards and bootstrap must be finite")
    returns = [0.0] * len(rewards)
    running = bootstrap
    for i in range(len(rewards) - 1, -1, -1):
        running = rewards[i] + gamma * running
        returns[i] = running
    return returns


@dataclass(frozen=True, slots=True)
class RolloutBatch:
    observations: torch.Tensor  # (T, obs)
    actions: torch.Tensor  # (T,) int64
    returns: torch.Tensor  # (T,)

    def __post_init__(self) -> None:
        size = self.observations.shape[0]
        if self.actions.shape != (size,) or self.returns.shape != (size,):
            raise ValueError("Batch fields must have one entry per step")
        if not bool(torch.isfinite(self.returns).all()):
            raise ValueError("Batch returns must be finite")

    @classmethod
    def from_arrays(
        cls,
        observations: npt.NDArray[np.float64],
        actions: Sequence[int],
        returns: Sequence[float],
    ) -> RolloutBatch:
        return cls(
            observations=torch.as_tensor(observations, dtype=torch.float64),
            actions=torch.as_tensor(list(actions), dtype=torch.int64),
            returns=torch.as_tensor(list(returns), dtype=torch.float64),
        )


@dataclass(frozen=True, slots=True)
class LossTerms:
    value_loss: torch.Tensor
    policy_objective: torch.Tensor
    entropy: torch.Tensor

    @property
    def total(self) -> torch.Tensor:
        """Quantity to minimise: value loss minus the policy objective."""
        return self.value_loss - self.policy_objective

    def diagnostics(self) -> dict[str, float]:
        return {
            "value_loss": float(self.value_loss),
            "policy_objective": float(self.policy_objective),
            "entropy": float(self.entropy),
        }


def losses(
    batch: RolloutBatch,
    model: PolicyModel,
    beta: float,
    advantages: torch.Tensor | None = None,
) -> LossTerms:
    """Value loss and entropy-regularised policy objective.

    The advantage is a constant in the policy term; pass it explicitly to hold
    it fixed while the parameters are perturbed.
    """
    if batch.observations.shape[-1] != model.observation_size:
        raise ValueError(
            f"Batch has {batch.observations.shape[-1]} features, model expects "
            f"{model.observation_size}"
        )
    if batch.actions.numel() and int(batch.actions.max()) >= model.action_count:
        raise ValueError("Batch holds action indices outside the model's action set")

    logits, values = model(batch.observations)
    log_probs = torch.log_softmax(logits, dim=-1)
    entropy = -(log_probs.exp() * log_probs).sum(dim=-1).mean()
    if advantages is None:
        advantages = (batch.returns - values).detach()
    chosen = log_probs.gather(-1, batch.actions.unsqueeze(-1)).squeeze(-1)

    value_loss = ((batch.returns - values) ** 2).mean()
    policy_objective = (chosen * advantages).mean() + beta * entropy
    return LossTerms(value_loss=value_loss, policy_objective=policy_objective, entropy=entropy)


# ─────────────────────────────────────────────────────────────────────────────
# Rollouts
# ─────────────────────────────────────────────────────────────────────────────


@dataclass
class _Segment:
    observations: list[npt.NDArray[np.float64]] = field(default_factory=list)
    actions: list[int] = field(default_factory=list)
    rewards: list[float] = field(default_factory=list)
    terminal: bool = False
    bootstrap_observation: npt.NDArray[np.float64] | None = None


@dataclass
class _Slot:
    """One environment plus the per-agent bookkeeping of its current episode."""

    state: EpisodeState
    episode_rewards: dict[int, float]
    goal_terms: dict[int, float]
    start_goal_distance: dict[int, float]
    segments: dict[int, _Segment] = field(default_factory=dict)


@dataclass
class RewardCurve:
    stage: int
    agent_count: int
    window: int
    episode_rewards: list[float] = field(default_factory=list)

    @property
    def rolling(self) -> list[float]:
        rewards = np.asarray(self.episode_rewards)
        if rewards.size == 0:
            return []
        sums = np.cumsum(rewards)
        out = np.empty_like(rewards)
        for i in range(rewards.size):
            start = max(0, i + 1 - self.window)
            out[i] = (sums[i] - (sums[start - 1] if start else 0.0)) / (i + 1 - start)
        return out.tolist()

    @property
    def initial_rolling(self) -> float:
        head = self.episode_rewards[: self.window]
        return float(np.mean(head)) if head else math.nan

    @property
    def final_rolling(self) -> float:
        return self.rolling[-1] if self.episode_rewards else math.nan


def _window(config: TrainConfig, budget: int) -> int:
    return max(1, min(config.rolling_window, budget // 10))


class _StageRunner:
    def __init__(
        self,
        config: TrainConfig,
        model: PolicyModel,
        stage_index: int,
        stage: StageSpec,
    ) -> None:
        self.config = config
        self.model = model
        self.stage_index = stage_index
        self.stage = stage
        self.world = config.training_world
        self.space = ActionSpace.for_dimension(config.dimension)
        self.rng = np.random.default_rng([config.seed, stage_index])
        self.curve = RewardCurve(
            stage=stage_index,
            agent_count=stage.agent_count,
            window=_window(config, stage.episodes),
        )
        self.optimizer = torch.optim.Adam(model.parameters(), lr=config.learning_rate)
        self.started = 0
        self._retired: list[_Segment] = []
        self.slots: list[_Slot | None] = [
            self._new_slot() for _ in range(min(config.parallel_envs, stage.episodes))
        ]

    def _new_slot(self) -> _Slot | None:
        if self.started >= self.stage.episodes:
            return None
        self.started += 1
        scenario = sample_scenario(
            self.rng, self.stage.agent_count, self.world, label=f"train-{self.started}"
        )
        state = EpisodeState.from_scenario(scenario)
        return _Slot(
            state=state,
            episode_rewards={a.id: 0.0 for a in state.agents},
            goal_terms={a.id: 0.0 for a in state.agents},
            start_goal_distance={a.id: a.goal_distance for a in state.agents},
        )

    @property
    def finished(self) -> bool:
        return len(self.curve.episode_rewards) >= self.stage.episodes

    def _check_rewards(self, collision_term: float) -> None:
        if not -1.0 <= collision_term <= 0.0:
            raise RewardInvariantError(f"Collision term {collision_term} outside [-1, 0]")

    def _close_episode(self, slot: _Slot) -> None:
        state = slot.state
        if self.config.check_reward_invariants and self.config.reward.variant is RewardVariant.NSL:
            for agent in state.agents:
                # arrival pays the bonus instead of progress, even if struck later
                if agent.id in state.arrival_times:
                    continue
                expected = self.config.reward.alpha * (
                    slot.start_goal_distance[agent.id] - agent.goal_distance
                )
                if abs(slot.goal_terms[agent.id] - expected) > TELESCOPE_TOLERANCE:
                    raise RewardInvariantError(
                        f"Goal terms of agent {agent.id} sum to "
                        f"{slot.goal_terms[agent.id]}, expected {expected}"
                    )
        for agent in state.agents:
            segment = slot.segments.get(agent.id)
            if segment is not None and not segment.terminal:
                segment.bootstrap_observation = observe(state, agent.id)
        self.curve.episode_rewards.append(float(np.mean(list(slot.episode_rewards.values()))))

    def _act(self) -> None:
        """One synchronous step of every live environment."""
        requests: list[tuple[_Slot, int, npt.NDArray[np.float64]]] = []
        for slot in self.slots:
            if slot is None:
                continue
            for agent_id in slot.state.active_ids():
                requests.append((slot, agent_id, observe(slot.state, agent_id)))
        if not requests:
            return

        probs, _ = forward_batch(self.model, np.stack([obs for _, _, obs in requests]))
        chosen: dict[int, dict[int, int]] = {}
        for (slot, agent_id, obs), p in zip(requests, probs, strict=True):
            index = sample_action(p, self.rng)
            chosen.setdefault(id(slot), {})[agent_id] = index
            segment = slot.segments.setdefault(agent_id, _Segment())
            segment.observations.append(obs)
            segment.actions.append(index)

        for i, slot in enumerate(self.slots):
            if slot is None:
                continue
            indices = chosen.get(id(slot), {})
            before = {a.id: a for a in slot.state.agents}
            actions = {
                agent_id: self.space.to_action(index, before[agent_id].v_pref)
                for agent_id, index in indices.items()
            }
            step(slot.state, actions)
            record = slot.state.last_record
            for agent_id in indices:
                after = slot.state.agent(agent_id)
                d_min = record.agent(agent_id).d_min
                collided = after.status is AgentStatus.COLLIDED
                reached = after.status is AgentStatus.ARRIVED
                prev_dist = before[agent_id].goal_distance
                now_dist = after.goal_distance
                reward = step_reward(
                    self.config.reward,
                    reached_goal=reached,
                    collided=collided,
                    d_min=d_min,
                    goal_dist_prev=prev_dist,
                    goal_dist_now=now_dist,
                )
                if self.config.reward.variant is RewardVariant.NSL:
                    collision_term = nsl_collision_term(d_min)
                    if self.config.check_reward_invariants:
                        self._check_rewards(collision_term)
                    if not reached:
                        slot.goal_terms[agent_id] += reward - collision_term
                slot.episode_rewards[agent_id] += reward
                segment = slot.segments[agent_id]
                segment.rewards.append(reward)
                if not after.is_active:
                    segment.terminal = True

            if episode_terminated(slot.state).done:
                self._close_episode(slot)
                self._retired.extend(slot.segments.values())
                self.slots[i] = self._new_slot()

    def _update(self) -> dict[str, float] | None:
        segments = list(self._retired)
        for slot in self.slots:
            if slot is None:
                continue
            for agent_id, segment in slot.segments.items():
                if not segment.terminal and segment.bootstrap_observation is None:
                    segment.bootstrap_observation = observe(slot.state, agent_id)
                segments.append(segment)
            slot.segments = {}
        self._retired = []
        segments = [s for s in segments if s.rewards]
        if not segments:
            return None

        pending = [s for s in segments if s.bootstrap_observation is not None]
        bootstraps: dict[int, float] = {}
        if pending:
            _, values = forward_batch(
                self.model, np.stack([s.bootstrap_observation for s in pending])  # type: ignore[misc]
            )
            bootstraps = {id(s): float(v) for s, v in zip(pending, values, strict=True)}

        observations: list[npt.NDArray[np.float64]] = []
        actions: list[int] = []
        returns: list[float] = []
        for segment in segments:
            bootstrap = 0.0 if segment.terminal else bootstraps[id(segment)]
            observations.extend(segment.observations)
            actions.extend(segment.actions)
            returns.extend(discounted_return(segment.rewards, bootstrap, self.config.gamma))

        batch = RolloutBatch.from_arrays(np.stack(observations), actions, returns)
        terms = losses(batch, self.model, self.config.beta)
        self.optimizer.zero_grad()
        terms.total.backward()
        if self.config.max_grad_norm is not None:
            torch.nn.utils.clip_grad_norm_(self.model.parameters(), self.config.max_grad_norm)
        self.optimizer.step()
        return terms.diagnostics()

    def run(self, checkpoint_dir: Path | None) -> RewardCurve:
        log = logger.bind(stage=self.stage_index, agents=self.stage.agent_count)
        log.info("Stage starting", episodes=self.stage.episodes, window=self.curve.window)
        last_good = {k: v.clone() for k, v in self.model.state_dict().items()}
        updates = 0
        while not self.finished:
            for _ in range(self.config.n_step):
                self._act()
                if self.finished:
                    break
            diagnostics = self._update()
            updates += 1
            if not parameters_finite(self.model):
                checkpoint = self._save_last_good(last_good, checkpoint_dir)
                log.error("Training diverged", updates=updates, diagnostics=diagnostics)
                raise TrainingDivergenceError(
                    f"Non-finite parameters after update {updates} of stage "
                    f"{self.stage_index}: {diagnostics}",
                    checkpoint=checkpoint,
                )
            last_good = {k: v.clone() for k, v in self.model.state_dict().items()}
            if updates % 200 == 0:
                log.info(
                    "Training progress",
                    episodes=len(self.curve.episode_rewards),
                    rolling_reward=self.curve.final_rolling,
                    **(diagnostics or {}),
                )
        log.info(
            "Stage finished",
            updates=updates,
            initial_rolling=self.curve.initial_rolling,
            final_rolling=self.curve.final_rolling,
        )
        return self.curve

    def _save_last_good(
        self, state: dict[str, torch.Tensor], checkpoint_dir: Path | None
    ) -> Path | None:
        self.model.load_state_dict(state)
        if checkpoint_dir is None:
            return None
        path = checkpoint_dir / f"stage{self.stage_index}_last_good.json"
        save_model(self.model, path, provenance=self.config.provenance())
        return path


@dataclass(frozen=True, slots=True)
class StageResult:
    model: PolicyModel
    curve: RewardCurve
    initial_digest: str


def train_stage(
    config: TrainConfig,
    model: PolicyModel,
    stage: StageSpec,
    *,
    stage_index: int = 0,
    checkpoint_dir: Path | None = None,
) -> StageResult:
    """Train one curriculum stage in place and return its reward curve."""
    if model.dimension != config.dimension:
        raise ValueError(f"Model is {model.dimension}D, config is {config.dimension}D")
    initial_digest = model_digest(model)
    curve = _StageRunner(config, model, stage_index, stage).run(checkpoint_dir)
    return StageResult(model=model, curve=curve, initial_digest=initial_digest)


@dataclass(frozen=True, slots=True)
class CurriculumResult:
    model: PolicyModel
    stages: list[StageResult]
    scratch: StageResult | None = None

    @property
    def curves(self) -> list[RewardCurve]:
        return [result.curve for result in self.stages]


def new_model(config: TrainConfig, seed: int | None = None) -> PolicyModel:
    return PolicyModel(
        config.dimension,
        config.hidden_sizes,
        seed=config.seed if seed is None else seed,
    )


def train_curriculum(
    config: TrainConfig,
    *,
    out_dir: Path | None = None,
    model: PolicyModel | None = None,
) -> CurriculumResult:
    """Run every stage in order, each warm-started from the previous one.

    Writes a checkpoint per stage when out_dir is given. With
    compare_with_scratch, a fresh model is also trained at the last stage's
    agent count for the whole curriculum budget.
    """
    if not config.stages:
        raise ValueError("Curriculum needs at least one stage")
    model = model if model is not None else new_model(config)
    checkpoint_dir = out_dir / "checkpoints" if out_dir is not None else None

    results: list[StageResult] = []
    for index, stage in enumerate(config.stages):
        result = train_stage(
            config, model, stage, stage_index=index, checkpoint_dir=checkpoint_dir
        )
        results.append(result)
        if checkpoint_dir is not None:
            save_model(
                model,
                checkpoint_dir / f"stage{index}_{stage.agent_count}agents.json",
                provenance={**config.provenance(), "completed_stage": index},
            )

    scratch: StageResult | None = None
    if config.compare_with_scratch:
        total = sum(stage.episodes for stage in config.stages)
        final = StageSpec(agent_count=config.stages[-1].agent_count, episodes=total)
        logger.info("Training scratch baseline", agents=final.agent_count, episodes=total)
        scratch = train_stage(
            config, new_model(config), final, stage_index=len(config.stages)
        )
    return CurriculumResult(model=model, stages=results, scratch=scratch)
