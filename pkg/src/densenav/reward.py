"""Per-step rewards for the learned policy.

Two variants are supported: the legacy reward (sparse arrival bonus and a
near-miss band) and the shaped reward, which splits into a collision term and
a goal term that pays a fraction of every metre of progress.
"""

from __future__ import annotations

from enum import Enum
from typing import Final

from pydantic import BaseModel, ConfigDict, Field

ARRIVAL_REWARD: Final[float] = 1.0

LEGACY_COLLISION_PENALTY: Final[float] = -0.25
LEGACY_NEAR_MISS_DISTANCE: Final[float] = 0.2
LEGACY_NEAR_MISS_OFFSET: Final[float] = -0.1
LEGACY_NEAR_MISS_SLOPE: Final[float] = 0.05

NSL_COLLISION_PENALTY: Final[float] = -1.0
NSL_NEAR_MISS_DISTANCE: Final[float] = 0.1
NSL_NEAR_MISS_SLOPE: Final[float] = 10.0
DEFAULT_ALPHA: Final[float] = 0.08


class RewardVariant(str, Enum):
    LEGACY = "legacy"
    NSL = "nsl"


class RewardConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    variant: RewardVariant = RewardVariant.NSL
    alpha: float = Field(default=DEFAULT_ALPHA, gt=0)


def legacy_reward(reached_goal: bool, d_min: float) -> float:
    if reached_goal:
        return ARRIVAL_REWARD
    if d_min < 0:
        return LEGACY_COLLISION_PENALTY
    if 0 < d_min < LEGACY_NEAR_MISS_DISTANCE:
        return LEGACY_NEAR_MISS_OFFSET + LEGACY_NEAR_MISS_SLOPE * d_min
    return 0.0


def nsl_collision_term(d_min: float) -> float:
    """-1 on overlap, rising linearly to 0 at 0.1 m, 0 beyond. Always in [-1, 0].

    Exact contact (d_min == 0) sits in neither open interval and scores 0.
    """
    if d_min < 0:
        return NSL_COLLISION_PENALTY
    if 0 < d_min < NSL_NEAR_MISS_DISTANCE:
        return NSL_NEAR_MISS_SLOPE * d_min - 1.0
    return 0.0


def nsl_goal_term(
    reached_goal: bool, goal_dist_prev: float, goal_dist_now: float, alpha: float
) -> float:
    """Arrival bonus, otherwise alpha times the progress made this step."""
    if goal_dist_prev < 0 or goal_dist_now < 0:
        raise ValueError("Goal distances must be non-negative")
    if reached_goal:
        return ARRIVAL_REWARD
    return alpha * (goal_dist_prev - goal_dist_now)


def nsl_reward(
    reached_goal: bool,
    d_min: float,
    goal_dist_prev: float,
    goal_dist_now: float,
    alpha: float = DEFAULT_ALPHA,
) -> float:
    return nsl_collision_term(d_min) + nsl_goal_term(
        reached_goal, goal_dist_prev, goal_dist_now, alpha
    )


def step_reward(
    config: RewardConfig,
    *,
    reached_goal: bool,
    collided: bool,
    d_min: float,
    goal_dist_prev: float,
    goal_dist_now: float,
) -> float:
    """Reward for one agent-step under the configured variant.

    A step that both overlaps and reaches the goal counts as a collision only.
    """
    reached = reached_goal and not collided
    if config.variant is RewardVariant.LEGACY:
        return legacy_reward(reached, d_min)
    return nsl_reward(reached, d_min, goal_dist_prev, goal_dist_now, config.alpha)
