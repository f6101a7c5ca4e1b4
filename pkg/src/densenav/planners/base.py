"""Base class for planners."""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any, ClassVar

if TYPE_CHECKING:
    from ..env import Action, EpisodeState
    from ..models import SwitchReason


@dataclass(frozen=True, slots=True)
class PlannerStep:
    """Actions for every active agent plus the mode tag logged for each."""

    actions: dict[int, Action]
    modes: dict[int, str]
    reasons: dict[int, SwitchReason] = field(default_factory=dict)


class Planner(ABC):
    """Base class for planners.

    Each planner must define a PLANNER_NAME class attribute that identifies
    it on the command line and in result files. This is enforced at class
    definition time.

    Example:
        class MyPlanner(Planner):
            PLANNER_NAME = "mine"

            def plan(self, state: EpisodeState) -> PlannerStep:
                ...
    """

    PLANNER_NAME: ClassVar[str]

    def __init_subclass__(cls, **kwargs: Any) -> None:
        """Validate PLANNER_NAME at class definition time."""
        super().__init_subclass__(**kwargs)

        if ABC in cls.__bases__:
            return

        if not hasattr(cls, "PLANNER_NAME") or not cls.PLANNER_NAME:
            raise TypeError(
                f"{cls.__name__} must define a non-empty PLANNER_NAME class attribute"
            )

    @abstractmethod
    def plan(self, state: EpisodeState) -> PlannerStep:
        """Decide the next action of every active agent from the current snapshot."""
        ...
