"""Planner registry for creating planners from bench and simulate configs."""

from __future__ import annotations

from enum import Enum
from pathlib import Path
from typing import TYPE_CHECKING, Self

from pydantic import BaseModel, ConfigDict, model_validator

from .fmp import FmpConfig
from .hybrid import HybridConfig
from .planners.fmp import FmpPlanner
from .planners.hybrid import HybridPlanner
from .planners.policy import PolicyPlanner
from .planners.straight import StraightLinePlanner
from .policy import load_model

if TYPE_CHECKING:
    from .planners.base import Planner


class PlannerKind(str, Enum):
    FMP = "fmp"
    POLICY = "policy"
    HYBRID = "hybrid"
    STRAIGHT = "straight"


class PlannerSpec(BaseModel):
    """One planner entry of a bench or simulate run.

    ``label`` tells apart two entries of the same kind, for example a model
    trained with the legacy reward and one trained with the shaped reward.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: PlannerKind
    label: str | None = None
    model_path: Path | None = None
    fmp: FmpConfig = FmpConfig()
    hybrid: HybridConfig = HybridConfig()

    @model_validator(mode="after")
    def _check_model(self) -> Self:
        needs_model = self.kind in (PlannerKind.POLICY, PlannerKind.HYBRID)
        if needs_model and self.model_path is None:
            raise ValueError(f"Planner '{self.kind.value}' needs a model_path")
        if not needs_model and self.model_path is not None:
            raise ValueError(f"Planner '{self.kind.value}' does not take a model_path")
        return self

    @property
    def name(self) -> str:
        return self.label or self.kind.value


def create_planner(spec: PlannerSpec, dimension: int) -> Planner:
    """Build the planner for a spec, loading and checking its model if any.

    Raises:
        ModelLoadError, ModelMismatchError, ModelCorruptionError: from load_model.
    """
    match spec.kind:
        case PlannerKind.FMP:
            return FmpPlanner(spec.fmp)
        case PlannerKind.STRAIGHT:
            return StraightLinePlanner()
        case PlannerKind.POLICY:
            assert spec.model_path is not None
            return PolicyPlanner(load_model(spec.model_path, expected_dimension=dimension))
        case PlannerKind.HYBRID:
            assert spec.model_path is not None
            model = load_model(spec.model_path, expected_dimension=dimension)
            return HybridPlanner(model, spec.hybrid)
