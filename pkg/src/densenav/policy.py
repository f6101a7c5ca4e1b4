"""Actor-critic network, discrete action sets and the model file format."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Any, Literal

import numpy as np
import orjson
import torch
from pydantic import BaseModel, ConfigDict, ValidationError
from torch import nn

from .constants import HEADING_CAP, NEIGHBOR_SLOTS, OBSERVATION_LAYOUT_VERSION
from .env import Action, observation_size
from .logging_config import get_logger
from .utils.hashing import get_json_hash

if TYPE_CHECKING:
    from collections.abc import Sequence
    from pathlib import Path

    import numpy.typing as npt

logger = get_logger(__name__)

DEFAULT_HIDDEN_SIZES: tuple[int, ...] = (64, 64)
DEFAULT_POLICY_HEAD_GAIN = 0.01


class ModelLoadError(ValueError):
    """Model file is unreadable, truncated or structurally invalid."""


class ModelMismatchError(ValueError):
    """Model was built for another dimension or observation layout."""


class ModelCorruptionError(RuntimeError):
    """Model produced or holds non-finite numbers."""


# ─────────────────────────────────────────────────────────────────────────────
# Action Sets
# ─────────────────────────────────────────────────────────────────────────────


@dataclass(frozen=True, slots=True)
class ActionSpace:
    """Discrete (speed fraction, dpsi, dphi) entries; index 0 is full speed ahead."""

    dimension: int
    entries: tuple[tuple[float, float, float], ...]

    @classmethod
    def for_dimension(cls, dimension: int) -> ActionSpace:
        if dimension == 2:
            return cls(dimension=2, entries=_ENTRIES_2D)
        if dimension == 3:
            return cls(dimension=3, entries=_ENTRIES_3D)
        raise ValueError(f"Unsupported dimension: {dimension}")

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def stop_index(self) -> int:
        return self.entries.index((0.0, 0.0, 0.0))

    def to_action(self, index: int, v_pref: float) -> Action:
        if not 0 <= index < len(self.entries):
            raise ValueError(f"Action index {index} outside [0, {len(self.entries)})")
        fraction, dpsi, dphi = self.entries[index]
        return Action(speed=fraction * v_pref, dpsi=dpsi, dphi=dphi)


def _build_2d() -> tuple[tuple[float, float, float], ...]:
    quarter, cap = HEADING_CAP / 2, HEADING_CAP
    full = [(1.0, d, 0.0) for d in (0.0, quarter, -quarter, cap, -cap)]
    half = [(0.5, d, 0.0) for d in (0.0, cap, -cap)]
    stop = [(0.0, d, 0.0) for d in (0.0, cap, -cap)]
    return tuple(full + half + stop)


def _build_3d() -> tuple[tuple[float, float, float], ...]:
    quarter, cap = HEADING_CAP / 2, HEADING_CAP
    turns = (0.0, quarter, -quarter, cap, -cap)
    entries = [
        (fraction, dpsi, dphi)
        for fraction in (1.0, 0.5)
        for dpsi in turns
        for dphi in turns
        # the four diagonal corners are left out
        if not (abs(dpsi) == cap and abs(dphi) == cap)
    ]
    return (*entries, (0.0, 0.0, 0.0))


_ENTRIES_2D = _build_2d()
_ENTRIES_3D = _build_3d()


# ─────────────────────────────────────────────────────────────────────────────
# Network
# ─────────────────────────────────────────────────────────────────────────────


class PolicyModel(nn.Module):
    """Shared tanh trunk with a softmax policy head and a scalar value head."""

    def __init__(
        self,
        dimension: int,
        hidden_sizes: Sequence[int] = DEFAULT_HIDDEN_SIZES,
        *,
        seed: int = 0,
        policy_head_gain: float = DEFAULT_POLICY_HEAD_GAIN,
    ) -> None:
        super().__init__()
        self.dimension = dimension
        self.observation_size = observation_size(dimension)
        self.action_count = len(ActionSpace.for_dimension(dimension))
        self.hidden_sizes = tuple(hidden_sizes)
        self.init_seed = seed
        self.policy_head_gain = policy_head_gain

        layers: list[nn.Module] = []
        width = self.observation_size
        for size in self.hidden_sizes:
            layers += [nn.Linear(width, size, dtype=torch.float64), nn.Tanh()]
            width = size
        self.trunk = nn.Sequential(*layers)
        self.policy_head = nn.Linear(width, self.action_count, dtype=torch.float64)
        self.value_head = nn.Linear(width, 1, dtype=torch.float64)
        self.reset_parameters(seed)

    def reset_parameters(self, seed: int) -> None:
        """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) from a seeded generator."""
        generator = torch.Generator().manual_seed(seed)
        with torch.no_grad():
            for module in self.modules():
                if not isinstance(module, nn.Linear):
                    continue
                bound = 1.0 / math.sqrt(module.in_features)
                if module is self.policy_head:
                    bound *= self.policy_head_gain
                for param in (module.weight, module.bias):
                    noise = torch.rand(param.shape, generator=generator, dtype=torch.float64)
                    param.copy_((noise * 2 - 1) * bound)

    def forward(self, observations: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        """Logits (..., A) and values (...)."""
        hidden = self.trunk(observations)
        return self.policy_head(hidden), self.value_head(hidden).squeeze(-1)


def _check_observations(model: PolicyModel, observations: npt.NDArray[np.float64]) -> None:
    if observations.shape[-1] != model.observation_size:
        raise ModelMismatchError(
            f"Observation has {observations.shape[-1]} features, model expects "
            f"{model.observation_size}"
        )


def forward_batch(
    model: PolicyModel, observations: npt.NDArray[np.float64]
) -> tuple[npt.NDArray[np.float64], npt.NDArray[np.float64]]:
    """Action probabilities (N, A) and values (N,) without tracking gradients."""
    _check_observations(model, observations)
    with torch.no_grad():
        logits, values = model(torch.as_tensor(observations, dtype=torch.float64))
        probs = torch.softmax(logits, dim=-1)
    probs_np, values_np = probs.numpy(), values.numpy()
    if not (np.all(np.isfinite(probs_np)) and np.all(np.isfinite(values_np))):
        raise ModelCorruptionError("Policy produced non-finite output")
    return probs_np, values_np


def forward(
    model: PolicyModel, observation: npt.NDArray[np.float64]
) -> tuple[npt.NDArray[np.float64], float]:
    probs, values = forward_batch(model, observation[np.newaxis, :])
    return probs[0], float(values[0])


def sample_action(probs: npt.NDArray[np.float64], rng: np.random.Generator) -> int:
    if not np.all(np.isfinite(probs)) or np.any(probs < 0) or probs.sum() <= 0:
        raise ModelCorruptionError(f"Invalid probability vector: {probs.tolist()}")
    return int(rng.choice(len(probs), p=probs / probs.sum()))


def greedy_action(probs: npt.NDArray[np.float64]) -> int:
    """Arg-max with ties going to the lowest index."""
    return int(np.argmax(probs))


def parameters_finite(model: PolicyModel) -> bool:
    return all(bool(torch.isfinite(p).all()) for p in model.parameters())


# ─────────────────────────────────────────────────────────────────────────────
# Model Files
# ─────────────────────────────────────────────────────────────────────────────


class ParameterBlob(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    shape: tuple[int, ...]
    values: tuple[float, ...]


class ModelFile(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: Literal["densenav.policy"] = "densenav.policy"
    version: Literal[1] = 1
    observation_layout_version: int
    dimension: Literal[2, 3]
    neighbor_slots: int
    observation_size: int
    action_count: int
    hidden_sizes: tuple[int, ...]
    init_seed: int
    policy_head_gain: float
    provenance: dict[str, Any] = {}
    parameters: dict[str, ParameterBlob]


def model_to_file(model: PolicyModel, provenance: dict[str, Any] | None = None) -> ModelFile:
    if not parameters_finite(model):
        raise ModelCorruptionError("Refusing to save a model with non-finite parameters")
    return ModelFile(
        observation_layout_version=OBSERVATION_LAYOUT_VERSION,
        dimension=2 if model.dimension == 2 else 3,
        neighbor_slots=NEIGHBOR_SLOTS,
        observation_size=model.observation_size,
        action_count=model.action_count,
        hidden_sizes=model.hidden_sizes,
        init_seed=model.init_seed,
        policy_head_gain=model.policy_head_gain,
        provenance=provenance or {},
        parameters={
            name: ParameterBlob(
                shape=tuple(tensor.shape), values=tuple(tensor.reshape(-1).tolist())
            )
            for name, tensor in model.state_dict().items()
        },
    )


def model_digest(model: PolicyModel) -> str:
    return get_json_hash(model_to_file(model).model_dump(mode="json")["parameters"])


def save_model(
    model: PolicyModel, path: Path, provenance: dict[str, Any] | None = None
) -> None:
    """Write every parameter as an exact decimal so save/load is lossless."""
    data = model_to_file(model, provenance).model_dump(mode="json")
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(orjson.dumps(data) + b"\n")
    logger.debug("Model saved", path=str(path), dimension=model.dimension)


def load_model(path: Path, expected_dimension: int | None = None) -> PolicyModel:
    try:
        raw = orjson.loads(path.read_bytes())
        spec = ModelFile.model_validate(raw)
    except (OSError, orjson.JSONDecodeError, ValidationError) as e:
        raise ModelLoadError(f"Cannot read model file {path}: {e}") from e

    if spec.observation_layout_version != OBSERVATION_LAYOUT_VERSION:
        raise ModelMismatchError(
            f"Model uses observation layout v{spec.observation_layout_version}, "
            f"this build uses v{OBSERVATION_LAYOUT_VERSION}"
        )
    if spec.neighbor_slots != NEIGHBOR_SLOTS:
        raise ModelMismatchError(
            f"Model expects {spec.neighbor_slots} neighbor slots, not {NEIGHBOR_SLOTS}"
        )
    if expected_dimension is not None and spec.dimension != expected_dimension:
        raise ModelMismatchError(
            f"Model is {spec.dimension}D but the world is {expected_dimension}D"
        )

    model = PolicyModel(
        spec.dimension,
        spec.hidden_sizes,
        seed=spec.init_seed,
        policy_head_gain=spec.policy_head_gain,
    )
    if (spec.observation_size, spec.action_count) != (
        model.observation_size,
        model.action_count,
    ):
        raise ModelMismatchError("Model header disagrees with its dimension")

    state: dict[str, torch.Tensor] = {}
    for name, blob in spec.parameters.items():
        if math.prod(blob.shape) != len(blob.values):
            raise ModelLoadError(f"Parameter {name} has the wrong number of values")
        state[name] = torch.tensor(blob.values, dtype=torch.float64).reshape(blob.shape)
    try:
        model.load_state_dict(state, strict=True)
    except RuntimeError as e:
        raise ModelLoadError(f"Parameters in {path} do not fit the network: {e}") from e
    if not parameters_finite(model):
        raise ModelCorruptionError(f"Model file {path} holds non-finite parameters")
    return model
