from pathlib import Path

import pytest
import torch

from densenav.policy import ActionSpace, PolicyModel, save_model


def fixed_choice_model(dimension: int, index: int) -> PolicyModel:
    """A model whose greedy action is always ``index`` whatever it observes."""
    model = PolicyModel(dimension, (8,), seed=0)
    with torch.no_grad():
        model.policy_head.weight.zero_()
        model.policy_head.bias.zero_()
        model.policy_head.bias[index] = 10.0
    return model


@pytest.fixture
def tiny_model_2d() -> PolicyModel:
    return PolicyModel(2, (16, 16), seed=3)


@pytest.fixture
def tiny_model_3d() -> PolicyModel:
    return PolicyModel(3, (16, 16), seed=3)


@pytest.fixture
def stop_model_2d() -> PolicyModel:
    return fixed_choice_model(2, ActionSpace.for_dimension(2).stop_index)


@pytest.fixture
def straight_model_2d() -> PolicyModel:
    return fixed_choice_model(2, 0)


@pytest.fixture
def model_file_2d(tmp_path: Path, tiny_model_2d: PolicyModel) -> Path:
    path = tmp_path / "models" / "policy_2d.json"
    save_model(tiny_model_2d, path, provenance={"source": "fixture"})
    return path


@pytest.fixture
def model_file_3d(tmp_path: Path, tiny_model_3d: PolicyModel) -> Path:
    path = tmp_path / "models" / "policy_3d.json"
    save_model(tiny_model_3d, path)
    return path
