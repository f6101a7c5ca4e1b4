import math

import numpy as np
import orjson
import pytest
import torch

from densenav.policy import (
    ActionSpace,
    ModelCorruptionError,
    ModelLoadError,
    ModelMismatchError,
    PolicyModel,
    forward,
    forward_batch,
    greedy_action,
    load_model,
    model_digest,
    sample_action,
    save_model,
)


class TestActionSpace:
    @pytest.mark.parametrize(("dimension", "size"), [(2, 11), (3, 43)])
    def test_sizes(self, dimension: int, size: int) -> None:
        assert len(ActionSpace.for_dimension(dimension)) == size

    @pytest.mark.parametrize("dimension", [2, 3])
    def test_first_entry_is_full_speed_ahead(self, dimension: int) -> None:
        assert ActionSpace.for_dimension(dimension).entries[0] == (1.0, 0.0, 0.0)

    @pytest.mark.parametrize("dimension", [2, 3])
    def test_entries_are_distinct_and_decode(self, dimension: int) -> None:
        space = ActionSpace.for_dimension(dimension)

        assert len(set(space.entries)) == len(space)
        for index in range(len(space)):
            action = space.to_action(index, v_pref=1.5)
            assert 0.0 <= action.speed <= 1.5
            assert abs(action.dpsi) <= math.pi / 6 + 1e-12
            if dimension == 2:
                assert action.dphi == 0.0

    def test_stop_indices(self) -> None:
        assert ActionSpace.for_dimension(2).stop_index == 8
        assert ActionSpace.for_dimension(3).stop_index == 42

    def test_3d_leaves_out_diagonal_corners(self) -> None:
        cap = math.pi / 6
        entries = ActionSpace.for_dimension(3).entries

        assert (1.0, cap, cap) not in entries
        assert (0.5, -cap, cap) not in entries
        assert (1.0, cap, 0.0) in entries

    @pytest.mark.parametrize("index", [-1, 11, 100])
    def test_index_out_of_range(self, index: int) -> None:
        with pytest.raises(ValueError, match="outside"):
            ActionSpace.for_dimension(2).to_action(index, 1.0)

    def test_unsupported_dimension(self) -> None:
        with pytest.raises(ValueError, match="Unsupported"):
            ActionSpace.for_dimension(4)


class TestForward:
    def test_probabilities_normalized(self, tiny_model_2d) -> None:
        rng = np.random.default_rng(0)

        probs, values = forward_batch(tiny_model_2d, rng.normal(size=(5, 37)))

        assert probs.shape == (5, 11)
        assert values.shape == (5,)
        np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-12)
        assert np.all(probs >= 0)

    def test_fresh_model_is_near_uniform(self, tiny_model_3d) -> None:
        probs, _ = forward(tiny_model_3d, np.ones(46))

        np.testing.assert_allclose(probs, 1 / 43, rtol=0.1)

    def test_wrong_observation_size(self, tiny_model_2d) -> None:
        with pytest.raises(ModelMismatchError, match="features"):
            forward(tiny_model_2d, np.zeros(46))

    def test_non_finite_output(self, tiny_model_2d) -> None:
        with torch.no_grad():
            tiny_model_2d.value_head.bias.fill_(math.nan)

        with pytest.raises(ModelCorruptionError):
            forward(tiny_model_2d, np.zeros(37))

    def test_same_seed_same_weights(self) -> None:
        assert model_digest(PolicyModel(2, (8,), seed=4)) == model_digest(
            PolicyModel(2, (8,), seed=4)
        )
        assert model_digest(PolicyModel(2, (8,), seed=4)) != model_digest(
            PolicyModel(2, (8,), seed=5)
        )


class TestActionSelection:
    def test_sample_frequencies(self) -> None:
        probs = np.array([0.7, 0.2, 0.1])
        rng = np.random.default_rng(42)

        counts = np.bincount([sample_action(probs, rng) for _ in range(20_000)], minlength=3)

        np.testing.assert_allclose(counts / counts.sum(), probs, atol=0.015)

    def test_one_hot_always_samples_that_index(self) -> None:
        probs = np.zeros(11)
        probs[4] = 1.0
        rng = np.random.default_rng(1)

        assert {sample_action(probs, rng) for _ in range(50)} == {4}

    def test_sample_is_seeded(self) -> None:
        probs = np.full(11, 1 / 11)

        first = [sample_action(probs, np.random.default_rng(9)) for _ in range(5)]
        second = [sample_action(probs, np.random.default_rng(9)) for _ in range(5)]

        assert first == second

    @pytest.mark.parametrize(
        "probs", [[0.5, math.nan], [-0.1, 1.1], [0.0, 0.0]], ids=["nan", "negative", "zero"]
    )
    def test_sample_rejects_invalid(self, probs: list[float]) -> None:
        with pytest.raises(ModelCorruptionError):
            sample_action(np.array(probs), np.random.default_rng(0))

    def test_greedy_tie_goes_to_lowest_index(self) -> None:
        assert greedy_action(np.array([0.1, 0.4, 0.4, 0.1])) == 1

    def test_greedy_picks_max(self) -> None:
        assert greedy_action(np.array([0.1, 0.2, 0.6, 0.1])) == 2


class TestModelFiles:
    def test_save_and_load_is_exact(self, tmp_path, tiny_model_2d) -> None:
        path = tmp_path / "model.json"
        save_model(tiny_model_2d, path, provenance={"seed": 3})

        loaded = load_model(path)

        assert model_digest(loaded) == model_digest(tiny_model_2d)
        observation = np.linspace(-1.0, 1.0, 37)
        np.testing.assert_array_equal(
            forward(loaded, observation)[0], forward(tiny_model_2d, observation)[0]
        )

    def test_provenance_is_stored(self, model_file_2d) -> None:
        data = orjson.loads(model_file_2d.read_bytes())

        assert data["kind"] == "densenav.policy"
        assert data["provenance"] == {"source": "fixture"}
        assert data["observation_size"] == 37

    def test_truncated_file(self, tmp_path, model_file_2d) -> None:
        broken = tmp_path / "broken.json"
        broken.write_bytes(model_file_2d.read_bytes()[:200])

        with pytest.raises(ModelLoadError):
            load_model(broken)

    def test_missing_file(self, tmp_path) -> None:
        with pytest.raises(ModelLoadError):
            load_model(tmp_path / "absent.json")

    def test_dimension_mismatch(self, model_file_2d) -> None:
        with pytest.raises(ModelMismatchError, match="2D but the world is 3D"):
            load_model(model_file_2d, expected_dimension=3)

    def test_layout_version_mismatch(self, tmp_path, model_file_2d) -> None:
        data = orjson.loads(model_file_2d.read_bytes())
        data["observation_layout_version"] = 99
        path = tmp_path / "old.json"
        path.write_bytes(orjson.dumps(data))

        with pytest.raises(ModelMismatchError, match="layout"):
            load_model(path)

    def test_wrong_value_count(self, tmp_path, model_file_2d) -> None:
        data = orjson.loads(model_file_2d.read_bytes())
        blob = data["parameters"]["value_head.bias"]
        blob["values"] = blob["values"] + [0.0]
        path = tmp_path / "bad.json"
        path.write_bytes(orjson.dumps(data))

        with pytest.raises(ModelLoadError, match="wrong number"):
            load_model(path)

    def test_non_finite_parameters_refused_on_save(self, tmp_path, tiny_model_2d) -> None:
        with torch.no_grad():
            tiny_model_2d.policy_head.weight[0, 0] = math.inf

        with pytest.raises(ModelCorruptionError):
            save_model(tiny_model_2d, tmp_path / "inf.json")
