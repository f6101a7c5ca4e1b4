import math

import orjson
import pytest

from densenav.env import Action, EpisodeState, step
from densenav.trajectory import read_trajectory, write_trajectory


@pytest.fixture
def state(world_2d, make_agent) -> EpisodeState:
    state = EpisodeState(
        world=world_2d,
        agents=[make_agent(0, (0.0, 0.0), (3.0, 0.0)), make_agent(1, (0.0, 2.0), (0.0, 3.0))],
        label="pair",
        seed=5,
    )
    step(state, {0: Action(1.0), 1: Action(0.5)}, {0: "normal", 1: "simple"})
    return state


class TestTrajectoryLog:
    def test_write_then_read(self, tmp_path, state) -> None:
        path = tmp_path / "logs" / "pair.jsonl"

        write_trajectory(path, state.trajectory_header("hybrid"), state.records)
        log = read_trajectory(path)

        assert log.header.label == "pair"
        assert log.header.seed == 5
        assert log.header.planner == "hybrid"
        assert log.header.collision_check == "sampled"
        assert [m.goal for m in log.header.agents] == [(3.0, 0.0), (0.0, 3.0)]
        assert log.records == state.records

    def test_header_is_first_line(self, tmp_path, state) -> None:
        path = tmp_path / "pair.jsonl"
        write_trajectory(path, state.trajectory_header(), state.records)

        lines = path.read_bytes().splitlines()

        assert orjson.loads(lines[0])["kind"] == "densenav.trajectory"
        assert len(lines) == 1 + len(state.records)

    def test_modes_are_logged(self, state) -> None:
        assert state.records[0].agent(0).mode is None
        assert state.last_record.agent(1).mode == "simple"

    def test_lone_agent_has_no_nearest_neighbor(self, tmp_path, world_2d, make_agent) -> None:
        state = EpisodeState(world=world_2d, agents=[make_agent(0, (0.0, 0.0), (1.0, 0.0))])
        path = tmp_path / "lone.jsonl"

        write_trajectory(path, state.trajectory_header(), state.records)

        assert orjson.loads(path.read_bytes().splitlines()[1])["agents"][0]["d_min"] is None
        assert math.isinf(read_trajectory(path).records[0].agent(0).d_min)

    def test_unknown_agent_in_record(self, state) -> None:
        with pytest.raises(KeyError):
            state.last_record.agent(9)

    def test_empty_file(self, tmp_path) -> None:
        path = tmp_path / "empty.jsonl"
        path.write_bytes(b"")

        with pytest.raises(ValueError, match="empty"):
            read_trajectory(path)
