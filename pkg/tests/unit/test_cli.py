from datetime import UTC, datetime
from unittest.mock import patch

import orjson
import pytest
import time_machine

from densenav.cli import ExitCode, run

STRAIGHT = {"kind": "straight"}


@pytest.fixture
def out(tmp_path):
    return tmp_path / "out"


@pytest.fixture
def failures():
    """Error categories the CLI reported on stderr."""
    with patch("densenav.cli._report_failure") as report:
        yield report


def _run(command: str, config, out, *extra: str) -> int:
    return run([command, "--config", str(config), "--out", str(out), *extra])


def _categories(failures) -> list[str]:
    return [call.args[0] for call in failures.call_args_list]


def _gen_config(write_config, **changes):
    section = {"n": 3, "agent_count": 2}
    return write_config({"seed": 11, "gen_scenarios": section, **changes})


class TestExitCodes:
    def test_invalid_config(self, write_config, out, failures) -> None:
        code = _run("bench", write_config({"sede": 1}), out)

        assert code == ExitCode.CONFIG
        assert _categories(failures) == ["config"]

    def test_missing_config(self, tmp_path, out, failures) -> None:
        code = _run("bench", tmp_path / "nope.json", out)

        assert code == ExitCode.CONFIG

    def test_overfull_world(self, write_config, out, failures) -> None:
        path = write_config({"gen_scenarios": {"n": 1, "agent_count": 500}})

        code = _run("gen-scenarios", path, out)

        assert code == ExitCode.CAPACITY
        assert _categories(failures) == ["capacity"]
        assert not (out / "manifest.json").exists()

    def test_model_dimension_mismatch(self, write_config, out, model_file_2d, failures) -> None:
        path = write_config(
            {
                "world": {"dimension": 3},
                "bench": {
                    "agent_counts": [2],
                    "cases": 1,
                    "planners": [{"kind": "hybrid", "model_path": str(model_file_2d)}],
                },
            }
        )

        code = _run("bench", path, out)

        assert code == ExitCode.MODEL
        assert _categories(failures) == ["model"]

    def test_unknown_flag(self, write_config, out, failures) -> None:
        code = _run("bench", write_config({}), out, "--bogus")

        assert code == ExitCode.USAGE
        assert _categories(failures) == ["usage"]

    def test_unknown_command(self, failures) -> None:
        assert run(["fly"]) == ExitCode.USAGE

    def test_version(self, failures) -> None:
        assert run(["--version"]) == ExitCode.OK
        failures.assert_not_called()

    def test_learned_planner_without_model(self, write_config, out, failures) -> None:
        path = write_config({})

        code = _run("simulate", path, out, "--planner", "hybrid")

        assert code == ExitCode.CONFIG

    def test_zero_workers(self, write_config, out, failures) -> None:
        code = _run("gen-scenarios", write_config({}), out, "--workers", "0")

        assert code == ExitCode.CONFIG

    def test_render_needs_inputs(self, write_config, out, failures) -> None:
        assert _run("render", write_config({}), out) == ExitCode.CONFIG


class TestManifest:
    @time_machine.travel(datetime(2026, 3, 1, 12, 0, tzinfo=UTC), tick=False)
    def test_written_after_every_run(self, write_config, out) -> None:
        assert _run("gen-scenarios", _gen_config(write_config), out) == 0

        manifest = orjson.loads((out / "manifest.json").read_bytes())
        assert manifest["kind"] == "densenav.manifest"
        assert manifest["command"] == "gen-scenarios"
        assert manifest["seed"] == 11
        assert manifest["created_at"] == "2026-03-01T12:00:00+00:00"
        assert manifest["outputs"] == [f"scenarios/random-2a-{i:03d}.json" for i in range(3)]
        assert manifest["deterministic"] is False

    def test_seed_override_is_recorded(self, write_config, out) -> None:
        path = _gen_config(write_config)

        assert _run("gen-scenarios", path, out, "--seed", "5") == 0

        manifest = orjson.loads((out / "manifest.json").read_bytes())
        assert manifest["seed"] == 5
        assert manifest["config"]["seed"] == 5

    def test_rerun_from_manifest_reproduces_outputs(self, write_config, tmp_path) -> None:
        first, second = tmp_path / "first", tmp_path / "second"
        _run("gen-scenarios", _gen_config(write_config), first)

        code = _run("gen-scenarios", first / "manifest.json", second)

        assert code == 0
        for name in ("random-2a-000.json", "random-2a-002.json"):
            assert (first / "scenarios" / name).read_bytes() == (
                second / "scenarios" / name
            ).read_bytes()
        one = orjson.loads((first / "manifest.json").read_bytes())
        two = orjson.loads((second / "manifest.json").read_bytes())
        assert one["config_digest"] == two["config_digest"]
        assert one["outputs_digest"] == two["outputs_digest"]

    def test_deterministic_flag(self, write_config, out) -> None:
        path = _gen_config(write_config)

        with patch("densenav.cli.torch") as torch:
            code = _run("gen-scenarios", path, out, "--deterministic")

        assert code == 0
        torch.set_num_threads.assert_called_once_with(1)
        assert orjson.loads((out / "manifest.json").read_bytes())["deterministic"] is True


class TestSimulate:
    def test_writes_log_outcome_and_plot(self, write_config, out) -> None:
        path = write_config(
            {
                "simulate": {
                    "scenario": "swap",
                    "lateral_offset": 2.0,
                    "planner": STRAIGHT,
                }
            }
        )

        assert _run("simulate", path, out) == 0

        outcome = orjson.loads((out / "outcome.json").read_bytes())
        assert outcome["outcome"] == "success"
        assert outcome["planner"] == "straight"
        for name in ("scenario.json", "trajectory.jsonl", "trajectory.svg", "manifest.json"):
            assert (out / name).exists()

    def test_planner_flag_replaces_config(self, write_config, out) -> None:
        path = write_config({"simulate": {"scenario": "swap", "render": False}})

        assert _run("simulate", path, out, "--planner", "straight") == 0

        outcome = orjson.loads((out / "outcome.json").read_bytes())
        assert outcome["planner"] == "straight"
        assert outcome["outcome"] == "collision"
        assert not (out / "trajectory.svg").exists()

    def test_render_command_reads_logs(self, write_config, out, tmp_path) -> None:
        sim_out = tmp_path / "sim"
        sim = write_config(
            {"simulate": {"scenario": "swap", "lateral_offset": 2.0, "planner": STRAIGHT}},
            "sim.json",
        )
        _run("simulate", sim, sim_out)
        path = write_config(
            {"render": {"trajectories": [str(sim_out / "trajectory.jsonl")]}}, "render.json"
        )

        assert _run("render", path, out) == 0

        rendered = (out / "trajectory.svg").read_bytes()
        assert rendered == (sim_out / "trajectory.svg").read_bytes()
