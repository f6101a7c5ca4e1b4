"""Command-line entry point.

Every command reads a JSON run config, writes all outputs under --out and
finishes with a manifest.json that can itself be passed back as --config to
reproduce the run.
"""

from __future__ import annotations

import argparse
import sys
from datetime import UTC, datetime
from enum import IntEnum
from pathlib import Path
from typing import TYPE_CHECKING

import numpy as np
import orjson
import torch
from pydantic import ValidationError

from . import __version__
from .bench.render import render_file, render_svg
from .bench.report import write_bench_report, write_reward_curves
from .bench.runner import SafetyViolationError, evaluate, run_scenario
from .bench.scenarios import (
    ScenarioCapacityError,
    antipodal_circle,
    generate_scenarios,
    symmetric_swap,
)
from .config import ConfigError, get_settings, load_run_config
from .constants import MANIFEST_SCHEMA
from .geometry import DimensionMismatchError
from .logging_config import configure_logging, get_logger
from .models import Scenario
from .planner_registry import PlannerKind, PlannerSpec, create_planner
from .policy import ModelCorruptionError, ModelLoadError, ModelMismatchError, save_model
from .trainer import RewardInvariantError, TrainingDivergenceError, train_curriculum
from .trajectory import write_trajectory
from .utils.hashing import get_json_hash, get_tree_hash
from .worker import default_worker_count

if TYPE_CHECKING:
    from collections.abc import Callable, Sequence

    from .config import RunConfig

logger = get_logger(__name__)


class ExitCode(IntEnum):
    OK = 0
    UNEXPECTED = 1
    USAGE = 2
    CONFIG = 3
    CAPACITY = 4
    MODEL = 5
    SAFETY = 6
    DIVERGENCE = 7


# (exception types, error category, exit code), checked in order
_FAILURES: tuple[tuple[tuple[type[BaseException], ...], str, ExitCode], ...] = (
    ((ConfigError, ValidationError), "config", ExitCode.CONFIG),
    ((ScenarioCapacityError,), "capacity", ExitCode.CAPACITY),
    (
        (ModelLoadError, ModelMismatchError, ModelCorruptionError, DimensionMismatchError),
        "model",
        ExitCode.MODEL,
    ),
    ((SafetyViolationError,), "safety", ExitCode.SAFETY),
    ((TrainingDivergenceError,), "divergence", ExitCode.DIVERGENCE),
    ((RewardInvariantError,), "reward_invariant", ExitCode.UNEXPECTED),
)


def code_version() -> str:
    """Digest of the package sources, recorded in every manifest."""
    package = Path(__file__).resolve().parent
    return get_tree_hash(package.rglob("*.py"), package)


# ─────────────────────────────────────────────────────────────────────────────
# Commands
# ─────────────────────────────────────────────────────────────────────────────


def _relative(paths: Sequence[Path], out: Path) -> list[str]:
    return sorted(path.relative_to(out).as_posix() for path in paths)


def cmd_train(config: RunConfig, out: Path, _workers: int) -> list[Path]:
    train_config = config.train.model_copy(update={"seed": config.seed})
    result = train_curriculum(train_config, out_dir=out)

    model_path = out / "model.json"
    save_model(result.model, model_path, provenance=train_config.provenance())
    outputs = [model_path, *sorted((out / "checkpoints").glob("*.json"))]
    outputs += write_reward_curves(
        out,
        result.curves,
        scratch=result.scratch.curve if result.scratch is not None else None,
    )
    for curve in result.curves:
        logger.info(
            "Stage reward",
            stage=curve.stage,
            agent_count=curve.agent_count,
            initial_rolling=curve.initial_rolling,
            final_rolling=curve.final_rolling,
        )
    return outputs


def _simulate_scenario(config: RunConfig) -> Scenario:
    section = config.simulate
    match section.scenario:
        case "file":
            assert section.scenario_path is not None
            try:
                return Scenario.load(section.scenario_path)
            except OSError as e:
                raise ConfigError(f"Cannot read scenario {section.scenario_path}: {e}") from e
        case "circle":
            return antipodal_circle(
                section.agent_count, config.world, circle_radius=section.circle_radius
            )
        case "swap":
            return symmetric_swap(config.world, lateral_offset=section.lateral_offset)
        case "random":
            return generate_scenarios(1, section.agent_count, config.world, config.seed)[0]


def cmd_simulate(config: RunConfig, out: Path, _workers: int) -> list[Path]:
    section = config.simulate
    scenario = _simulate_scenario(config)
    planner = create_planner(section.planner, scenario.world.dimension)

    run = run_scenario(
        planner,
        scenario,
        planner_name=section.planner.name,
        dt=scenario.world.dt,
        safety_checks=section.safety_checks,
        keep_trajectory=True,
    )
    assert run.trajectory is not None

    scenario_path = out / "scenario.json"
    scenario.save(scenario_path)
    trajectory_path = out / "trajectory.jsonl"
    write_trajectory(trajectory_path, run.trajectory.header, run.trajectory.records)
    outcome_path = out / "outcome.json"
    outcome_path.write_bytes(
        orjson.dumps(run.outcome.to_dict(), option=orjson.OPT_INDENT_2) + b"\n"
    )
    outputs = [scenario_path, trajectory_path, outcome_path]
    if section.render:
        svg_path = out / "trajectory.svg"
        svg_path.write_bytes(render_svg(run.trajectory))
        outputs.append(svg_path)

    logger.info(
        "Simulation finished",
        label=scenario.label,
        planner=section.planner.name,
        outcome=run.outcome.outcome.value,
        steps=run.outcome.steps,
    )
    return outputs


def _count_seed(seed: int, agent_count: int) -> int:
    """Scenario seed for one density, shared by every planner of the sweep."""
    state = np.random.SeedSequence([seed, agent_count]).generate_state(1, np.uint64)
    return int(state[0])


def cmd_bench(config: RunConfig, out: Path, workers: int) -> list[Path]:
    section = config.bench
    world = config.world
    # build every planner first so a bad model fails before any scenario runs
    for spec in section.planners:
        create_planner(spec, world.dimension)

    scenarios = [
        scenario
        for count in section.agent_counts
        for scenario in generate_scenarios(
            section.cases, count, world, _count_seed(config.seed, count)
        )
    ]

    rows = []
    outcomes = []
    trajectories: list[Path] = []
    for spec in section.planners:
        evaluation = evaluate(
            spec,
            scenarios,
            workers=workers,
            dt=world.dt,
            safety_checks=section.safety_checks,
            keep_trajectories=section.keep_trajectories,
        )
        rows.extend(evaluation.rows)
        outcomes.extend(evaluation.outcomes)
        for run in evaluation.runs:
            if run.trajectory is not None:
                path = out / "trajectories" / spec.name / f"{run.outcome.label}.jsonl"
                write_trajectory(path, run.trajectory.header, run.trajectory.records)
                trajectories.append(path)

    return [*write_bench_report(out, rows, outcomes), *trajectories]


def cmd_render(config: RunConfig, out: Path, _workers: int) -> list[Path]:
    sources = config.render.trajectories
    if not sources:
        raise ConfigError("render.trajectories lists no trajectory logs")
    outputs = []
    for source in sources:
        target = out / f"{source.stem}.svg"
        try:
            render_file(source, target)
        except OSError as e:
            raise ConfigError(f"Cannot read trajectory {source}: {e}") from e
        outputs.append(target)
    return outputs


def cmd_gen_scenarios(config: RunConfig, out: Path, _workers: int) -> list[Path]:
    section = config.gen_scenarios
    outputs = []
    for scenario in generate_scenarios(
        section.n, section.agent_count, config.world, config.seed
    ):
        path = out / "scenarios" / f"{scenario.label}.json"
        scenario.save(path)
        outputs.append(path)
    logger.info("Scenarios written", n=len(outputs), agent_count=section.agent_count)
    return outputs


COMMANDS: dict[str, Callable[[RunConfig, Path, int], list[Path]]] = {
    "train": cmd_train,
    "simulate": cmd_simulate,
    "bench": cmd_bench,
    "render": cmd_render,
    "gen-scenarios": cmd_gen_scenarios,
}


# ─────────────────────────────────────────────────────────────────────────────
# Entry Point
# ─────────────────────────────────────────────────────────────────────────────


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, required=True, help="JSON run config or manifest")
    common.add_argument("--out", type=Path, required=True, help="Output directory")
    common.add_argument("--seed", type=int, default=None, help="Override the config seed")
    common.add_argument(
        "--workers", type=int, default=None, help="Worker processes (default: all CPUs)"
    )
    common.add_argument(
        "--deterministic",
        action="store_true",
        help="Single worker and single-threaded torch",
    )
    common.add_argument(
        "--planner",
        choices=[kind.value for kind in PlannerKind],
        default=None,
        help="Replace the configured planner(s)",
    )
    common.add_argument("--model", type=Path, default=None, help="Policy model file")

    parser = argparse.ArgumentParser(
        prog="densenav", description="Multi-agent motion planning in dense crowds"
    )
    parser.add_argument("--version", action="version", version=f"densenav {__version__}")
    subparsers = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("train", "Train a policy with the stage curriculum"),
        ("simulate", "Run one scenario and log its trajectory"),
        ("bench", "Evaluate planners over seeded random scenarios"),
        ("render", "Draw trajectory logs as SVG"),
        ("gen-scenarios", "Write seeded random scenario files"),
    ):
        subparsers.add_parser(name, parents=[common], help=help_text)
    return parser


def _apply_overrides(config: RunConfig, args: argparse.Namespace) -> RunConfig:
    changes: dict[str, object] = {}
    if args.seed is not None:
        changes["seed"] = args.seed

    model_path = args.model.resolve() if args.model is not None else None
    if args.planner is not None:
        base = config.simulate.planner
        spec = PlannerSpec(
            kind=PlannerKind(args.planner),
            model_path=model_path,
            fmp=base.fmp,
            hybrid=base.hybrid,
        )
        changes["simulate"] = config.simulate.model_copy(update={"planner": spec})
        changes["bench"] = config.bench.model_copy(update={"planners": (spec,)})
    elif model_path is not None:

        def with_model(spec: PlannerSpec) -> PlannerSpec:
            if spec.kind in (PlannerKind.POLICY, PlannerKind.HYBRID):
                return spec.model_copy(update={"model_path": model_path})
            return spec

        changes["simulate"] = config.simulate.model_copy(
            update={"planner": with_model(config.simulate.planner)}
        )
        changes["bench"] = config.bench.model_copy(
            update={"planners": tuple(with_model(s) for s in config.bench.planners)}
        )
    return config.with_overrides(**changes) if changes else config


def write_manifest(
    out: Path,
    command: str,
    config: RunConfig,
    *,
    deterministic: bool,
    outputs: Sequence[Path],
) -> Path:
    manifest = {
        "kind": MANIFEST_SCHEMA,
        "version": 1,
        "command": command,
        "seed": config.seed,
        "deterministic": deterministic,
        "densenav_version": __version__,
        "code_version": code_version(),
        "config_digest": config.digest(),
        "config": config.snapshot(),
        "outputs": _relative(outputs, out),
        "outputs_digest": get_json_hash(_relative(outputs, out)),
        "created_at": datetime.now(UTC).isoformat(),
    }
    path = out / "manifest.json"
    path.write_bytes(orjson.dumps(manifest, option=orjson.OPT_INDENT_2) + b"\n")
    return path


def _report_failure(category: str, error: BaseException) -> None:
    line = orjson.dumps({"error": category, "message": str(error)})
    sys.stderr.write(line.decode() + "\n")
    sys.stderr.flush()


def run(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        code = e.code if isinstance(e.code, int) else ExitCode.USAGE
        if code != ExitCode.OK:
            _report_failure("usage", ValueError("invalid command line, see usage above"))
        return code

    configure_logging(get_settings().LOG_LEVEL)
    log = logger.bind(command=args.command)

    try:
        config = load_run_config(args.config)
        if config.log_level is not None:
            configure_logging(config.log_level)
        config = _apply_overrides(config, args)

        if args.workers is not None and args.workers < 1:
            raise ConfigError(f"--workers must be at least 1, got {args.workers}")
        workers = 1 if args.deterministic else (args.workers or default_worker_count())
        if args.deterministic:
            torch.set_num_threads(1)

        args.out.mkdir(parents=True, exist_ok=True)
        log.info("Run starting", seed=config.seed, workers=workers, out=str(args.out))
        outputs = COMMANDS[args.command](config, args.out, workers)
        write_manifest(
            args.out,
            args.command,
            config,
            deterministic=args.deterministic,
            outputs=outputs,
        )
        log.info("Run finished", outputs=len(outputs))
        return ExitCode.OK
    except Exception as e:
        for types, category, code in _FAILURES:
            if isinstance(e, types):
                log.error("Run failed", category=category, error=str(e))
                _report_failure(category, e)
                return code
        log.error("Run failed", category="unexpected", error=str(e), exc_info=True)
        _report_failure("unexpected", e)
        return ExitCode.UNEXPECTED


def main() -> int:
    return run()
