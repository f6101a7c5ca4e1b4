"""Result files for bench and train runs: CSV, JSON lines, Markdown and plots."""

from __future__ import annotations

import csv
import io
from collections import defaultdict
from typing import TYPE_CHECKING

import orjson
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

from ..logging_config import get_logger
from .metrics import CSV_COLUMNS, RunOutcome

if TYPE_CHECKING:
    from collections.abc import Iterable, Sequence
    from pathlib import Path

    from ..trainer import RewardCurve
    from .metrics import MetricsRow

logger = get_logger(__name__)

# PNG metadata would otherwise carry the matplotlib version string
_PNG_METADATA: dict[str, str | None] = {"Software": None}


def write_metrics_csv(path: Path, rows: Iterable[MetricsRow]) -> None:
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow(row.to_csv_row())
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(buffer.getvalue(), encoding="utf-8")


def write_outcomes(path: Path, outcomes: Iterable[RunOutcome]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("wb") as f:
        for outcome in outcomes:
            f.write(orjson.dumps(outcome.to_dict()) + b"\n")


def read_outcomes(path: Path) -> list[RunOutcome]:
    return [
        RunOutcome.from_dict(orjson.loads(line))
        for line in path.read_bytes().splitlines()
        if line.strip()
    ]


def _fmt(value: float | None, digits: int = 1) -> str:
    return "n/a" if value is None else f"{value:.{digits}f}"


def summary_markdown(rows: Sequence[MetricsRow]) -> str:
    """Two tables: failures split by cause, then success with extra time."""
    lines = [
        "# Benchmark summary",
        "",
        "## Failures (% of scenarios)",
        "",
        "| Planner | Agents | World | Collision | Stuck | Total failure |",
        "|---|---:|---|---:|---:|---:|",
    ]
    lines += [
        f"| {r.planner} | {r.agent_count} | {r.world_size} | {_fmt(r.pct_collision)} "
        f"| {_fmt(r.pct_stuck)} | {_fmt(r.pct_failure)} |"
        for r in rows
    ]
    lines += [
        "",
        "## Success and extra time to goal",
        "",
        "| Planner | Agents | World | Success (%) | Mean extra time (s) | Cases |",
        "|---|---:|---|---:|---:|---:|",
    ]
    lines += [
        f"| {r.planner} | {r.agent_count} | {r.world_size} | {_fmt(r.pct_success)} "
        f"| {_fmt(r.mean_extra_time, 2)} | {r.n_cases} |"
        for r in rows
    ]
    if any(r.mode_fractions for r in rows):
        lines += [
            "",
            "## Controller modes (fraction of agent steps)",
            "",
            "| Planner | Agents | normal | high_risk | simple | stuck |",
            "|---|---:|---:|---:|---:|---:|",
        ]
        lines += [
            f"| {r.planner} | {r.agent_count} | "
            + " | ".join(
                f"{r.mode_fractions.get(k, 0.0):.3f}"
                for k in ("normal", "high_risk", "simple", "stuck")
            )
            + " |"
            for r in rows
            if r.mode_fractions
        ]
    return "\n".join(lines) + "\n"


def _save(fig: Figure, path: Path) -> None:
    FigureCanvasAgg(fig)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="png", dpi=100, metadata=_PNG_METADATA)


def plot_density(rows: Sequence[MetricsRow], out_dir: Path) -> list[Path]:
    """Success rate and mean extra time against agent count, one line per planner."""
    series: dict[str, list[MetricsRow]] = defaultdict(list)
    for row in rows:
        series[row.planner].append(row)

    targets = [
        ("success_vs_agents.png", "Successful scenarios (%)", lambda r: r.pct_success),
        ("extra_time_vs_agents.png", "Mean extra time to goal (s)", lambda r: r.mean_extra_time),
    ]
    written = []
    for filename, ylabel, value in targets:
        fig = Figure(figsize=(6, 4))
        ax = fig.add_subplot()
        for planner, planner_rows in series.items():
            points = sorted(
                (r.agent_count, value(r)) for r in planner_rows if value(r) is not None
            )
            if points:
                xs, ys = zip(*points, strict=True)
                ax.plot(xs, ys, marker="o", label=planner)
        ax.set_xlabel("Number of agents")
        ax.set_ylabel(ylabel)
        ax.grid(alpha=0.3)
        if series:
            ax.legend()
        path = out_dir / filename
        _save(fig, path)
        written.append(path)
    return written


def write_reward_curves(
    out_dir: Path,
    curves: Sequence[RewardCurve],
    scratch: RewardCurve | None = None,
) -> list[Path]:
    """Per-episode rewards as CSV plus a plot of the rolling means.

    Curriculum stages are laid end to end on one episode axis; the scratch
    curve, when present, shares the axis from episode 0.
    """
    csv_path = out_dir / "reward_curve.csv"
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["run", "stage", "agent_count", "episode", "reward", "rolling"])

    fig = Figure(figsize=(7, 4))
    ax = fig.add_subplot()
    offset = 0
    for curve in curves:
        rolling = curve.rolling
        for i, (reward, mean) in enumerate(zip(curve.episode_rewards, rolling, strict=True)):
            writer.writerow(["curriculum", curve.stage, curve.agent_count, offset + i, reward, mean])
        ax.plot(
            range(offset, offset + len(rolling)),
            rolling,
            label=f"curriculum stage {curve.stage} ({curve.agent_count} agents)",
        )
        offset += len(rolling)
    if scratch is not None:
        rolling = scratch.rolling
        for i, (reward, mean) in enumerate(zip(scratch.episode_rewards, rolling, strict=True)):
            writer.writerow(["scratch", scratch.stage, scratch.agent_count, i, reward, mean])
        ax.plot(
            range(len(rolling)),
            rolling,
            linestyle="--",
            label=f"scratch ({scratch.agent_count} agents)",
        )
    ax.set_xlabel("Episode")
    ax.set_ylabel("Rolling mean episode reward")
    ax.grid(alpha=0.3)
    ax.legend()

    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path.write_text(buffer.getvalue(), encoding="utf-8")
    png_path = out_dir / ("reward_curves.png" if scratch is not None else "reward_curve.png")
    _save(fig, png_path)
    logger.info("Reward curves written", csv=str(csv_path), plot=str(png_path))
    return [csv_path, png_path]


def write_bench_report(
    out_dir: Path,
    rows: Sequence[MetricsRow],
    outcomes: Sequence[RunOutcome],
) -> list[Path]:
    metrics_path = out_dir / "metrics.csv"
    outcomes_path = out_dir / "outcomes.jsonl"
    summary_path = out_dir / "summary.md"
    write_metrics_csv(metrics_path, rows)
    write_outcomes(outcomes_path, outcomes)
    summary_path.write_text(summary_markdown(rows), encoding="utf-8")
    plots = plot_density(rows, out_dir)
    logger.info("Bench report written", out_dir=str(out_dir), rows=len(rows))
    return [metrics_path, outcomes_path, summary_path, *plots]
