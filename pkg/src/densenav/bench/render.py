"""Static SVG rendering of trajectory logs."""

from __future__ import annotations

import io
from typing import TYPE_CHECKING

import matplotlib as mpl
import numpy as np
from matplotlib.backends.backend_svg import FigureCanvasSVG
from matplotlib.figure import Figure

from ..logging_config import get_logger
from ..models import AgentStatus
from ..trajectory import read_trajectory

if TYPE_CHECKING:
    from pathlib import Path

    from ..trajectory import TrajectoryLog

logger = get_logger(__name__)

# fixed salt keeps generated element ids stable across runs
_SVG_RC = {"svg.hashsalt": "densenav", "svg.fonttype": "none"}


class EmptyTrajectoryError(ValueError):
    pass


def render_svg(log: TrajectoryLog) -> bytes:
    """One polyline per agent with start, goal and collision markers.

    3D logs are drawn as a top-down (x, y) projection.
    """
    if not log.records:
        raise EmptyTrajectoryError(f"Trajectory '{log.header.label}' has no steps")

    header = log.header
    half_x, half_y = header.bounds[0] / 2, header.bounds[1] / 2
    palette = mpl.colormaps["tab10"]

    fig = Figure(figsize=(6, 6))
    FigureCanvasSVG(fig)
    ax = fig.add_subplot()
    ax.set_xlim(-half_x, half_x)
    ax.set_ylim(-half_y, half_y)
    ax.set_aspect("equal")
    ax.set_xlabel("x (m)")
    ax.set_ylabel("y (m)")
    title = header.label if header.planner is None else f"{header.label} ({header.planner})"
    ax.set_title(title)

    for i, marker in enumerate(header.agents):
        color = palette(i % palette.N)
        path = np.array([record.agent(marker.id).position[:2] for record in log.records])

        (line,) = ax.plot(path[:, 0], path[:, 1], color=color, linewidth=1.2)
        line.set_gid(f"trajectory-{marker.id}")
        (start,) = ax.plot(*path[0], marker="o", color=color, markersize=5)
        start.set_gid(f"start-{marker.id}")
        (goal,) = ax.plot(*marker.goal[:2], marker="*", color=color, markersize=9)
        goal.set_gid(f"goal-{marker.id}")

        hit = next(
            (
                record.agent(marker.id).position[:2]
                for record in log.records
                if record.agent(marker.id).status is AgentStatus.COLLIDED
            ),
            None,
        )
        if hit is not None:
            (cross,) = ax.plot(*hit, marker="x", color="red", markersize=10, mew=2)
            cross.set_gid(f"collision-{marker.id}")

    if header.dimension == 3:
        note = ax.text(
            0.01, 0.01, "top-down projection (z omitted)", transform=ax.transAxes, fontsize=8
        )
        note.set_gid("projection-note")

    buffer = io.BytesIO()
    with mpl.rc_context(_SVG_RC):
        fig.savefig(buffer, format="svg", metadata={"Date": None})
    return buffer.getvalue()


def render_file(source: Path, target: Path) -> None:
    svg = render_svg(read_trajectory(source))
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_bytes(svg)
    logger.info("Rendered trajectory", source=str(source), target=str(target))
