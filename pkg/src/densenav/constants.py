import math
from pathlib import Path
from typing import Final

# src/densenav/constants.py -> ../.. -> project root
PROJECT_ROOT: Final[Path] = Path(__file__).resolve().parent.parent.parent

# ─────────────────────────────────────────────────────────────────────────────
# File Schemas
# ─────────────────────────────────────────────────────────────────────────────

SCENARIO_SCHEMA: Final[str] = "densenav.scenario"
SCENARIO_SCHEMA_VERSION: Final[int] = 1
TRAJECTORY_SCHEMA: Final[str] = "densenav.trajectory"
TRAJECTORY_SCHEMA_VERSION: Final[int] = 1
MODEL_SCHEMA: Final[str] = "densenav.policy"
MODEL_SCHEMA_VERSION: Final[int] = 1
MANIFEST_SCHEMA: Final[str] = "densenav.manifest"
OBSERVATION_LAYOUT_VERSION: Final[int] = 1

# ─────────────────────────────────────────────────────────────────────────────
# Kinematics
# ─────────────────────────────────────────────────────────────────────────────

HEADING_CAP: Final[float] = math.pi / 6
MOVE_EPSILON: Final[float] = 0.02
MIN_ARRIVAL_TOLERANCE: Final[float] = 0.1
SPEED_TOLERANCE: Final[float] = 1e-9

TRAIN_DT: Final[float] = 0.2
EVAL_DT: Final[float] = 0.1
DEFAULT_T_MAX: Final[float] = 50.0
DEFAULT_NEIGHBOR_RADIUS: Final[float] = 4.0
NEIGHBOR_SLOTS: Final[int] = 4

DEFAULT_BOUNDS_2D: Final[tuple[float, float]] = (8.0, 8.0)
DEFAULT_BOUNDS_3D: Final[tuple[float, float, float]] = (8.0, 8.0, 4.0)

# ─────────────────────────────────────────────────────────────────────────────
# Scenario Sampling
# ─────────────────────────────────────────────────────────────────────────────

RADIUS_RANGE: Final[tuple[float, float]] = (0.2, 0.8)
V_PREF_RANGE: Final[tuple[float, float]] = (0.5, 2.0)
PLACEMENT_MARGIN: Final[float] = 0.1
MAX_PLACEMENT_ATTEMPTS: Final[int] = 10_000

# ─────────────────────────────────────────────────────────────────────────────
# Force Model
# ─────────────────────────────────────────────────────────────────────────────

DEFAULT_RHO: Final[float] = 7.5e6
DEFAULT_C1: Final[float] = 1.0
DEFAULT_C2: Final[float] = 2.0
# Closing displacement per step is held below half the surface gap minus this.
STEP_GUARD_MARGIN: Final[float] = 1e-3
# Below this share of its speed in progress, a blocked agent slides around the blocker.
DETOUR_SPEED_FRACTION: Final[float] = 0.5

DEFAULT_C_STUCK: Final[int] = 20
# Goal progress the force planner must make after a stuck trigger before handing back.
DEFAULT_STUCK_RELEASE: Final[float] = 1.0
