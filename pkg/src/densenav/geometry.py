"""Distance and heading helpers shared by the environment and the planners."""

from __future__ import annotations

import math
from collections.abc import Iterable
from typing import TYPE_CHECKING, Protocol

import numpy as np

if TYPE_CHECKING:
    import numpy.typing as npt

    Vector = npt.NDArray[np.float64]


class DimensionMismatchError(ValueError):
    """Raised when vectors or agents of different dimensions are combined."""


class Body(Protocol):
    @property
    def position(self) -> Vector: ...

    @property
    def radius(self) -> float: ...


def row_norms(vectors: Vector) -> Vector:
    """Euclidean norm along the last axis.

    Every distance in the package goes through this so that scalar and
    vectorised paths round identically.
    """
    return np.sqrt(np.sum(vectors * vectors, axis=-1))


def norm(vector: Vector) -> float:
    return float(row_norms(vector[np.newaxis, :])[0])


def surface_distance(a: Body, b: Body) -> float:
    """Center distance minus both radii; negative means overlap."""
    if a.position.shape != b.position.shape:
        raise DimensionMismatchError(
            f"Cannot compare a {a.position.size}D body with a {b.position.size}D body"
        )
    return norm(a.position - b.position) - (a.radius + b.radius)


def d_min(agent: Body, others: Iterable[Body]) -> float:
    """Smallest surface distance from agent to others, +inf when there are none."""
    return min((surface_distance(agent, other) for other in others), default=math.inf)


def pairwise_surface_distances(positions: Vector, radii: Vector) -> Vector:
    """N×N surface distances with +inf on the diagonal."""
    diffs = positions[:, np.newaxis, :] - positions[np.newaxis, :, :]
    distances = row_norms(diffs) - (radii[:, np.newaxis] + radii[np.newaxis, :])
    np.fill_diagonal(distances, np.inf)
    return distances


def normalize_angle(angle: float) -> float:
    """Wrap an angle into (-π, π]."""
    wrapped = math.remainder(angle, math.tau)
    return math.pi if wrapped == -math.pi else wrapped


def clamp(value: float, low: float, high: float) -> float:
    return min(max(value, low), high)


def heading_vector(psi: float, phi: float, dimension: int) -> Vector:
    """Unit vector for azimuth psi and polar angle phi (phi unused in 2D)."""
    if dimension == 2:
        return np.array([math.cos(psi), math.sin(psi)])
    sin_phi = math.sin(phi)
    return np.array([sin_phi * math.cos(psi), sin_phi * math.sin(psi), math.cos(phi)])


def heading_angles(direction: Vector) -> tuple[float, float]:
    """Inverse of heading_vector for a non-zero direction."""
    psi = math.atan2(float(direction[1]), float(direction[0]))
    if direction.size == 2:
        return psi, math.pi / 2
    length = norm(direction)
    phi = math.acos(clamp(float(direction[2]) / length, -1.0, 1.0))
    return psi, phi


def goal_frame(position: Vector, goal: Vector, fallback: Vector) -> Vector:
    """Orthonormal rows whose first axis points at the goal.

    The fallback direction is used when the agent sits on its goal.
    """
    to_goal = goal - position
    length = norm(to_goal)
    e1 = to_goal / length if length > 1e-12 else fallback / norm(fallback)
    if e1.size == 2:
        return np.array([[e1[0], e1[1]], [-e1[1], e1[0]]])
    reference = np.array([0.0, 0.0, 1.0])
    if abs(float(e1 @ reference)) > 0.99:
        reference = np.array([1.0, 0.0, 0.0])
    e2 = np.cross(reference, e1)
    e2 = e2 / norm(e2)
    e3 = np.cross(e1, e2)
    return np.stack([e1, e2, e3])
