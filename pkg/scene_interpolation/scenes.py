"""Synthetic articulated scenes with closed-form motions.

Every scene is made of box-shaped parts sampled uniformly on their surface.
The end state applies a parametric motion to the start state, so point i of
the start cloud and point i of the end cloud are the same material point.
"""
import typing as T
from dataclasses import dataclass

import numpy as np

from .common import (
    Checkpoint,
    ParameterError,
    PointCloud,
    SceneKind,
    Trajectory,
)
from .config import SceneSpec
from .geometry import rotation_about_axis
from .interpolation import progress_alpha

STATIC_PART = 0
MOVING_PART = 1


@dataclass(frozen=True)
class SceneSample:
    """Start and end clouds of a scene; correspondence is by index."""

    start: PointCloud
    end: PointCloud

    @property
    def part_labels(self) -> np.ndarray:
        """Part tag of every point."""
        return self.start.part_labels


def _sample_box_surface(
    rng: np.random.Generator,
    count: int,
    lower: np.ndarray,
    upper: np.ndarray,
) -> np.ndarray:
    """Uniform samples on the surface of an axis-aligned box."""
    extent = upper - lower
    # Face pairs orthogonal to x, y and z, weighted by area.
    areas = np.array(
        [
            extent[1] * extent[2],
            extent[0] * extent[2],
            extent[0] * extent[1],
        ]
    )
    axes = rng.choice(3, size=count, p=areas / areas.sum())
    sides = rng.integers(0, 2, size=count)
    points = lower + rng.random((count, 3)) * extent
    rows = np.arange(count)
    points[rows, axes] = np.where(sides == 1, upper[axes], lower[axes])
    return points


def _part_boxes(
    spec: SceneSpec,
) -> T.List[T.Tuple[int, np.ndarray, np.ndarray]]:
    pivot = np.asarray(spec.pivot, dtype=np.float64)
    half = spec.thickness / 2.0
    cross = np.array([0.0, half, half])
    ahead = pivot + np.array([spec.segment_length, 0.0, 0.0])
    behind = pivot - np.array([spec.segment_length, 0.0, 0.0])
    if spec.kind == SceneKind.HINGE:
        return [
            (STATIC_PART, behind - cross, pivot + cross),
            (MOVING_PART, pivot - cross, ahead + cross),
        ]
    return [(STATIC_PART, pivot - cross, ahead + cross)]


def _bend(
    positions: np.ndarray, pivot: np.ndarray, curvature: float
) -> np.ndarray:
    """Bend a beam lying along +x from the pivot into a circular arc.

    The centreline keeps its length; offsets along y follow the arc normal.
    """
    local = positions - pivot
    along, offset = local[:, 0], local[:, 1]
    theta = curvature * along
    bent = local.copy()
    # sin(theta) / curvature and (1 - cos(theta)) / curvature, stable at 0
    bent[:, 0] = along * np.sinc(theta / np.pi) - offset * np.sin(theta)
    bent[:, 1] = along * np.sin(theta / 2.0) * np.sinc(
        theta / (2.0 * np.pi)
    ) + offset * np.cos(theta)
    return bent + pivot


def _rotate(
    positions: np.ndarray, pivot: np.ndarray, axis: T.Any, angle: float
) -> np.ndarray:
    rotation = rotation_about_axis(axis, angle)
    return (positions - pivot) @ rotation.T + pivot


def apply_motion(
    spec: SceneSpec,
    positions: np.ndarray,
    part_labels: np.ndarray,
    fraction: float = 1.0,
) -> np.ndarray:
    """Apply the scene's motion scaled to ``fraction`` of its amplitude.

    :param spec: scene parameters
    :param positions: N x 3 start positions
    :param part_labels: N part tags; only the moving part turns for a hinge
    :param fraction: 0 keeps the start state, 1 reaches the end state
    :returns: moved N x 3 positions
    """
    positions = np.asarray(positions, dtype=np.float64)
    if fraction == 0.0:
        return positions.copy()
    pivot = np.asarray(spec.pivot, dtype=np.float64)

    if spec.kind == SceneKind.RIGID_TRANSLATE:
        return positions + fraction * np.asarray(spec.translation)
    if spec.kind == SceneKind.BEND:
        if spec.curvature == 0.0:
            return positions.copy()
        return _bend(positions, pivot, fraction * spec.curvature)
    if spec.angle == 0.0:
        return positions.copy()
    if spec.kind == SceneKind.RIGID_ROTATE:
        return _rotate(positions, pivot, spec.axis, fraction * spec.angle)

    moved = positions.copy()
    moving = np.asarray(part_labels) == MOVING_PART
    moved[moving] = _rotate(
        positions[moving], pivot, spec.axis, fraction * spec.angle
    )
    return moved


def generate(spec: SceneSpec) -> SceneSample:
    """Sample the start state of a scene and move it to the end state.

    :param spec: scene parameters
    :raises ParameterError: on degenerate part dimensions
    :returns: start and end clouds with part labels
    """
    if not spec.segment_length > 0.0 or not spec.thickness > 0.0:
        raise ParameterError(
            "Scene parts need positive segment_length and thickness, got "
            f"{spec.segment_length} and {spec.thickness}."
        )
    rng = np.random.default_rng(spec.rng_seed)
    chunks = []
    labels = []
    for label, lower, upper in _part_boxes(spec):
        chunks.append(
            _sample_box_surface(rng, spec.points_per_part, lower, upper)
        )
        labels.append(np.full(spec.points_per_part, label, dtype=np.int64))
    positions = np.concatenate(chunks)
    part_labels = np.concatenate(labels)
    if spec.noise_sigma > 0.0:
        positions += rng.normal(0.0, spec.noise_sigma, positions.shape)

    end = apply_motion(spec, positions, part_labels)
    return SceneSample(
        PointCloud(positions, part_labels=part_labels),
        PointCloud(end, part_labels=part_labels),
    )


def ground_truth_trajectory(spec: SceneSpec, steps: int) -> Trajectory:
    """Sweep the scene's motion parameter evenly from start to end.

    :param spec: scene parameters
    :param steps: number of checkpoints, at least 2
    :raises ParameterError: if steps < 2 or the spec is degenerate
    :returns: trajectory with progress values attached
    """
    if steps < 2:
        raise ParameterError(f"steps must be at least 2, got {steps}.")
    sample = generate(spec)
    start = sample.start.positions
    labels = sample.part_labels
    fractions = [step / (steps - 1) for step in range(steps)]
    states = [apply_motion(spec, start, labels, s) for s in fractions[:-1]]
    states.append(sample.end.positions)

    end = states[-1]
    fallback = progress_alpha(end, start, end) is None
    if fallback:
        alphas = fractions
    else:
        inner = [progress_alpha(state, start, end) for state in states[1:-1]]
        alphas = [0.0] + inner + [1.0]
    return Trajectory(
        [
            Checkpoint(step, state, alpha)
            for step, (state, alpha) in enumerate(zip(states, alphas))
        ],
        alpha_fallback=fallback,
        part_labels=labels,
    )
