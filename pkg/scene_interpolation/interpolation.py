"""Progress measurement and sampling of intermediate states."""
import typing as T

import numpy as np

from .common import (
    ParameterError,
    PointCloud,
    Trajectory,
    as_positions,
    check_same_shape,
)

# Below this total travelled distance the progress ratio is undefined.
UNDEFINED_PROGRESS_THRESHOLD = 1e-12


def progress_alpha(
    positions_t: T.Any, start: T.Any, end: T.Any
) -> T.Optional[float]:
    """Fraction of the total distance travelled by all points.

    alpha = sum_i |p_i^t - p_i^0| / sum_i |p_i^T - p_i^0| with plain
    Euclidean norms.

    :param positions_t: N x 3 positions at the queried state
    :param start: N x 3 start positions
    :param end: N x 3 end positions
    :raises ParameterError: on mismatched shapes
    :returns: the progress, or None when the points do not move between
        start and end (the caller falls back to the iteration fraction)
    """
    current = as_positions(positions_t, "positions_t")
    start = as_positions(start, "start")
    end = as_positions(end, "end")
    check_same_shape(current, start, end)

    total = float(np.sum(np.linalg.norm(end - start, axis=1)))
    if total < UNDEFINED_PROGRESS_THRESHOLD:
        return None
    travelled = float(np.sum(np.linalg.norm(current - start, axis=1)))
    return travelled / total


def blend_attributes(
    attrs_start: T.Any, attrs_end: T.Any, alpha: float
) -> np.ndarray:
    """Linear blend (1 - alpha) * start + alpha * end.

    :raises ParameterError: on mismatched shapes or alpha outside [0, 1]
    """
    if not 0.0 <= alpha <= 1.0:
        raise ParameterError(f"alpha must lie in [0, 1], got {alpha}.")
    attrs_start = np.asarray(attrs_start, dtype=np.float64)
    attrs_end = np.asarray(attrs_end, dtype=np.float64)
    check_same_shape(attrs_start, attrs_end)
    if alpha == 0.0:
        return attrs_start.copy()
    if alpha == 1.0:
        return attrs_end.copy()
    return (1.0 - alpha) * attrs_start + alpha * attrs_end


def checkpoint_attributes(
    trajectory: Trajectory, alpha: float
) -> T.Optional[np.ndarray]:
    """Attributes at progress ``alpha`` (clamped), if both ends carry any."""
    if trajectory.start_attributes is None:
        return None
    if trajectory.end_attributes is None:
        return trajectory.start_attributes
    return blend_attributes(
        trajectory.start_attributes,
        trajectory.end_attributes,
        min(max(alpha, 0.0), 1.0),
    )


def sample_state(trajectory: Trajectory, alpha_query: float) -> PointCloud:
    """Interpolate the point cloud at a given progress value.

    Positions are interpolated linearly between the two checkpoints that
    bracket ``alpha_query``. Stored alphas may oscillate; a running maximum
    of them is used for bracketing only.

    :param trajectory: trajectory with at least two checkpoints
    :param alpha_query: progress in [0, 1]
    :raises ParameterError: on a too short trajectory or alpha out of range
    :returns: the interpolated state
    """
    if len(trajectory) < 2:
        raise ParameterError(
            "Sampling needs a trajectory with at least two checkpoints."
        )
    if not 0.0 <= alpha_query <= 1.0:
        raise ParameterError(
            f"alpha_query must lie in [0, 1], got {alpha_query}."
        )

    checkpoints = trajectory.checkpoints
    if alpha_query == 0.0:
        positions = checkpoints[0].positions.copy()
    elif alpha_query == 1.0:
        positions = checkpoints[-1].positions.copy()
    else:
        monotone = np.maximum.accumulate(trajectory.alphas)
        upper = int(np.searchsorted(monotone, alpha_query, side="left"))
        if upper >= len(checkpoints):
            positions = checkpoints[-1].positions.copy()
        else:
            # monotone[0] == 0 < alpha_query, hence upper >= 1
            lower = upper - 1
            weight = (alpha_query - monotone[lower]) / (
                monotone[upper] - monotone[lower]
            )
            positions = (1.0 - weight) * checkpoints[
                lower
            ].positions + weight * checkpoints[upper].positions

    return PointCloud(
        positions,
        attributes=checkpoint_attributes(trajectory, alpha_query),
        part_labels=trajectory.part_labels,
    )
