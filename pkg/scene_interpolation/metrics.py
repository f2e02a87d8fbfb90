"""Geometry distances and the scene interpolation metric.

Conventions:

* Chamfer distance is symmetric and mean-normalized over squared Euclidean
  nearest-neighbour distances.
* Earth mover's distance uses the linear Euclidean ground cost, unit mass
  per point and equal-size clouds.
* The scene interpolation metric integrates the per-checkpoint quality
  f_t = (1 - alpha_t) d(start, P_t) + alpha_t d(end, P_t) over alpha with
  the trapezoidal rule.
"""
import logging
import typing as T

import numpy as np
from pydantic import BaseModel, ConfigDict
from scipy.optimize import linear_sum_assignment
from scipy.spatial import cKDTree
from scipy.spatial.distance import cdist
from scipy.special import logsumexp

from .common import (
    DistanceKind,
    ParameterError,
    PointCloud,
    SolverError,
    Trajectory,
)
from .geometry import NeighborGraph

logger = logging.getLogger(__name__)

DEFAULT_MAX_EXACT_POINTS = 2000
ENTROPIC_EPSILON_SCALE = 0.01

CONVENTIONS = {
    "chamfer": (
        "symmetric sum of the mean squared Euclidean nearest-neighbour "
        "distance in both directions"
    ),
    "emd": (
        "minimum over bijections of the mean Euclidean distance between "
        "matched points; equal-size clouds, unit mass per point"
    ),
    "emd_entropic": (
        "transport cost of the entropically regularized plan between "
        "uniform marginals, Euclidean ground cost, log-domain scaling"
    ),
    "step_quality": "(1 - alpha) * d(gt_start, P_t) + alpha * d(gt_end, P_t)",
    "aggregate": "sum_t (alpha_t - alpha_{t-1}) * (f_t + f_{t-1}) / 2",
    "ground_truth": (
        "gt_start and gt_end are the fit's start cloud and target end cloud"
    ),
}

PointsLike = T.Union[PointCloud, np.ndarray]
DistanceFn = T.Callable[[PointsLike, PointsLike], float]


def _points(cloud: PointsLike, name: str) -> np.ndarray:
    if isinstance(cloud, PointCloud):
        return cloud.positions
    points = np.asarray(cloud, dtype=np.float64)
    if points.ndim != 2 or points.shape[1] != 3:
        raise ParameterError(
            f"{name} must have shape (N, 3), got {points.shape}."
        )
    if points.shape[0] == 0:
        raise ParameterError(f"{name} is empty.")
    return points


def nearest_matches(
    source: np.ndarray, target: np.ndarray
) -> T.Tuple[np.ndarray, np.ndarray]:
    """For every source point, index of and squared distance to the nearest
    target point.
    """
    _, index = cKDTree(target).query(source, k=1, workers=-1)
    sq_dist = np.sum((source - target[index]) ** 2, axis=1)
    return index, sq_dist


def chamfer(a: PointsLike, b: PointsLike) -> float:
    """Symmetric mean-normalized squared Chamfer distance.

    :raises ParameterError: if a cloud is empty
    """
    points_a = _points(a, "a")
    points_b = _points(b, "b")
    _, sq_ab = nearest_matches(points_a, points_b)
    _, sq_ba = nearest_matches(points_b, points_a)
    return float(sq_ab.mean() + sq_ba.mean())


def emd_exact(
    a: PointsLike,
    b: PointsLike,
    max_points: int = DEFAULT_MAX_EXACT_POINTS,
) -> float:
    """Earth mover's distance by optimal assignment.

    :param a: first cloud
    :param b: second cloud with the same number of points
    :param max_points: largest cloud size solved exactly
    :raises ParameterError: on size mismatch or clouds above the bound
    :returns: mean Euclidean distance under the optimal bijection
    """
    points_a = _points(a, "a")
    points_b = _points(b, "b")
    if points_a.shape[0] != points_b.shape[0]:
        raise ParameterError(
            "Exact EMD needs equal-size clouds, got "
            f"{points_a.shape[0]} and {points_b.shape[0]} points."
        )
    if points_a.shape[0] > max_points:
        raise ParameterError(
            f"Exact EMD is limited to {max_points} points, got "
            f"{points_a.shape[0]}; use the entropic solver instead."
        )
    cost = cdist(points_a, points_b)
    rows, cols = linear_sum_assignment(cost)
    return float(cost[rows, cols].mean())


def mean_pairwise_distance(a: PointsLike, b: PointsLike) -> float:
    """Mean Euclidean distance over all cross pairs of two clouds."""
    return float(cdist(_points(a, "a"), _points(b, "b")).mean())


def default_entropic_epsilon(
    gt_start: PointsLike, gt_end: PointsLike
) -> float:
    """Entropic regularization strength scaled to the ground-truth clouds."""
    return ENTROPIC_EPSILON_SCALE * mean_pairwise_distance(gt_start, gt_end)


def emd_entropic(
    a: PointsLike,
    b: PointsLike,
    epsilon: float,
    iterations: int = 1000,
    tolerance: float = 1e-9,
) -> float:
    """Transport cost of the entropically regularized plan.

    Log-domain alternating scaling between uniform marginals on the matrix
    of pairwise Euclidean distances; approaches ``emd_exact`` as epsilon
    goes to zero.

    :param epsilon: entropic regularization strength, > 0
    :param iterations: maximum number of scaling sweeps
    :param tolerance: stop once the largest row marginal error, relative
        to the uniform mass, falls below this value
    :raises ParameterError: on non-positive epsilon or iterations
    :raises SolverError: if the potentials become non-finite
    :returns: sum of plan times cost
    """
    if not epsilon > 0.0:
        raise ParameterError(f"epsilon must be positive, got {epsilon}.")
    if iterations < 1:
        raise ParameterError(
            f"iterations must be positive, got {iterations}."
        )
    points_a = _points(a, "a")
    points_b = _points(b, "b")
    cost = cdist(points_a, points_b)
    n_a, n_b = cost.shape
    log_a = -np.log(n_a)
    log_b = -np.log(n_b)

    f = np.zeros(n_a)
    g = np.zeros(n_b)
    for sweep in range(iterations):
        f = epsilon * (log_a - logsumexp((g[None, :] - cost) / epsilon, 1))
        g = epsilon * (log_b - logsumexp((f[:, None] - cost) / epsilon, 0))
        if not (np.all(np.isfinite(f)) and np.all(np.isfinite(g))):
            raise SolverError(
                f"Entropic transport diverged at sweep {sweep} with "
                f"epsilon={epsilon}; try a larger epsilon."
            )
        log_rows = logsumexp((f[:, None] + g[None, :] - cost) / epsilon, 1)
        if np.max(np.abs(np.expm1(log_rows - log_a))) < tolerance:
            break
    else:
        logger.debug(
            "Entropic transport stopped after %d sweeps without reaching "
            "tolerance %g",
            iterations,
            tolerance,
        )

    plan = np.exp((f[:, None] + g[None, :] - cost) / epsilon)
    value = float(np.sum(plan * cost))
    if not np.isfinite(value):
        raise SolverError(
            f"Entropic transport produced a non-finite cost with "
            f"epsilon={epsilon}; try a larger epsilon."
        )
    return value


_DISTANCE_MAP = {
    DistanceKind.CD: chamfer,
    DistanceKind.EMD_EXACT: emd_exact,
    DistanceKind.EMD_ENTROPIC: emd_entropic,
}


def distance_function(kind: DistanceKind, **kwargs: T.Any) -> DistanceFn:
    """Return the distance of the given kind with fixed keyword arguments.

    :param kind: distance kind
    :param kwargs: e.g. ``epsilon`` for the entropic solver
    :raises ParameterError: if the entropic kind is given no epsilon
    """
    kind = DistanceKind(kind)
    if kind == DistanceKind.EMD_ENTROPIC and "epsilon" not in kwargs:
        raise ParameterError(
            "The entropic distance needs an epsilon; see "
            "default_entropic_epsilon."
        )
    func = _DISTANCE_MAP[kind]
    if not kwargs:
        return func
    return lambda a, b: func(a, b, **kwargs)


def step_quality(
    p_t: PointsLike,
    p_start: PointsLike,
    p_end: PointsLike,
    alpha: float,
    d: DistanceFn,
) -> float:
    """Per-checkpoint quality blending the distances to both end states.

    :raises ParameterError: if alpha lies outside [0, 1]
    :returns: (1 - alpha) d(p_start, p_t) + alpha d(p_end, p_t)
    """
    if not 0.0 <= alpha <= 1.0:
        raise ParameterError(f"alpha must lie in [0, 1], got {alpha}.")
    return (1.0 - alpha) * d(p_start, p_t) + alpha * d(p_end, p_t)


def trapezoid_aggregate(
    alphas: T.Sequence[float], f_values: T.Sequence[float]
) -> float:
    """Trapezoidal integral of f over alpha, in checkpoint order."""
    if len(alphas) != len(f_values):
        raise ParameterError(
            f"Got {len(alphas)} alphas but {len(f_values)} f values."
        )
    total = 0.0
    for t in range(1, len(alphas)):
        total += (
            (alphas[t] - alphas[t - 1]) * (f_values[t] + f_values[t - 1]) / 2
        )
    return total


class StepMeasurement(BaseModel):
    """Quality measured at one checkpoint."""

    model_config = ConfigDict(extra="forbid")

    iteration: int
    alpha: float
    f_value: float


class MetricReport(BaseModel):
    """Scene interpolation metric with its per-checkpoint series."""

    model_config = ConfigDict(extra="forbid")

    distance_kind: T.Optional[DistanceKind]
    aggregate: float
    per_checkpoint: T.List[StepMeasurement]
    conventions: T.Dict[str, str] = dict(CONVENTIONS)


def si_metric(
    trajectory: Trajectory,
    gt_start: PointsLike,
    gt_end: PointsLike,
    d: T.Union[DistanceKind, DistanceFn] = DistanceKind.CD,
) -> MetricReport:
    """Scene interpolation metric of a trajectory.

    :param trajectory: trajectory whose checkpoints carry alphas
    :param gt_start: ground-truth start cloud
    :param gt_end: ground-truth end cloud
    :param d: distance kind or distance function; the entropic kind uses
        ``default_entropic_epsilon(gt_start, gt_end)``
    :raises ParameterError: with fewer than two checkpoints
    :returns: aggregate and per-checkpoint series
    """
    if len(trajectory) < 2:
        raise ParameterError(
            "The scene interpolation metric needs at least two checkpoints."
        )
    if isinstance(d, DistanceKind):
        kind = d  # type: T.Optional[DistanceKind]
        options = {}  # type: T.Dict[str, T.Any]
        if d == DistanceKind.EMD_ENTROPIC:
            options["epsilon"] = default_entropic_epsilon(gt_start, gt_end)
        distance = distance_function(d, **options)
    else:
        kind = None
        distance = d

    steps = []
    for ckpt in trajectory.checkpoints:
        alpha = min(max(ckpt.alpha, 0.0), 1.0)
        f_value = step_quality(
            ckpt.positions, gt_start, gt_end, alpha, distance
        )
        steps.append(
            StepMeasurement(
                iteration=ckpt.iteration, alpha=ckpt.alpha, f_value=f_value
            )
        )
    aggregate = trapezoid_aggregate(
        [step.alpha for step in steps], [step.f_value for step in steps]
    )
    return MetricReport(
        distance_kind=kind, aggregate=aggregate, per_checkpoint=steps
    )


def rest_distance_deviation(
    positions: np.ndarray,
    graph: NeighborGraph,
    pair_mask: T.Optional[np.ndarray] = None,
    relative: bool = True,
) -> float:
    """How far neighbour distances have drifted from their rest values.

    :param positions: N x 3 positions
    :param graph: start-state neighbour graph
    :param pair_mask: optional N x k mask selecting the pairs to measure
    :param relative: divide the summed change by the summed rest distance
        instead of reporting the largest single change
    :returns: sum |d0 - dt| / sum d0, or max |d0 - dt| if not relative
    """
    graph.check_positions(positions, "positions")
    diff = positions[:, None, :] - positions[graph.neighbor_indices]
    change = np.abs(graph.rest_sq_dist - np.einsum("ijk,ijk->ij", diff, diff))
    rest = graph.rest_sq_dist
    if pair_mask is not None:
        change = change[pair_mask]
        rest = rest[pair_mask]
    if change.size == 0:
        return 0.0
    if not relative:
        return float(change.max())
    return float(change.sum() / max(rest.sum(), np.finfo(float).tiny))


def max_rest_distance_deviation(
    trajectory: Trajectory,
    graph: NeighborGraph,
    pair_mask: T.Optional[np.ndarray] = None,
    relative: bool = True,
) -> float:
    """Largest rest distance deviation over all checkpoints."""
    return max(
        rest_distance_deviation(ckpt.positions, graph, pair_mask, relative)
        for ckpt in trajectory.checkpoints
    )
