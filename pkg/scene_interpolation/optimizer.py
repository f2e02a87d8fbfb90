"""Fitting loop deforming a start-state point cloud towards an end state.

Only the point coordinates are optimized. Each iteration takes one
first-order step on the data term plus ``lambda_rigid`` times the local
distance preservation loss; every ``m`` iterations the local displacement
averaging step follows the gradient step until the point cloud is nearly
converged. Evenly spaced checkpoints are recorded, annotated with their
progress and finally smoothed over time.
"""
import collections
import logging
import typing as T
from dataclasses import dataclass

import numpy as np

from .common import (
    Checkpoint,
    DataTermKind,
    DivergenceError,
    LossValueGrad,
    OptimizerKind,
    ParameterError,
    PointCloud,
    Trajectory,
    accumulate_rows,
)
from .config import FitConfig
from .geometry import NeighborGraph, build_neighbor_graph
from .interpolation import progress_alpha
from .metrics import nearest_matches
from .regularizers import lda_step, rigid_loss

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DataTerm:
    """Pull towards the end state.

    ``CORRESPONDENCE_MSE`` matches point i to target row i and needs equal
    sizes; ``CHAMFER_TO_TARGET`` matches nearest neighbours and allows any
    target size.
    """

    kind: DataTermKind
    target: PointCloud

    def check_source(self, n_points: int) -> None:
        """Raise ParameterError if the target cannot match N source points."""
        if (
            self.kind == DataTermKind.CORRESPONDENCE_MSE
            and len(self.target) != n_points
        ):
            raise ParameterError(
                f"Correspondence data term needs {n_points} target points, "
                f"got {len(self.target)}."
            )


def data_loss(positions: np.ndarray, data: DataTerm) -> LossValueGrad:
    """Value and gradient of the data term at the given positions."""
    n_points = positions.shape[0]
    data.check_source(n_points)
    target = data.target.positions

    if data.kind == DataTermKind.CORRESPONDENCE_MSE:
        diff = positions - target
        value = float(np.sum(diff * diff)) / n_points
        return LossValueGrad(value, (2.0 / n_points) * diff)

    # Matches are held fixed while differentiating.
    index_ab, sq_ab = nearest_matches(positions, target)
    index_ba, sq_ba = nearest_matches(target, positions)
    gradient = (2.0 / n_points) * (positions - target[index_ab])
    accumulate_rows(
        gradient,
        index_ba,
        (2.0 / target.shape[0]) * (positions[index_ba] - target),
    )
    return LossValueGrad(float(sq_ab.mean() + sq_ba.mean()), gradient)


def total_loss(
    positions: np.ndarray,
    data: DataTerm,
    graph: T.Optional[NeighborGraph],
    lambda_rigid: float,
) -> LossValueGrad:
    """Data term plus ``lambda_rigid`` times the rigidity loss.

    :param positions: current N x 3 positions
    :param data: data term
    :param graph: start-state neighbour graph; may be None when
        ``lambda_rigid`` is zero
    :param lambda_rigid: weight of the local distance preservation loss
    :raises ParameterError: on inconsistent sizes
    :returns: combined value and gradient
    """
    data_part = data_loss(positions, data)
    if lambda_rigid == 0.0:
        return data_part
    if graph is None:
        raise ParameterError("A neighbour graph is needed when lambda > 0.")
    rigid_part = rigid_loss(positions, graph)
    return LossValueGrad(
        data_part.value + lambda_rigid * rigid_part.value,
        data_part.gradient + lambda_rigid * rigid_part.gradient,
    )


class GradientDescent:
    """Plain gradient descent with a constant step size."""

    def __init__(self, step_size: float) -> None:
        self.step_size = step_size

    def step(self, positions: np.ndarray, gradient: np.ndarray) -> np.ndarray:
        """Return the updated positions."""
        return positions - self.step_size * gradient


class AdaptiveMoment:
    """Adaptive moment estimation with bias-corrected moments."""

    def __init__(
        self,
        step_size: float,
        beta1: float = 0.9,
        beta2: float = 0.999,
        epsilon: float = 1e-8,
    ) -> None:
        self.step_size = step_size
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.first_moment = None  # type: T.Optional[np.ndarray]
        self.second_moment = None  # type: T.Optional[np.ndarray]
        self.steps = 0

    def step(self, positions: np.ndarray, gradient: np.ndarray) -> np.ndarray:
        """Return the updated positions."""
        if self.first_moment is None:
            self.first_moment = np.zeros_like(positions)
            self.second_moment = np.zeros_like(positions)
        self.steps += 1

        self.first_moment *= self.beta1
        self.first_moment += (1.0 - self.beta1) * gradient
        self.second_moment *= self.beta2
        self.second_moment += (1.0 - self.beta2) * (gradient * gradient)

        correction1 = 1.0 - self.beta1**self.steps
        correction2 = 1.0 - self.beta2**self.steps
        denom = np.sqrt(self.second_moment / correction2) + self.epsilon
        return positions - (self.step_size / correction1) * (
            self.first_moment / denom
        )


Stepper = T.Union[GradientDescent, AdaptiveMoment]


def make_stepper(config: FitConfig) -> Stepper:
    """Build the update rule named by the configuration."""
    if config.optimizer_kind == OptimizerKind.PLAIN_GD:
        return GradientDescent(config.step_size)
    return AdaptiveMoment(
        config.step_size,
        beta1=config.adam_beta1,
        beta2=config.adam_beta2,
        epsilon=config.adam_epsilon,
    )


class FitProgress(T.NamedTuple):
    """Report emitted after every iteration of the fitting loop."""

    iteration: int
    loss: float
    ldas_applied: bool
    ldas_active: bool


ProgressCallback = T.Callable[[FitProgress], None]


class _LdasSchedule:
    """Decides when displacement averaging runs and when it stops for good."""

    def __init__(self, config: FitConfig) -> None:
        self.every = config.m
        self.active = config.ldas.enabled
        self.threshold = config.ldas.displacement_threshold
        self.last_iteration = config.ldas.iteration_fraction * (
            config.max_iterations
        )
        self.recent = collections.deque(maxlen=config.m)
        self.disabled_at = None  # type: T.Optional[int]

    def due(self, iteration: int) -> bool:
        return self.active and iteration % self.every == 0

    def record(self, iteration: int, mean_displacement: float) -> None:
        """Track the gradient-step motion; switch off once converged."""
        self.recent.append(mean_displacement)
        if not self.active:
            return
        settled = (
            len(self.recent) == self.recent.maxlen
            and sum(self.recent) / len(self.recent) < self.threshold
        )
        if settled or iteration >= self.last_iteration:
            self.active = False
            self.disabled_at = iteration
            logger.info(
                "Displacement averaging disabled at iteration %d (%s)",
                iteration,
                "converged" if settled else "iteration budget",
            )


def checkpoint_iterations(max_iterations: int, count: int) -> T.List[int]:
    """Iterations of ``count`` checkpoints evenly spaced over the fit.

    Always includes iteration 0 and ``max_iterations``.
    """
    if count < 2 or max_iterations < count - 1:
        raise ParameterError(
            f"Cannot place {count} distinct checkpoints over "
            f"{max_iterations} iterations."
        )
    grid = np.floor(np.linspace(0, max_iterations, count) + 0.5)
    return [int(value) for value in grid]


def _window_bounds(index: int, last: int, half: int) -> T.Tuple[int, int]:
    """Symmetric window around ``index`` truncated to [0, last]."""
    reach = min(half, index, last - index)
    return index - reach, index + reach


def _attach_alphas(
    positions: T.Sequence[np.ndarray], iterations: T.Sequence[int]
) -> T.Tuple[T.List[float], bool]:
    """Progress of every state; iteration fractions if nothing moved."""
    if len(positions) == 1:
        return [0.0], False
    start, end = positions[0], positions[-1]
    if progress_alpha(end, start, end) is None:
        first, span = iterations[0], iterations[-1] - iterations[0]
        return [(iteration - first) / span for iteration in iterations], True
    inner = [progress_alpha(state, start, end) for state in positions[1:-1]]
    return [0.0] + inner + [1.0], False


def fit(
    start: PointCloud,
    data: DataTerm,
    config: FitConfig,
    progress: T.Optional[ProgressCallback] = None,
) -> Trajectory:
    """Deform ``start`` towards the data term's target.

    :param start: start-state point cloud
    :param data: data term holding the end-state target
    :param config: fit hyperparameters
    :param progress: called after every iteration
    :raises ParameterError: if k >= N or the data term does not fit
    :raises DivergenceError: on a non-finite loss or position
    :returns: smoothed trajectory of ``config.checkpoint_count`` checkpoints
    """
    positions_0 = start.positions
    n_points = positions_0.shape[0]
    if config.k >= n_points:
        raise ParameterError(
            f"k={config.k} needs at least {config.k + 1} points, "
            f"got {n_points}."
        )
    data.check_source(n_points)

    graph = None
    if config.lambda_rigid > 0.0 or config.ldas.enabled:
        graph = build_neighbor_graph(start, config.k)
    stepper = make_stepper(config)
    schedule = _LdasSchedule(config)

    last = config.max_iterations
    checkpoints = checkpoint_iterations(last, config.checkpoint_count)
    half = config.smoothing_window // 2
    if config.smooth_all_iterations:
        keep = set()
        for index in checkpoints:
            low, high = _window_bounds(index, last, half)
            keep.update(range(low, high + 1))
    else:
        keep = set(checkpoints)

    logger.info(
        "Fitting %d points for %d iterations (lambda_rigid=%g, k=%d, m=%d)",
        n_points,
        last,
        config.lambda_rigid,
        config.k,
        config.m,
    )
    kept = {0: positions_0.copy()}
    positions = positions_0.copy()
    for iteration in range(1, last + 1):
        loss = total_loss(positions, data, graph, config.lambda_rigid)
        if not np.isfinite(loss.value):
            raise DivergenceError(
                f"Loss became {loss.value} at iteration {iteration}."
            )
        updated = stepper.step(positions, loss.gradient)
        if not np.all(np.isfinite(updated)):
            raise DivergenceError(
                f"Positions became non-finite at iteration {iteration}."
            )
        step_lengths = np.linalg.norm(updated - positions, axis=1)
        positions = updated

        applied = schedule.due(iteration)
        if applied:
            positions = lda_step(positions, positions_0, graph)
            logger.debug("Displacement averaging at iteration %d", iteration)
        schedule.record(iteration, float(step_lengths.mean()))

        if progress is not None:
            progress(
                FitProgress(iteration, loss.value, applied, schedule.active)
            )
        if iteration in keep:
            kept[iteration] = positions.copy()

    if config.smooth_all_iterations:
        states = []
        for index in checkpoints:
            low, high = _window_bounds(index, last, half)
            if low == high:
                states.append(kept[index])
            else:
                states.append(
                    np.mean([kept[i] for i in range(low, high + 1)], axis=0)
                )
    else:
        states = [kept[index] for index in checkpoints]

    alphas, fallback = _attach_alphas(states, checkpoints)
    trajectory = Trajectory(
        [
            Checkpoint(index, state, alpha)
            for index, state, alpha in zip(checkpoints, states, alphas)
        ],
        config=config,
        alpha_fallback=fallback,
        ldas_disabled_at=schedule.disabled_at,
        start_attributes=start.attributes,
        end_attributes=_end_attributes(start, data),
        part_labels=start.part_labels,
    )
    logger.info("Fit finished with loss %g", loss.value)
    if config.smooth_all_iterations:
        return trajectory
    return temporal_smooth(trajectory, config.smoothing_window)


def _end_attributes(
    start: PointCloud, data: DataTerm
) -> T.Optional[np.ndarray]:
    target = data.target.attributes
    if target is None or start.attributes is None:
        return None
    if target.shape != start.attributes.shape:
        return None
    return target


def temporal_smooth(trajectory: Trajectory, window: int) -> Trajectory:
    """Average checkpoint positions over a centered sliding window.

    The window is truncated symmetrically at the boundaries, so the first
    and last checkpoints are never altered. Progress values are recomputed
    from the smoothed positions unless they are iteration fractions.

    :param trajectory: trajectory to smooth
    :param window: odd window size; shrunk to the checkpoint count if larger
    :raises ParameterError: if the window is even or not positive
    :returns: smoothed trajectory
    """
    if window < 1 or window % 2 == 0:
        raise ParameterError(f"window must be odd and positive, got {window}.")
    count = len(trajectory)
    if window > count:
        shrunk = count if count % 2 else count - 1
        logger.warning(
            "Smoothing window %d exceeds %d checkpoints; using %d",
            window,
            count,
            shrunk,
        )
        window = shrunk
    if window == 1:
        return trajectory.replace_checkpoints(
            [
                Checkpoint(ckpt.iteration, ckpt.positions.copy(), ckpt.alpha)
                for ckpt in trajectory.checkpoints
            ]
        )

    half = window // 2
    stack = np.stack([ckpt.positions for ckpt in trajectory.checkpoints])
    states = []
    for index, ckpt in enumerate(trajectory.checkpoints):
        low, high = _window_bounds(index, count - 1, half)
        if low == high:
            states.append(ckpt.positions)
        else:
            states.append(stack[low : high + 1].mean(axis=0))

    if trajectory.alpha_fallback:
        alphas = trajectory.alphas
    else:
        alphas, _ = _attach_alphas(states, trajectory.iterations)
    return trajectory.replace_checkpoints(
        [
            Checkpoint(ckpt.iteration, state, alpha)
            for ckpt, state, alpha in zip(
                trajectory.checkpoints, states, alphas
            )
        ]
    )
