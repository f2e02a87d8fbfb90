"""Local rigidity regularizers on a frozen neighbour graph.

Two regularizers keep nearby points moving together:

* the local distance preservation loss, an L1 penalty on the change of
  squared distances between each point and its start-state neighbours;
* the local displacement averaging step, which replaces every point's
  displacement from the start state by the mean displacement of its
  start-state neighbours.
"""
import typing as T

import numpy as np

from .common import (
    LossValueGrad,
    accumulate_rows,
    as_positions,
    check_same_shape,
)
from .geometry import NeighborGraph

# Residuals |d0 - dt| at or below this tolerance, relative to 1 + d0, count
# as zero: rounding noise of a rigid motion must not produce a subgradient.
_KINK_TOLERANCE = 1e-12


def rigid_loss(
    positions_t: T.Any,
    graph: NeighborGraph,
    pair_mask: T.Optional[np.ndarray] = None,
) -> LossValueGrad:
    """Local distance preservation loss and its analytic subgradient.

    value = 1/(kN) sum_i sum_{j in NN_k(i)} |d0_ij - dt_ij| with squared
    Euclidean distances; the subgradient at d0_ij == dt_ij is zero.

    :param positions_t: current N x 3 positions
    :param graph: start-state neighbour graph
    :param pair_mask: optional N x k boolean mask restricting the sum to
        selected pairs; normalization stays 1/(kN)
    :raises ParameterError: if positions do not match the graph
    :returns: loss value and N x 3 gradient
    """
    positions = as_positions(positions_t, "positions_t")
    graph.check_positions(positions, "positions_t")
    n_points, k = graph.neighbor_indices.shape
    scale = 1.0 / (k * n_points)

    diff = positions[:, None, :] - positions[graph.neighbor_indices]
    current_sq_dist = np.einsum("ijk,ijk->ij", diff, diff)
    residual = graph.rest_sq_dist - current_sq_dist
    if pair_mask is not None:
        residual = np.where(pair_mask, residual, 0.0)

    kink = _KINK_TOLERANCE * (1.0 + graph.rest_sq_dist)
    sign = np.where(np.abs(residual) <= kink, 0.0, np.sign(residual))

    value = scale * float(np.sum(np.abs(residual)))
    # d|d0 - dt| / dp_i = -sign(d0 - dt) * 2 (p_i - p_j); p_j gets the negation
    pair_grad = (-2.0 * scale) * sign[:, :, None] * diff
    gradient = pair_grad.sum(axis=1)
    accumulate_rows(
        gradient,
        graph.neighbor_indices.ravel(),
        -pair_grad.reshape(-1, 3),
    )
    return LossValueGrad(value, gradient)


def lda_step(
    positions_t: T.Any, positions_0: T.Any, graph: NeighborGraph
) -> np.ndarray:
    """Local displacement averaging step.

    Every point is moved to its start position plus the mean displacement of
    its start-state neighbours; the point's own displacement is not part of
    the mean.

    :param positions_t: current N x 3 positions
    :param positions_0: start-state N x 3 positions
    :param graph: start-state neighbour graph
    :raises ParameterError: on mismatched shapes
    :returns: averaged N x 3 positions
    """
    current = as_positions(positions_t, "positions_t")
    start = as_positions(positions_0, "positions_0")
    check_same_shape(current, start)
    graph.check_positions(current, "positions_t")

    displacement = current - start
    return start + displacement[graph.neighbor_indices].mean(axis=1)
