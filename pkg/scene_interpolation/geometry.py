"""Rigid transforms and start-state neighbour graphs."""
import logging
import typing as T
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree
from scipy.spatial.transform import Rotation

from .common import ParameterError, PointCloud, RigidTransform, as_positions

logger = logging.getLogger(__name__)

# Relative slack on the search radius so that candidates whose kd-tree
# distance and exact squared distance disagree in the last bits are kept.
_RADIUS_SLACK = 1e-9


@dataclass(frozen=True)
class NeighborGraph:
    """Frozen k-nearest-neighbour structure of the start state.

    Row ``i`` of ``neighbor_indices`` lists the k nearest other points of
    point ``i`` sorted by ascending rest distance, ties by ascending index;
    ``rest_sq_dist`` holds the matching squared distances.
    """

    k: int
    neighbor_indices: np.ndarray
    rest_sq_dist: np.ndarray

    @property
    def n_points(self) -> int:
        """Number of points the graph was built on."""
        return self.neighbor_indices.shape[0]

    def check_positions(self, positions: np.ndarray, name: str) -> None:
        """Raise ParameterError unless positions match the graph size."""
        if positions.shape != (self.n_points, 3):
            raise ParameterError(
                f"{name} has shape {positions.shape}, the neighbour graph "
                f"expects ({self.n_points}, 3)."
            )

    def pair_mask_within(self, part_labels: T.Any) -> np.ndarray:
        """Return an N x k mask of pairs whose points share a part label.

        :param part_labels: N integer part tags
        :returns: boolean mask aligned with ``neighbor_indices``
        """
        labels = np.asarray(part_labels)
        if labels.shape != (self.n_points,):
            raise ParameterError(
                f"part_labels must have shape ({self.n_points},), "
                f"got {labels.shape}."
            )
        return labels[:, None] == labels[self.neighbor_indices]


def build_neighbor_graph(cloud: PointCloud, k: int) -> NeighborGraph:
    """Find the exact k nearest neighbours of every point.

    :param cloud: start-state point cloud
    :param k: neighbours per point, 1 <= k <= N - 1
    :raises ParameterError: if k is out of range
    :returns: neighbour graph with cached rest squared distances
    """
    positions = cloud.positions
    n_points = positions.shape[0]
    if not 1 <= k <= n_points - 1:
        raise ParameterError(
            f"k must lie in [1, {n_points - 1}] for {n_points} points, "
            f"got {k}."
        )

    tree = cKDTree(positions)
    # The (k+1)-th hit bounds the k-th neighbour other than the point itself,
    # even when coincident points push the point out of its own hit list.
    bound, _ = tree.query(positions, k=k + 1, workers=-1)
    radii = bound[:, -1] * (1.0 + _RADIUS_SLACK) + _RADIUS_SLACK
    candidates = tree.query_ball_point(
        positions, r=radii, workers=-1, return_sorted=False
    )

    neighbor_indices = np.empty((n_points, k), dtype=np.int64)
    rest_sq_dist = np.empty((n_points, k), dtype=np.float64)
    for i, row in enumerate(candidates):
        row = np.asarray(row, dtype=np.int64)
        row = row[row != i]
        sq_dist = np.sum((positions[row] - positions[i]) ** 2, axis=1)
        order = np.lexsort((row, sq_dist))[:k]
        neighbor_indices[i] = row[order]
        rest_sq_dist[i] = sq_dist[order]

    logger.debug("Built %d-NN graph over %d points", k, n_points)
    return NeighborGraph(k, neighbor_indices, rest_sq_dist)


def rotation_about_axis(axis: T.Any, angle: float) -> np.ndarray:
    """Return the 3x3 matrix rotating by ``angle`` radians about ``axis``."""
    axis = np.asarray(axis, dtype=np.float64)
    norm = np.linalg.norm(axis)
    if axis.shape != (3,) or norm == 0.0:
        raise ParameterError("Rotation axis must be a non-zero 3-vector.")
    return Rotation.from_rotvec(axis / norm * angle).as_matrix()


def transform_positions(
    positions: np.ndarray, xf: RigidTransform
) -> np.ndarray:
    """Map N x 3 positions by R p + t."""
    return as_positions(positions) @ xf.rotation.T + xf.translation


def apply_rigid(cloud: PointCloud, xf: RigidTransform) -> PointCloud:
    """Apply a rigid transform to a point cloud.

    :param cloud: cloud to move
    :param xf: rigid transform
    :returns: moved copy; attributes and part labels are unchanged
    """
    return cloud.with_positions(transform_positions(cloud.positions, xf))
