"""Tests for geometry distances and the scene interpolation metric."""
import itertools

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from scene_interpolation.common import (
    Checkpoint,
    DistanceKind,
    ParameterError,
    PointCloud,
    RigidTransform,
    SolverError,
    Trajectory,
)
from scene_interpolation.geometry import (
    build_neighbor_graph,
    transform_positions,
)
from scene_interpolation.metrics import (
    CONVENTIONS,
    chamfer,
    default_entropic_epsilon,
    distance_function,
    emd_entropic,
    emd_exact,
    max_rest_distance_deviation,
    mean_pairwise_distance,
    rest_distance_deviation,
    si_metric,
    step_quality,
    trapezoid_aggregate,
)


def _brute_force_emd(a: np.ndarray, b: np.ndarray) -> float:
    cost = np.linalg.norm(a[:, None, :] - b[None, :, :], axis=2)
    rows = np.arange(len(a))
    return min(
        cost[rows, list(perm)].mean()
        for perm in itertools.permutations(range(len(a)))
    )


def _frozen_trajectory(start: np.ndarray, count: int) -> Trajectory:
    return Trajectory(
        [
            Checkpoint(index, start.copy(), index / (count - 1))
            for index in range(count)
        ],
        alpha_fallback=True,
    )


def test_chamfer_hand_value() -> None:
    """Test the symmetric mean squared convention."""
    a = np.array([[0.0, 0.0, 0.0]])
    b = np.array([[1.0, 0.0, 0.0], [2.0, 0.0, 0.0]])
    assert chamfer(a, b) == pytest.approx(1.0 + 2.5)
    assert chamfer(b, a) == pytest.approx(3.5)
    assert chamfer(PointCloud(a), PointCloud(a)) == 0.0


def test_chamfer_rejects_empty() -> None:
    """Test rejection of empty clouds."""
    with pytest.raises(ParameterError):
        chamfer(np.zeros((0, 3)), np.zeros((2, 3)))


def test_emd_exact_matches_brute_force() -> None:
    """Test optimal assignment against all permutations."""
    rng = np.random.default_rng(0)
    for _ in range(50):
        n_points = int(rng.integers(1, 8))
        a = rng.random((n_points, 3))
        b = rng.random((n_points, 3))
        assert emd_exact(a, b) == pytest.approx(
            _brute_force_emd(a, b), rel=0, abs=1e-9
        )


def test_emd_exact_of_permuted_copy_is_zero() -> None:
    """Test that reordering points costs nothing."""
    rng = np.random.default_rng(1)
    a = rng.random((30, 3))
    assert emd_exact(a, rng.permutation(a)) == pytest.approx(0.0, abs=1e-12)


def test_emd_exact_limits() -> None:
    """Test rejection of unequal sizes and clouds above the bound."""
    with pytest.raises(ParameterError):
        emd_exact(np.zeros((3, 3)), np.zeros((4, 3)))
    with pytest.raises(ParameterError):
        emd_exact(np.zeros((5, 3)), np.ones((5, 3)), max_points=4)


def test_chamfer_matches_brute_force() -> None:
    """Test Chamfer against a double-min scan over all pairs."""
    rng = np.random.default_rng(6)
    a = rng.random((40, 3))
    b = rng.random((40, 3))
    sq_dist = np.sum((a[:, None, :] - b[None, :, :]) ** 2, axis=2)
    expected = sq_dist.min(axis=1).mean() + sq_dist.min(axis=0).mean()
    assert chamfer(a, b) == pytest.approx(expected, rel=0, abs=1e-12)


def test_distances_are_symmetric() -> None:
    """Test symmetry of Chamfer and exact EMD and zero on equal sets."""
    rng = np.random.default_rng(7)
    for _ in range(10):
        a = rng.random((25, 3))
        b = rng.random((25, 3))
        assert chamfer(a, b) == pytest.approx(chamfer(b, a), abs=1e-12)
        assert emd_exact(a, b) == pytest.approx(emd_exact(b, a), abs=1e-12)
        assert chamfer(a, b) > 0.0
        assert emd_exact(a, b) > 0.0
        shuffled = rng.permutation(a)
        assert chamfer(a, shuffled) == pytest.approx(0.0, abs=1e-12)
        assert emd_exact(a, shuffled) == pytest.approx(0.0, abs=1e-12)


def test_emd_exact_rigid_invariance() -> None:
    """Test that moving both clouds rigidly keeps the distance."""
    rng = np.random.default_rng(8)
    for seed in range(10):
        a = rng.random((30, 3))
        b = rng.random((30, 3))
        xf = RigidTransform(
            Rotation.random(random_state=seed).as_matrix(),
            rng.normal(size=3),
        )
        moved = emd_exact(
            transform_positions(a, xf), transform_positions(b, xf)
        )
        assert moved == pytest.approx(emd_exact(a, b), rel=0, abs=1e-9)


def test_emd_exact_centroid_bound() -> None:
    """Test that EMD is at least the distance between centroids."""
    rng = np.random.default_rng(9)
    for _ in range(20):
        a = rng.random((15, 3))
        b = rng.random((15, 3)) + rng.normal(size=3)
        bound = np.linalg.norm(a.mean(axis=0) - b.mean(axis=0))
        assert emd_exact(a, b) >= bound - 1e-12


def test_emd_entropic_of_identical_clouds() -> None:
    """Test the epsilon log n bound when both clouds coincide."""
    rng = np.random.default_rng(10)
    a = rng.random((30, 3))
    for epsilon in (0.01, 0.1, 1.0):
        value = emd_entropic(a, a, epsilon, iterations=3000)
        assert 0.0 <= value <= epsilon * np.log(30) + 1e-9


def test_emd_entropic_epsilon_sweep() -> None:
    """Test that shrinking epsilon approaches the exact value."""
    rng = np.random.default_rng(11)
    a = rng.random((20, 3))
    b = rng.random((20, 3))
    exact = emd_exact(a, b)
    scale = mean_pairwise_distance(a, b)
    values = [
        emd_entropic(a, b, factor * scale, iterations=5000)
        for factor in (0.5, 0.2, 0.1, 0.05)
    ]
    for larger, smaller in zip(values, values[1:]):
        assert smaller <= larger * (1.0 + 1e-6)
    assert values[-1] >= exact * (1.0 - 1e-6)
    assert values[-1] - exact < values[0] - exact


def test_emd_entropic_close_to_exact() -> None:
    """Test the entropic solver against optimal assignment."""
    rng = np.random.default_rng(2)
    for _ in range(10):
        a = rng.random((50, 3))
        b = rng.random((50, 3))
        epsilon = 0.01 * mean_pairwise_distance(a, b)
        exact = emd_exact(a, b)
        assert emd_entropic(a, b, epsilon, iterations=3000) == pytest.approx(
            exact, rel=0.05
        )


def test_emd_entropic_errors() -> None:
    """Test parameter validation and the non-finite guard."""
    a = np.zeros((2, 3))
    b = np.ones((2, 3))
    with pytest.raises(ParameterError):
        emd_entropic(a, b, epsilon=0.0)
    with pytest.raises(ParameterError):
        emd_entropic(a, b, epsilon=0.1, iterations=0)
    with np.errstate(all="ignore"):
        with pytest.raises(SolverError, match="epsilon"):
            emd_entropic(a, b, epsilon=1e-320)


def test_distance_function() -> None:
    """Test lookup of distances by kind."""
    a = np.zeros((2, 3))
    b = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    assert distance_function(DistanceKind.CD)(a, b) == chamfer(a, b)
    assert distance_function("emd")(a, b) == pytest.approx(1.0)
    entropic = distance_function(DistanceKind.EMD_ENTROPIC, epsilon=0.05)
    assert entropic(a, b) == pytest.approx(1.0)
    with pytest.raises(ParameterError, match="epsilon"):
        distance_function(DistanceKind.EMD_ENTROPIC)


def test_step_quality() -> None:
    """Test the blend of the distances to both end states."""

    def distance(a, b) -> float:
        return float(np.abs(np.asarray(a) - np.asarray(b)).sum())

    start = np.zeros((1, 3))
    end = np.full((1, 3), 2.0)
    current = np.full((1, 3), 0.5)
    assert step_quality(current, start, end, 0.25, distance) == (
        0.75 * 1.5 + 0.25 * 4.5
    )
    with pytest.raises(ParameterError):
        step_quality(current, start, end, 1.5, distance)


def test_trapezoid_aggregate() -> None:
    """Test the trapezoidal rule over uneven alphas."""
    assert trapezoid_aggregate([0.0, 0.25, 1.0], [0.0, 1.0, 1.0]) == (
        0.125 + 0.75
    )
    assert trapezoid_aggregate([0.0], [5.0]) == 0.0
    with pytest.raises(ParameterError):
        trapezoid_aggregate([0.0, 1.0], [1.0])


def test_si_metric_frozen_trajectory() -> None:
    """Test the closed form of a trajectory that never leaves the start."""
    rng = np.random.default_rng(3)
    start = rng.random((100, 3))
    end = start + [0.0, 0.0, 1.0] + 0.05 * rng.normal(size=start.shape)
    report = si_metric(_frozen_trajectory(start, 24), start, end)
    assert report.aggregate == pytest.approx(
        chamfer(end, start) / 2, rel=0, abs=1e-9
    )
    assert report.distance_kind == DistanceKind.CD
    assert len(report.per_checkpoint) == 24
    assert report.per_checkpoint[0].f_value == 0.0
    assert report.conventions == CONVENTIONS


def test_si_metric_sampled_translation() -> None:
    """Test per-checkpoint values of an exactly sampled translation."""
    rng = np.random.default_rng(4)
    start = rng.random((20, 3))
    shift = np.array([3.0, 0.0, 0.0])
    trajectory = Trajectory(
        [
            Checkpoint(index, start + shift * index / 4, index / 4)
            for index in range(5)
        ]
    )
    report = si_metric(
        trajectory, start, start + shift, DistanceKind.EMD_EXACT
    )
    assert report.per_checkpoint[2].f_value == pytest.approx(
        0.5 * 1.5 + 0.5 * 1.5
    )
    assert report.aggregate == pytest.approx(
        trapezoid_aggregate(
            [step.alpha for step in report.per_checkpoint],
            [step.f_value for step in report.per_checkpoint],
        )
    )


def test_si_metric_report_json() -> None:
    """Test that the report serializes with its conventions block."""
    start = np.zeros((1, 3))
    report = si_metric(_frozen_trajectory(start, 2), start, start + 1.0)
    payload = report.model_dump_json()
    assert '"conventions"' in payload
    assert '"aggregate"' in payload


def test_si_metric_needs_two_checkpoints() -> None:
    """Test rejection of single-checkpoint trajectories."""
    start = np.zeros((1, 3))
    with pytest.raises(ParameterError):
        si_metric(Trajectory([Checkpoint(0, start, 0.0)]), start, start)


def test_si_metric_duplicate_checkpoint() -> None:
    """Test that repeating a checkpoint leaves the aggregate unchanged."""
    rng = np.random.default_rng(12)
    start = rng.random((30, 3))
    end = start + [0.0, 1.0, 0.0]
    wobble = rng.normal(scale=0.05, size=(5, 30, 3))
    checkpoints = [
        Checkpoint(
            10 * index, start + (end - start) * index / 4 + wobble[index], 0.0
        )
        for index in range(5)
    ]
    checkpoints[0] = Checkpoint(0, start, 0.0)
    checkpoints[-1] = Checkpoint(40, end, 1.0)
    for index, alpha in ((1, 0.2), (2, 0.55), (3, 0.8)):
        checkpoints[index].alpha = alpha
    plain = si_metric(Trajectory(checkpoints), start, end)

    repeated = list(checkpoints)
    repeated.insert(
        3, Checkpoint(25, checkpoints[2].positions, checkpoints[2].alpha)
    )
    with_duplicate = si_metric(Trajectory(repeated), start, end)
    assert len(with_duplicate.per_checkpoint) == 6
    assert with_duplicate.aggregate == pytest.approx(
        plain.aggregate, rel=0, abs=1e-12
    )


def test_si_metric_entropic_kind() -> None:
    """Test the entropic kind with its default epsilon."""
    rng = np.random.default_rng(13)
    start = rng.random((40, 3))
    end = start + 1.0
    trajectory = Trajectory(
        [
            Checkpoint(index, start + index / 4, index / 4)
            for index in range(5)
        ]
    )
    report = si_metric(trajectory, start, end, DistanceKind.EMD_ENTROPIC)
    assert report.distance_kind == DistanceKind.EMD_ENTROPIC
    explicit = si_metric(
        trajectory,
        start,
        end,
        distance_function(
            DistanceKind.EMD_ENTROPIC,
            epsilon=default_entropic_epsilon(start, end),
        ),
    )
    assert report.aggregate == explicit.aggregate
    assert report.aggregate > 0.0


def test_rest_distance_deviation() -> None:
    """Test the relative and the largest rest distance change."""
    graph = build_neighbor_graph(
        PointCloud([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]]), k=1
    )
    stretched = np.array([[0.0, 0.0, 0.0], [2.0, 0.0, 0.0]])
    assert rest_distance_deviation(stretched, graph) == pytest.approx(3.0)
    assert rest_distance_deviation(stretched, graph, relative=False) == 3.0
    mask = np.zeros((2, 1), dtype=bool)
    assert rest_distance_deviation(stretched, graph, mask) == 0.0

    rest = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]])
    trajectory = Trajectory(
        [Checkpoint(0, rest, 0.0), Checkpoint(1, stretched, 1.0)]
    )
    assert max_rest_distance_deviation(trajectory, graph) == 3.0
