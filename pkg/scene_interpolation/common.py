"""Common types and errors for scene interpolation."""
import enum
import pprint
import typing as T
from dataclasses import dataclass, field

import numpy as np

if T.TYPE_CHECKING:
    from .config import FitConfig

# Tolerance for the orthonormality check of rotation matrices.
ROTATION_TOLERANCE = 1e-9


class SceneInterpolationError(Exception):
    """Base class for all scene interpolation errors."""


class ParameterError(SceneInterpolationError, ValueError):
    """Invalid argument: bad shapes, out-of-range values, bad sizes."""


class FormatError(SceneInterpolationError):
    """Malformed or unsupported file contents."""


class DivergenceError(SceneInterpolationError, RuntimeError):
    """The fitting loop produced a non-finite loss or position."""


class SolverError(SceneInterpolationError, RuntimeError):
    """A numerical solver failed to produce a finite result."""


class DataTermKind(str, enum.Enum):
    """Data term pulling the point cloud towards the end state."""

    CORRESPONDENCE_MSE = "mse"
    CHAMFER_TO_TARGET = "chamfer"


class OptimizerKind(str, enum.Enum):
    """First-order update rule used by the fitting loop."""

    PLAIN_GD = "plain_gd"
    ADAPTIVE_MOMENT = "adaptive_moment"


class DistanceKind(str, enum.Enum):
    """Geometry distance used by the scene interpolation metric."""

    CD = "cd"
    EMD_EXACT = "emd"
    EMD_ENTROPIC = "emd-entropic"


class SceneKind(str, enum.Enum):
    """Synthetic scene motion types."""

    RIGID_TRANSLATE = "rigid_translate"
    RIGID_ROTATE = "rigid_rotate"
    HINGE = "hinge"
    BEND = "bend"


def as_positions(values: T.Any, name: str = "positions") -> np.ndarray:
    """Convert to a finite float64 array of shape (N, 3).

    :param values: anything ``numpy.asarray`` accepts
    :param name: name used in error messages
    :raises ParameterError: on wrong shape or non-finite entries
    :returns: the converted array
    """
    array = np.asarray(values, dtype=np.float64)
    if array.ndim != 2 or array.shape[1] != 3:
        raise ParameterError(
            f"{name} must have shape (N, 3), got {array.shape}."
        )
    if not np.all(np.isfinite(array)):
        raise ParameterError(f"{name} contains non-finite coordinates.")
    return array


def check_same_shape(*arrays: np.ndarray) -> None:
    """Raise ParameterError unless all arrays have the same shape."""
    shapes = {array.shape for array in arrays}
    if len(shapes) > 1:
        raise ParameterError(f"Mismatched shapes: {sorted(shapes)}.")


class PointCloud:
    """N points in 3-space with optional per-point data.

    :param positions: N x 3 coordinates, N >= 1, all finite
    :param attributes: optional N x D appearance proxy (e.g. RGB in [0, 1])
    :param part_labels: optional N integer part tags
    """

    def __init__(
        self,
        positions: T.Any,
        attributes: T.Optional[T.Any] = None,
        part_labels: T.Optional[T.Any] = None,
    ) -> None:
        """Initialize self."""
        self.positions = as_positions(positions)
        if self.positions.shape[0] < 1:
            raise ParameterError("A point cloud needs at least one point.")
        n_points = self.positions.shape[0]

        self.attributes = None  # type: T.Optional[np.ndarray]
        if attributes is not None:
            attributes = np.asarray(attributes, dtype=np.float64)
            if attributes.ndim == 1:
                attributes = attributes[:, None]
            if attributes.ndim != 2 or attributes.shape[0] != n_points:
                raise ParameterError(
                    f"attributes must have {n_points} rows, "
                    f"got shape {attributes.shape}."
                )
            self.attributes = attributes

        self.part_labels = None  # type: T.Optional[np.ndarray]
        if part_labels is not None:
            part_labels = np.asarray(part_labels, dtype=np.int64)
            if part_labels.shape != (n_points,):
                raise ParameterError(
                    f"part_labels must have shape ({n_points},), "
                    f"got {part_labels.shape}."
                )
            self.part_labels = part_labels

    def __len__(self) -> int:
        return self.positions.shape[0]

    def __repr__(self) -> str:
        return (
            f"PointCloud(n_points={len(self)}, "
            f"attributes={self.attributes is not None}, "
            f"part_labels={self.part_labels is not None})"
        )

    def with_positions(self, positions: T.Any) -> "PointCloud":
        """Return a copy carrying new positions and the same extras."""
        return PointCloud(positions, self.attributes, self.part_labels)


@dataclass(frozen=True)
class RigidTransform:
    """Proper rigid motion p -> R p + t."""

    rotation: np.ndarray
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self) -> None:
        rotation = np.asarray(self.rotation, dtype=np.float64)
        translation = np.asarray(self.translation, dtype=np.float64)
        if rotation.shape != (3, 3) or translation.shape != (3,):
            raise ParameterError(
                "Rigid transform needs a 3x3 rotation and a 3-vector."
            )
        if not np.allclose(
            rotation @ rotation.T, np.eye(3), rtol=0, atol=ROTATION_TOLERANCE
        ) or abs(np.linalg.det(rotation) - 1.0) > ROTATION_TOLERANCE:
            raise ParameterError("Rotation must be orthonormal with det +1.")
        object.__setattr__(self, "rotation", rotation)
        object.__setattr__(self, "translation", translation)

    @classmethod
    def identity(cls) -> "RigidTransform":
        """Return the identity transform."""
        return cls(np.eye(3), np.zeros(3))


class LossValueGrad(T.NamedTuple):
    """Loss value and its gradient with respect to the N x 3 positions."""

    value: float
    gradient: np.ndarray


@dataclass
class Checkpoint:
    """Recorded snapshot of every point position at one iteration."""

    iteration: int
    positions: np.ndarray
    alpha: float


class Trajectory:
    """Ordered checkpoints of a point cloud moving from start to end.

    The first checkpoint holds the start positions with alpha 0 and the last
    holds alpha 1; iteration indices strictly increase.
    """

    def __init__(
        self,
        checkpoints: T.List[Checkpoint],
        config=None,  # type: T.Optional[FitConfig]
        alpha_fallback: bool = False,
        ldas_disabled_at: T.Optional[int] = None,
        start_attributes: T.Optional[np.ndarray] = None,
        end_attributes: T.Optional[np.ndarray] = None,
        part_labels: T.Optional[np.ndarray] = None,
    ) -> None:
        """Initialize self.

        :param checkpoints: recorded checkpoints, at least one
        :param config: configuration of the fit that produced them, if any
        :param alpha_fallback: True when alphas are iteration fractions
            because the points did not move at all
        :param ldas_disabled_at: iteration at which displacement averaging
            was switched off, if it ever ran
        :param start_attributes: per-point attributes of the start state
        :param end_attributes: per-point attributes of the end state
        :param part_labels: per-point part tags carried for diagnostics
        """
        if not checkpoints:
            raise ParameterError("A trajectory needs at least one checkpoint.")
        iterations = [ckpt.iteration for ckpt in checkpoints]
        if any(b <= a for a, b in zip(iterations, iterations[1:])):
            raise ParameterError(
                f"Checkpoint iterations must strictly increase: {iterations}."
            )
        shape = checkpoints[0].positions.shape
        for ckpt in checkpoints:
            if ckpt.positions.shape != shape:
                raise ParameterError(
                    f"Checkpoint {ckpt.iteration} has shape "
                    f"{ckpt.positions.shape}, expected {shape}."
                )
        if checkpoints[0].alpha != 0.0:
            raise ParameterError("The first checkpoint must have alpha 0.")
        if len(checkpoints) > 1 and checkpoints[-1].alpha != 1.0:
            raise ParameterError("The last checkpoint must have alpha 1.")

        self.checkpoints = checkpoints
        self.config = config
        self.alpha_fallback = alpha_fallback
        self.ldas_disabled_at = ldas_disabled_at
        self.start_attributes = start_attributes
        self.end_attributes = end_attributes
        self.part_labels = part_labels

    def __len__(self) -> int:
        return len(self.checkpoints)

    def __repr__(self) -> str:
        return pprint.pformat(
            {
                "n_checkpoints": len(self),
                "n_points": self.start_positions.shape[0],
                "iterations": self.iterations,
                "alphas": self.alphas,
                "alpha_fallback": self.alpha_fallback,
            },
            indent=2,
        )

    @property
    def start_positions(self) -> np.ndarray:
        """Positions of the first checkpoint."""
        return self.checkpoints[0].positions

    @property
    def end_positions(self) -> np.ndarray:
        """Positions of the last checkpoint (the fitted end state)."""
        return self.checkpoints[-1].positions

    @property
    def alphas(self) -> T.List[float]:
        """Progress value of every checkpoint."""
        return [ckpt.alpha for ckpt in self.checkpoints]

    @property
    def iterations(self) -> T.List[int]:
        """Iteration index of every checkpoint."""
        return [ckpt.iteration for ckpt in self.checkpoints]

    def replace_checkpoints(
        self, checkpoints: T.List[Checkpoint]
    ) -> "Trajectory":
        """Return a trajectory with new checkpoints and the same metadata."""
        return Trajectory(
            checkpoints,
            config=self.config,
            alpha_fallback=self.alpha_fallback,
            ldas_disabled_at=self.ldas_disabled_at,
            start_attributes=self.start_attributes,
            end_attributes=self.end_attributes,
            part_labels=self.part_labels,
        )


def accumulate_rows(
    target: np.ndarray, indices: np.ndarray, values: np.ndarray
) -> None:
    """Add rows of ``values`` into ``target`` at ``indices``, in place.

    Summation order is fixed, so repeated runs give bitwise equal results.
    """
    n_rows = target.shape[0]
    for column in range(target.shape[1]):
        target[:, column] += np.bincount(
            indices, weights=values[:, column], minlength=n_rows
        )
