"""Validated configuration models.

Every model rejects unknown fields so that a misspelled key in a JSON config
file is reported instead of silently falling back to a default.
"""
import math
import typing as T

from pydantic import BaseModel, ConfigDict, Field, field_validator
from pydantic import model_validator

from .common import DataTermKind, OptimizerKind, SceneKind

Vector3 = T.Tuple[float, float, float]


class _StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class LdasPolicy(_StrictModel):
    """When the local displacement averaging step runs.

    The step runs every ``m`` iterations until the point cloud is nearly
    converged: either the mean per-iteration point displacement over the
    trailing ``m`` iterations drops below ``displacement_threshold``, or the
    iteration count reaches ``iteration_fraction`` of the budget, whichever
    happens first. After that it never runs again.
    """

    enabled: bool = True
    displacement_threshold: float = Field(default=1e-4, ge=0.0)
    iteration_fraction: float = Field(default=0.8, gt=0.0, le=1.0)


class FitConfig(_StrictModel):
    """Hyperparameters of a single deformation fit."""

    lambda_rigid: float = Field(default=5.0, ge=0.0)
    k: int = Field(default=200, ge=1)
    m: int = Field(default=100, ge=1)
    step_size: float = Field(default=1e-3, gt=0.0)
    max_iterations: int = Field(default=2000, ge=1)
    checkpoint_count: int = Field(default=24, ge=2)
    ldas: LdasPolicy = LdasPolicy()
    smoothing_window: int = Field(default=7, ge=1)
    smooth_all_iterations: bool = False
    optimizer_kind: OptimizerKind = OptimizerKind.ADAPTIVE_MOMENT
    data_term: DataTermKind = DataTermKind.CORRESPONDENCE_MSE
    adam_beta1: float = Field(default=0.9, ge=0.0, lt=1.0)
    adam_beta2: float = Field(default=0.999, ge=0.0, lt=1.0)
    adam_epsilon: float = Field(default=1e-8, gt=0.0)
    rng_seed: int = 0

    @field_validator("smoothing_window")
    @classmethod
    def _window_is_odd(cls, value: int) -> int:
        if value % 2 == 0:
            raise ValueError(f"smoothing_window must be odd, got {value}")
        return value

    @model_validator(mode="after")
    def _enough_iterations(self) -> "FitConfig":
        if self.max_iterations < self.checkpoint_count - 1:
            raise ValueError(
                f"{self.checkpoint_count} distinct checkpoints need at least "
                f"{self.checkpoint_count - 1} iterations, "
                f"got max_iterations={self.max_iterations}"
            )
        return self


class SceneSpec(_StrictModel):
    """Parameters of a synthetic articulated scene.

    Parts are boxes of length ``segment_length`` along x with a square
    cross-section of side ``thickness``. Rigid scenes hold one part; the
    hinge holds a static part on the negative side of the pivot and a moving
    part on the positive side; the bend holds one beam starting at the pivot.
    """

    kind: SceneKind
    points_per_part: int = Field(default=1000, ge=1)
    segment_length: float = 1.0
    thickness: float = 0.2
    translation: Vector3 = (0.0, 0.0, 1.0)
    axis: Vector3 = (0.0, 0.0, 1.0)
    pivot: Vector3 = (0.0, 0.0, 0.0)
    angle: float = math.pi / 2
    curvature: float = math.pi / 2
    noise_sigma: float = Field(default=0.0, ge=0.0)
    rng_seed: int = 0

    @field_validator("angle")
    @classmethod
    def _angle_in_range(cls, value: float) -> float:
        if not -math.pi < value <= math.pi:
            raise ValueError(f"angle must lie in (-pi, pi], got {value}")
        return value

    @field_validator("axis")
    @classmethod
    def _axis_nonzero(cls, value: Vector3) -> Vector3:
        if math.hypot(*value) == 0.0:
            raise ValueError("axis must be a non-zero vector")
        return value

    @field_validator("curvature")
    @classmethod
    def _curvature_finite(cls, value: float) -> float:
        if not math.isfinite(value):
            raise ValueError("curvature must be finite")
        return value
