"""Point-level 3D scene interpolation with locally rigid deformation."""

from .common import (
    Checkpoint,
    DataTermKind,
    DistanceKind,
    DivergenceError,
    FormatError,
    LossValueGrad,
    OptimizerKind,
    ParameterError,
    PointCloud,
    RigidTransform,
    SceneInterpolationError,
    SceneKind,
    SolverError,
    Trajectory,
)
from .config import FitConfig, LdasPolicy, SceneSpec
from .experiments import (
    StudyArm,
    ablation_study,
    interval_sweep,
    neighbour_sweep,
)
from .geometry import NeighborGraph, apply_rigid, build_neighbor_graph
from .interpolation import blend_attributes, progress_alpha, sample_state
from .metrics import (
    MetricReport,
    chamfer,
    default_entropic_epsilon,
    emd_entropic,
    emd_exact,
    rest_distance_deviation,
    si_metric,
    step_quality,
    trapezoid_aggregate,
)
from .optimizer import DataTerm, fit, temporal_smooth, total_loss
from .ply import read_ply, write_ply
from .regularizers import lda_step, rigid_loss
from .scenes import generate, ground_truth_trajectory
from .storage import TrajectoryManifest, read_trajectory, write_trajectory

__all__ = [
    "build_neighbor_graph",
    "apply_rigid",
    "rigid_loss",
    "lda_step",
    "total_loss",
    "fit",
    "temporal_smooth",
    "progress_alpha",
    "blend_attributes",
    "sample_state",
    "chamfer",
    "emd_exact",
    "emd_entropic",
    "default_entropic_epsilon",
    "step_quality",
    "trapezoid_aggregate",
    "si_metric",
    "rest_distance_deviation",
    "ablation_study",
    "interval_sweep",
    "neighbour_sweep",
    "generate",
    "ground_truth_trajectory",
    "read_ply",
    "write_ply",
    "read_trajectory",
    "write_trajectory",
    "SceneInterpolationError",
    "ParameterError",
    "FormatError",
    "DivergenceError",
    "SolverError",
    "PointCloud",
    "RigidTransform",
    "NeighborGraph",
    "LossValueGrad",
    "Checkpoint",
    "Trajectory",
    "DataTerm",
    "DataTermKind",
    "OptimizerKind",
    "DistanceKind",
    "SceneKind",
    "FitConfig",
    "LdasPolicy",
    "SceneSpec",
    "MetricReport",
    "TrajectoryManifest",
    "StudyArm",
]
