"""Ablation and sensitivity studies on synthetic scenes.

Every study fits the same scene under a family of configurations and
reports, per configuration, the largest within-part rest-distance deviation
over all checkpoints and the Chamfer-based scene interpolation metric
against the scene's start and end clouds.
"""
import logging
import typing as T

from pydantic import BaseModel, ConfigDict

from .common import DataTermKind
from .config import FitConfig
from .geometry import NeighborGraph, build_neighbor_graph
from .metrics import max_rest_distance_deviation, si_metric
from .optimizer import DataTerm, FitProgress, fit
from .scenes import SceneSample

logger = logging.getLogger(__name__)

FULL = "full"
WITHOUT_LDAS = "without_ldas"
UNREGULARIZED = "unregularized"


class StudyArm(BaseModel):
    """Outcome of fitting a scene under one configuration."""

    model_config = ConfigDict(extra="forbid")

    label: str
    config: FitConfig
    max_deviation: float
    si_cd: float
    ldas_applications: int
    ldas_disabled_at: T.Optional[int] = None
    alphas: T.List[float]


def ablation_configs(config: FitConfig) -> T.Dict[str, FitConfig]:
    """The full model, the model without displacement averaging and the
    model without either regularizer.
    """
    no_ldas = config.ldas.model_copy(update={"enabled": False})
    return {
        FULL: config,
        WITHOUT_LDAS: config.model_copy(update={"ldas": no_ldas}),
        UNREGULARIZED: config.model_copy(
            update={"lambda_rigid": 0.0, "ldas": no_ldas}
        ),
    }


def _measurement_graph(
    sample: SceneSample, k: int
) -> T.Tuple[NeighborGraph, T.Any]:
    graph = build_neighbor_graph(sample.start, k)
    return graph, graph.pair_mask_within(sample.part_labels)


def run_arm(
    sample: SceneSample,
    label: str,
    config: FitConfig,
    graph: NeighborGraph,
    pair_mask: T.Any = None,
) -> StudyArm:
    """Fit the scene once and measure the resulting trajectory.

    :param sample: scene with known correspondence
    :param label: name of the configuration
    :param config: fit hyperparameters
    :param graph: start-state graph the deviation is measured on
    :param pair_mask: optional mask of the measured pairs
    :returns: measurements of the fit
    """
    reports = []  # type: T.List[FitProgress]
    data = DataTerm(DataTermKind.CORRESPONDENCE_MSE, sample.end)
    trajectory = fit(sample.start, data, config, progress=reports.append)
    arm = StudyArm(
        label=label,
        config=config,
        max_deviation=max_rest_distance_deviation(
            trajectory, graph, pair_mask
        ),
        si_cd=si_metric(trajectory, sample.start, sample.end).aggregate,
        ldas_applications=sum(report.ldas_applied for report in reports),
        ldas_disabled_at=trajectory.ldas_disabled_at,
        alphas=trajectory.alphas,
    )
    logger.info(
        "%s: deviation %.6g, SI-CD %.6g, %d averaging steps",
        label,
        arm.max_deviation,
        arm.si_cd,
        arm.ldas_applications,
    )
    return arm


def ablation_study(
    sample: SceneSample,
    config: FitConfig,
    measure_k: T.Optional[int] = None,
) -> T.List[StudyArm]:
    """Fit the scene with and without each regularizer.

    :param sample: scene with known correspondence
    :param config: configuration of the full model
    :param measure_k: neighbours of the measurement graph, ``config.k`` by
        default
    :returns: arms in the order full, without averaging, unregularized
    """
    graph, mask = _measurement_graph(sample, measure_k or config.k)
    return [
        run_arm(sample, label, arm_config, graph, mask)
        for label, arm_config in ablation_configs(config).items()
    ]


def interval_sweep(
    sample: SceneSample,
    config: FitConfig,
    intervals: T.Sequence[int],
    measure_k: T.Optional[int] = None,
) -> T.List[StudyArm]:
    """Fit the scene once per displacement averaging interval m."""
    graph, mask = _measurement_graph(sample, measure_k or config.k)
    return [
        run_arm(
            sample, f"m={m}", config.model_copy(update={"m": m}), graph, mask
        )
        for m in intervals
    ]


def neighbour_sweep(
    sample: SceneSample,
    config: FitConfig,
    ks: T.Sequence[int],
    measure_k: T.Optional[int] = None,
) -> T.List[StudyArm]:
    """Fit the scene once per neighbourhood size k.

    All arms are measured on one shared graph, built with ``measure_k``
    neighbours or the smallest swept k.
    """
    graph, mask = _measurement_graph(sample, measure_k or min(ks))
    return [
        run_arm(
            sample, f"k={k}", config.model_copy(update={"k": k}), graph, mask
        )
        for k in ks
    ]
