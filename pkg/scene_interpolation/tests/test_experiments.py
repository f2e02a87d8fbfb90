"""Tests for the ablation and sensitivity studies."""
import pytest

from scene_interpolation.common import SceneKind
from scene_interpolation.config import FitConfig, SceneSpec
from scene_interpolation.experiments import (
    FULL,
    UNREGULARIZED,
    WITHOUT_LDAS,
    ablation_configs,
    ablation_study,
    interval_sweep,
    neighbour_sweep,
    run_arm,
)
from scene_interpolation.geometry import build_neighbor_graph
from scene_interpolation.scenes import generate


def test_ablation_configs() -> None:
    """Test that each arm switches off the right regularizer."""
    config = FitConfig(lambda_rigid=3.0, k=20, m=7)
    configs = ablation_configs(config)
    assert list(configs) == [FULL, WITHOUT_LDAS, UNREGULARIZED]
    assert configs[FULL] == config
    assert configs[WITHOUT_LDAS].lambda_rigid == 3.0
    assert not configs[WITHOUT_LDAS].ldas.enabled
    assert configs[UNREGULARIZED].lambda_rigid == 0.0
    assert not configs[UNREGULARIZED].ldas.enabled
    assert configs[UNREGULARIZED].k == 20
    assert configs[UNREGULARIZED].m == 7


def test_run_arm_counts_averaging_steps() -> None:
    """Test the measurements of a single small fit."""
    sample = generate(SceneSpec(kind=SceneKind.HINGE, points_per_part=60))
    config = FitConfig(k=8, m=10, step_size=5e-3, max_iterations=50)
    graph = build_neighbor_graph(sample.start, 8)
    arm = run_arm(sample, "small", config, graph)
    assert arm.label == "small"
    assert arm.ldas_disabled_at == 40
    assert arm.ldas_applications == 4
    assert len(arm.alphas) == 24
    assert arm.max_deviation > 0.0
    assert arm.si_cd > 0.0


@pytest.mark.slow
def test_ablation_orders_the_three_models() -> None:
    """Test that each regularizer keeps hinge parts more rigid."""
    sample = generate(
        SceneSpec(kind=SceneKind.HINGE, points_per_part=1000, rng_seed=1)
    )
    config = FitConfig(
        lambda_rigid=5.0,
        k=200,
        m=100,
        step_size=5e-3,
        max_iterations=600,
    )
    full, without_ldas, unregularized = ablation_study(sample, config)
    assert [full.label, without_ldas.label, unregularized.label] == [
        FULL,
        WITHOUT_LDAS,
        UNREGULARIZED,
    ]
    assert full.max_deviation < 0.5 * unregularized.max_deviation
    assert without_ldas.max_deviation < unregularized.max_deviation
    assert full.si_cd < unregularized.si_cd
    assert full.ldas_applications == full.ldas_disabled_at // 100
    assert without_ldas.ldas_applications == 0
    assert unregularized.ldas_applications == 0


@pytest.mark.slow
def test_interval_sweep() -> None:
    """Test the averaging interval study on a hinge."""
    sample = generate(
        SceneSpec(kind=SceneKind.HINGE, points_per_part=400, rng_seed=3)
    )
    config = FitConfig(k=70, step_size=5e-3, max_iterations=600)
    arms = interval_sweep(sample, config, (25, 100, 400))
    assert [arm.label for arm in arms] == ["m=25", "m=100", "m=400"]
    for arm, m in zip(arms, (25, 100, 400)):
        assert arm.config.m == m
        assert arm.ldas_applications == arm.ldas_disabled_at // m
    counts = [arm.ldas_applications for arm in arms]
    assert counts == sorted(counts, reverse=True)

    graph = build_neighbor_graph(sample.start, 70)
    unregularized = run_arm(
        sample,
        UNREGULARIZED,
        ablation_configs(config)[UNREGULARIZED],
        graph,
        graph.pair_mask_within(sample.part_labels),
    )
    for arm in arms:
        assert arm.max_deviation < unregularized.max_deviation


@pytest.mark.slow
def test_larger_k_is_more_rigid() -> None:
    """Test that the bend deviation does not grow with k."""
    sample = generate(
        SceneSpec(kind=SceneKind.BEND, points_per_part=1500, rng_seed=2)
    )
    config = FitConfig(step_size=5e-3, max_iterations=400)
    arms = neighbour_sweep(sample, config, (70, 150, 300))
    assert [arm.config.k for arm in arms] == [70, 150, 300]
    deviations = [arm.max_deviation for arm in arms]
    for smaller_k, larger_k in zip(deviations, deviations[1:]):
        assert larger_k <= smaller_k
