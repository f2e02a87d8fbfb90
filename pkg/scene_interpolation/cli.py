"""Command-line interface: generate, fit, smooth, metrics and sample."""
import argparse
import logging
import sys
import typing as T
from pathlib import Path

from pydantic import BaseModel, ValidationError

from .common import (
    DataTermKind,
    DistanceKind,
    ParameterError,
    SceneInterpolationError,
)
from .config import FitConfig, SceneSpec
from .interpolation import sample_state
from .metrics import default_entropic_epsilon, distance_function, si_metric
from .optimizer import DataTerm, FitProgress, fit, temporal_smooth
from .ply import read_ply, write_ply
from .scenes import generate, ground_truth_trajectory
from .storage import read_trajectory, write_trajectory

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2

FIT_LOG_NAME = "fit_log.jsonl"

# Flags of the fit subcommand that override FitConfig fields.
_FIT_OVERRIDES = {
    "lambda_rigid": "lambda_rigid",
    "k": "k",
    "m": "m",
    "step_size": "step_size",
    "iters": "max_iterations",
    "checkpoints": "checkpoint_count",
    "window": "smoothing_window",
    "data_term": "data_term",
    "seed": "rng_seed",
}


class FitLogEntry(BaseModel):
    """One line of the fit log."""

    iteration: int
    loss: float
    ldas_applied: bool
    ldas_active: bool


def _load_fit_config(args: argparse.Namespace) -> FitConfig:
    if args.config is None:
        values = FitConfig().model_dump()
    else:
        values = FitConfig.model_validate_json(
            Path(args.config).read_text(encoding="utf-8")
        ).model_dump()
    for flag, field in _FIT_OVERRIDES.items():
        value = getattr(args, flag)
        if value is not None:
            values[field] = value
    if args.no_ldas:
        values["ldas"] = dict(values["ldas"], enabled=False)
    return FitConfig.model_validate(values)


def _cmd_generate(args: argparse.Namespace) -> None:
    spec = SceneSpec.model_validate_json(
        Path(args.spec).read_text(encoding="utf-8")
    )
    if args.seed is not None:
        spec = spec.model_copy(update={"rng_seed": args.seed})
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    sample = generate(spec)
    write_ply(sample.start, out / "start.ply")
    write_ply(sample.end, out / "end.ply")
    (out / "spec.json").write_text(
        spec.model_dump_json(indent=2) + "\n", encoding="utf-8"
    )
    if args.gt_steps is not None:
        write_trajectory(
            ground_truth_trajectory(spec, args.gt_steps),
            out / "ground_truth",
            seed=spec.rng_seed,
        )
    logger.info(
        "Wrote %s scene with %d points", spec.kind.value, len(sample.start)
    )


def _cmd_fit(args: argparse.Namespace) -> None:
    config = _load_fit_config(args)
    start = read_ply(args.start)
    data = DataTerm(DataTermKind(config.data_term), read_ply(args.target))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    with (out / FIT_LOG_NAME).open("w", encoding="utf-8") as handle:

        def log_progress(report: FitProgress) -> None:
            entry = FitLogEntry(**report._asdict())
            handle.write(entry.model_dump_json() + "\n")

        trajectory = fit(start, data, config, progress=log_progress)
    write_trajectory(trajectory, out, seed=config.rng_seed)


def _cmd_smooth(args: argparse.Namespace) -> None:
    trajectory = read_trajectory(args.traj)
    write_trajectory(temporal_smooth(trajectory, args.window), args.out)


def _cmd_metrics(args: argparse.Namespace) -> None:
    trajectory = read_trajectory(args.traj)
    gt_start = read_ply(args.gt_start)
    gt_end = read_ply(args.gt_end)
    kind = DistanceKind(args.distance)

    options = {}  # type: T.Dict[str, T.Any]
    if kind == DistanceKind.EMD_EXACT:
        options["max_points"] = args.max_exact
    elif kind == DistanceKind.EMD_ENTROPIC:
        epsilon = args.epsilon
        if epsilon is None:
            epsilon = default_entropic_epsilon(gt_start, gt_end)
            logger.info("Using entropic epsilon %g", epsilon)
        options["epsilon"] = epsilon
        options["iterations"] = args.sinkhorn_iters

    report = si_metric(
        trajectory, gt_start, gt_end, distance_function(kind, **options)
    ).model_copy(update={"distance_kind": kind})
    Path(args.out).write_text(
        report.model_dump_json(indent=2) + "\n", encoding="utf-8"
    )
    logger.info("SI-%s = %.9g", kind.value, report.aggregate)


def _cmd_sample(args: argparse.Namespace) -> None:
    trajectory = read_trajectory(args.traj)
    write_ply(sample_state(trajectory, args.alpha), args.out)


def build_parser() -> argparse.ArgumentParser:
    """Return the argument parser of the command-line interface."""
    parser = argparse.ArgumentParser(
        prog="scene-interp",
        description="Point-level 3D scene interpolation.",
    )
    parser.add_argument(
        "-v",
        "--verbose",
        action="count",
        default=0,
        help="log progress (-v) or debugging details (-vv)",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    sub = commands.add_parser("generate", help="sample a synthetic scene")
    sub.add_argument("--spec", required=True, help="scene spec JSON file")
    sub.add_argument("--out", required=True, help="output directory")
    sub.add_argument(
        "--gt-steps", type=int, help="also write a ground-truth trajectory"
    )
    sub.add_argument("--seed", type=int, help="override the spec's seed")
    sub.set_defaults(handler=_cmd_generate)

    sub = commands.add_parser("fit", help="deform start towards target")
    sub.add_argument("--start", required=True, help="start-state PLY")
    sub.add_argument("--target", required=True, help="end-state PLY")
    sub.add_argument("--config", help="fit config JSON file")
    sub.add_argument("--out", required=True, help="trajectory directory")
    sub.add_argument("--lambda-rigid", type=float)
    sub.add_argument("--k", type=int)
    sub.add_argument("--m", type=int)
    sub.add_argument("--step-size", type=float)
    sub.add_argument("--iters", type=int)
    sub.add_argument("--checkpoints", type=int)
    sub.add_argument("--window", type=int)
    sub.add_argument(
        "--data-term", choices=[kind.value for kind in DataTermKind]
    )
    sub.add_argument("--seed", type=int)
    sub.add_argument(
        "--no-ldas",
        action="store_true",
        help="never run the displacement averaging step",
    )
    sub.set_defaults(handler=_cmd_fit)

    sub = commands.add_parser("smooth", help="smooth a trajectory")
    sub.add_argument("--traj", required=True, help="trajectory directory")
    sub.add_argument("--window", type=int, default=7)
    sub.add_argument("--out", required=True, help="output directory")
    sub.set_defaults(handler=_cmd_smooth)

    sub = commands.add_parser("metrics", help="score a trajectory")
    sub.add_argument("--traj", required=True, help="trajectory directory")
    sub.add_argument("--gt-start", required=True, help="ground-truth start")
    sub.add_argument("--gt-end", required=True, help="ground-truth end")
    sub.add_argument(
        "--distance",
        choices=[kind.value for kind in DistanceKind],
        default=DistanceKind.CD.value,
    )
    sub.add_argument("--out", required=True, help="report JSON file")
    sub.add_argument(
        "--epsilon",
        type=float,
        help="entropic regularization; defaults to 0.01 x mean pairwise "
        "distance between the ground-truth clouds",
    )
    sub.add_argument("--sinkhorn-iters", type=int, default=1000)
    sub.add_argument("--max-exact", type=int, default=2000)
    sub.set_defaults(handler=_cmd_metrics)

    sub = commands.add_parser("sample", help="interpolate one state")
    sub.add_argument("--traj", required=True, help="trajectory directory")
    sub.add_argument("--alpha", type=float, required=True)
    sub.add_argument("--out", required=True, help="output PLY")
    sub.set_defaults(handler=_cmd_sample)
    return parser


def _configure_logging(verbosity: int) -> None:
    level = logging.WARNING
    if verbosity == 1:
        level = logging.INFO
    elif verbosity > 1:
        level = logging.DEBUG
    logging.basicConfig(
        level=level,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
        force=True,
    )


def cli_main(argv: T.Optional[T.Sequence[str]] = None) -> int:
    """Run the command line and return its exit code.

    0 means success, 2 a usage or parameter error and 1 any other failure.
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as ex:
        return EXIT_OK if ex.code in (0, None) else EXIT_USAGE
    _configure_logging(args.verbose)

    try:
        args.handler(args)
    except (ParameterError, ValidationError) as ex:
        logger.error("%s", ex)
        return EXIT_USAGE
    except (SceneInterpolationError, OSError) as ex:
        logger.error("%s", ex)
        return EXIT_RUNTIME
    return EXIT_OK


def main() -> None:
    """Console script entry point."""
    sys.exit(cli_main())
