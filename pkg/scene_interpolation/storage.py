"""Trajectory directories: one PLY per checkpoint plus a JSON manifest."""
import datetime
import typing as T
from importlib import metadata
from pathlib import Path

from pydantic import BaseModel, ConfigDict, ValidationError, model_validator

from .common import (
    Checkpoint,
    DataTermKind,
    FormatError,
    ParameterError,
    PointCloud,
    Trajectory,
)
from .config import FitConfig
from .interpolation import checkpoint_attributes
from .ply import read_ply, write_ply

MANIFEST_NAME = "manifest.json"
MANIFEST_VERSION = 1
CHECKPOINT_GLOB = "ckpt_*.ply"


def checkpoint_file_name(index: int) -> str:
    """File name of the checkpoint at position ``index``."""
    return f"ckpt_{index:03d}.ply"


def tool_version() -> str:
    """Installed version of this package."""
    try:
        return metadata.version("scene_interpolation")
    except metadata.PackageNotFoundError:
        return "unknown"


class ManifestMetadata(BaseModel):
    """Provenance of a trajectory directory.

    ``created_at`` is the only field that differs between repeated runs.
    """

    model_config = ConfigDict(extra="forbid")

    seed: T.Optional[int] = None
    tool_version: str
    created_at: str


class TrajectoryManifest(BaseModel):
    """Index of a trajectory directory."""

    model_config = ConfigDict(extra="forbid")

    version: int = MANIFEST_VERSION
    config: T.Optional[FitConfig] = None
    checkpoint_files: T.List[str]
    iterations: T.List[int]
    alphas: T.List[float]
    alpha_fallback: bool = False
    data_term: T.Optional[DataTermKind] = None
    ldas_disabled_at: T.Optional[int] = None
    metadata: ManifestMetadata

    @model_validator(mode="after")
    def _consistent_lengths(self) -> "TrajectoryManifest":
        count = len(self.checkpoint_files)
        if count == 0:
            raise ValueError("manifest lists no checkpoint files")
        if len(self.alphas) != count or len(self.iterations) != count:
            raise ValueError(
                f"{count} checkpoint files but {len(self.alphas)} alphas "
                f"and {len(self.iterations)} iterations"
            )
        if self.alphas[0] != 0.0 or (count > 1 and self.alphas[-1] != 1.0):
            raise ValueError("alphas must start at 0 and end at 1")
        return self


def write_trajectory(
    trajectory: Trajectory,
    directory: T.Union[str, Path],
    seed: T.Optional[int] = None,
) -> TrajectoryManifest:
    """Write every checkpoint and the manifest into ``directory``.

    Checkpoint files carry the attributes blended at their progress value
    and the part labels, when the trajectory has them.

    :param trajectory: trajectory to write
    :param directory: destination, created if missing
    :param seed: seed recorded in the manifest metadata; defaults to the
        fit configuration's seed
    :returns: the written manifest
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for stale in directory.glob(CHECKPOINT_GLOB):
        stale.unlink()

    names = []
    for index, ckpt in enumerate(trajectory.checkpoints):
        name = checkpoint_file_name(index)
        cloud = PointCloud(
            ckpt.positions,
            checkpoint_attributes(trajectory, ckpt.alpha),
            trajectory.part_labels,
        )
        write_ply(cloud, directory / name)
        names.append(name)

    config = trajectory.config
    if seed is None and config is not None:
        seed = config.rng_seed
    manifest = TrajectoryManifest(
        config=config,
        checkpoint_files=names,
        iterations=trajectory.iterations,
        alphas=trajectory.alphas,
        alpha_fallback=trajectory.alpha_fallback,
        data_term=None if config is None else config.data_term,
        ldas_disabled_at=trajectory.ldas_disabled_at,
        metadata=ManifestMetadata(
            seed=seed,
            tool_version=tool_version(),
            created_at=datetime.datetime.now(
                datetime.timezone.utc
            ).isoformat(),
        ),
    )
    (directory / MANIFEST_NAME).write_text(
        manifest.model_dump_json(indent=2) + "\n", encoding="utf-8"
    )
    return manifest


def read_manifest(directory: T.Union[str, Path]) -> TrajectoryManifest:
    """Parse and validate the manifest of a trajectory directory.

    :raises FormatError: if the manifest is missing or invalid
    """
    path = Path(directory) / MANIFEST_NAME
    if not path.is_file():
        raise FormatError(f"{path}: manifest not found.")
    try:
        return TrajectoryManifest.model_validate_json(
            path.read_text(encoding="utf-8")
        )
    except ValidationError as ex:
        raise FormatError(f"{path}: invalid manifest: {ex}") from ex


def read_trajectory(directory: T.Union[str, Path]) -> Trajectory:
    """Rebuild a trajectory from a directory written by write_trajectory.

    :param directory: trajectory directory
    :raises FormatError: on a missing file, a count mismatch between the
        manifest and the checkpoint files, or inconsistent checkpoints
    :returns: the trajectory
    """
    directory = Path(directory)
    manifest = read_manifest(directory)

    for name in manifest.checkpoint_files:
        if not (directory / name).is_file():
            raise FormatError(f"{directory}: missing checkpoint file {name}.")

    on_disk = sorted(path.name for path in directory.glob(CHECKPOINT_GLOB))
    if len(on_disk) != len(manifest.checkpoint_files):
        raise FormatError(
            f"{directory}: manifest lists {len(manifest.checkpoint_files)} "
            f"checkpoints but {len(on_disk)} checkpoint files exist."
        )

    clouds = [read_ply(directory / name) for name in manifest.checkpoint_files]

    try:
        return Trajectory(
            [
                Checkpoint(iteration, cloud.positions, alpha)
                for iteration, cloud, alpha in zip(
                    manifest.iterations, clouds, manifest.alphas
                )
            ],
            config=manifest.config,
            alpha_fallback=manifest.alpha_fallback,
            ldas_disabled_at=manifest.ldas_disabled_at,
            start_attributes=clouds[0].attributes,
            end_attributes=clouds[-1].attributes,
            part_labels=clouds[0].part_labels,
        )
    except ParameterError as ex:
        raise FormatError(f"{directory}: {ex}") from ex
