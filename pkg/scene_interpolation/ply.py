"""ASCII PLY reading and writing for point clouds."""
import typing as T
from pathlib import Path

import numpy as np
from plyfile import PlyData, PlyElement, PlyParseError

from .common import FormatError, ParameterError, PointCloud

_COLOR_NAMES = ("red", "green", "blue")
_PART_NAME = "part"


def _vertex_element(ply: PlyData, source: str) -> PlyElement:
    try:
        return ply["vertex"]
    except KeyError as ex:
        raise FormatError(f"{source}: no 'vertex' element.") from ex


def read_ply(path: T.Union[str, Path]) -> PointCloud:
    """Read a point cloud from an ASCII PLY file.

    Vertices need float properties x, y and z. Optional uchar red, green
    and blue properties become attributes in [0, 1]; an optional integer
    ``part`` property becomes part labels.

    :param path: file to read
    :raises FormatError: on a malformed header or body, a binary file or
        missing coordinates
    :returns: parsed point cloud
    """
    source = str(path)
    try:
        ply = PlyData.read(source)
    except (PlyParseError, ValueError) as ex:
        raise FormatError(f"{source}: {ex}") from ex
    if not ply.text:
        raise FormatError(
            f"{source}: binary PLY ({ply.byte_order}) is not supported; "
            "convert it to ASCII first."
        )

    vertex = _vertex_element(ply, source)
    names = {prop.name for prop in vertex.properties}
    missing = [axis for axis in "xyz" if axis not in names]
    if missing:
        raise FormatError(
            f"{source}: vertex element lacks properties {missing}."
        )
    if vertex.count == 0:
        raise FormatError(f"{source}: vertex element is empty.")

    positions = np.stack(
        [np.asarray(vertex[axis], dtype=np.float64) for axis in "xyz"],
        axis=1,
    )
    if not np.all(np.isfinite(positions)):
        raise FormatError(f"{source}: non-finite vertex coordinates.")

    attributes = None
    if all(name in names for name in _COLOR_NAMES):
        attributes = (
            np.stack(
                [
                    np.asarray(vertex[name], dtype=np.float64)
                    for name in _COLOR_NAMES
                ],
                axis=1,
            )
            / 255.0
        )
    part_labels = None
    if _PART_NAME in names:
        part_labels = np.asarray(vertex[_PART_NAME], dtype=np.int64)
    return PointCloud(positions, attributes, part_labels)


def write_ply(cloud: PointCloud, path: T.Union[str, Path]) -> None:
    """Write a point cloud as ASCII PLY.

    Coordinates are written as doubles in round-trip precision. Attributes
    are written as uchar colors and must therefore have three columns.

    :param cloud: cloud to write
    :param path: destination file
    :raises ParameterError: if the attributes are not RGB triples
    """
    fields = [("x", "f8"), ("y", "f8"), ("z", "f8")]
    if cloud.attributes is not None:
        if cloud.attributes.shape[1] != len(_COLOR_NAMES):
            raise ParameterError(
                "Only RGB attributes can be written to PLY, got "
                f"{cloud.attributes.shape[1]} columns."
            )
        fields += [(name, "u1") for name in _COLOR_NAMES]
    if cloud.part_labels is not None:
        fields.append((_PART_NAME, "i4"))

    vertices = np.empty(len(cloud), dtype=fields)
    for column, axis in enumerate("xyz"):
        vertices[axis] = cloud.positions[:, column]
    if cloud.attributes is not None:
        colors = np.rint(np.clip(cloud.attributes, 0.0, 1.0) * 255.0)
        for column, name in enumerate(_COLOR_NAMES):
            vertices[name] = colors[:, column]
    if cloud.part_labels is not None:
        vertices[_PART_NAME] = cloud.part_labels

    PlyData(
        [PlyElement.describe(vertices, "vertex")], text=True
    ).write(str(path))
