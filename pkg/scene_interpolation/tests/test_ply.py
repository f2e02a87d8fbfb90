"""Tests for PLY reading and writing."""
from pathlib import Path

import numpy as np
import pytest
from plyfile import PlyData, PlyElement

from scene_interpolation.common import FormatError, ParameterError, PointCloud
from scene_interpolation.ply import read_ply, write_ply

HEADER = "ply\nformat ascii 1.0\n"


def _write_text(path: Path, text: str) -> Path:
    path.write_text(text, encoding="ascii")
    return path


def test_minimal_file(tmp_path: Path) -> None:
    """Test a one-vertex file."""
    path = _write_text(
        tmp_path / "one.ply",
        HEADER + "element vertex 1\nproperty float x\nproperty float y\n"
        "property float z\nend_header\n0 0 0\n",
    )
    cloud = read_ply(path)
    assert len(cloud) == 1
    np.testing.assert_array_equal(cloud.positions, [[0.0, 0.0, 0.0]])
    assert cloud.attributes is None
    assert cloud.part_labels is None


def test_color_scaling(tmp_path: Path) -> None:
    """Test that uchar colors map to [0, 1]."""
    path = _write_text(
        tmp_path / "red.ply",
        HEADER + "element vertex 1\nproperty float x\nproperty float y\n"
        "property float z\nproperty uchar red\nproperty uchar green\n"
        "property uchar blue\nend_header\n1 2 3 255 0 0\n",
    )
    cloud = read_ply(path)
    np.testing.assert_array_equal(cloud.positions, [[1.0, 2.0, 3.0]])
    np.testing.assert_array_equal(cloud.attributes, [[1.0, 0.0, 0.0]])


def test_round_trip(tmp_path: Path) -> None:
    """Test that written clouds read back unchanged."""
    rng = np.random.default_rng(0)
    cloud = PointCloud(
        rng.normal(scale=10.0, size=(100, 3)),
        attributes=rng.random((100, 3)),
        part_labels=rng.integers(0, 3, size=100),
    )
    path = tmp_path / "cloud.ply"
    write_ply(cloud, path)
    assert path.read_bytes().startswith(b"ply\nformat ascii 1.0\n")

    loaded = read_ply(path)
    np.testing.assert_allclose(
        loaded.positions, cloud.positions, rtol=0, atol=1e-6
    )
    np.testing.assert_allclose(
        loaded.attributes, cloud.attributes, rtol=0, atol=1 / 255
    )
    np.testing.assert_array_equal(loaded.part_labels, cloud.part_labels)


def test_write_rejects_non_rgb_attributes(tmp_path: Path) -> None:
    """Test that only three attribute columns can be written."""
    cloud = PointCloud(np.zeros((2, 3)), attributes=np.zeros((2, 2)))
    with pytest.raises(ParameterError):
        write_ply(cloud, tmp_path / "bad.ply")


def test_binary_is_rejected(tmp_path: Path) -> None:
    """Test that binary files are refused."""
    vertices = np.array(
        [(0.0, 0.0, 0.0)], dtype=[("x", "f4"), ("y", "f4"), ("z", "f4")]
    )
    path = tmp_path / "binary.ply"
    PlyData([PlyElement.describe(vertices, "vertex")], text=False).write(
        str(path)
    )
    with pytest.raises(FormatError, match="binary"):
        read_ply(path)


@pytest.mark.parametrize(
    "text",
    [
        "not a ply file\n",
        HEADER + "element vertex 1\nproperty float x\nproperty banana y\n"
        "end_header\n0 0\n",
        HEADER + "element vertex 2\nproperty float x\nproperty float y\n"
        "property float z\nend_header\n0 0 0\n1 1\n",
    ],
)
def test_malformed_files(tmp_path: Path, text: str) -> None:
    """Test rejection of broken headers and bodies."""
    path = _write_text(tmp_path / "broken.ply", text)
    with pytest.raises(FormatError, match="broken.ply"):
        read_ply(path)


def test_missing_coordinates(tmp_path: Path) -> None:
    """Test rejection of vertices without z."""
    path = _write_text(
        tmp_path / "flat.ply",
        HEADER + "element vertex 1\nproperty float x\nproperty float y\n"
        "end_header\n0 0\n",
    )
    with pytest.raises(FormatError, match="z"):
        read_ply(path)


def test_missing_vertex_element(tmp_path: Path) -> None:
    """Test rejection of files without vertices."""
    path = _write_text(
        tmp_path / "faces.ply",
        HEADER + "element face 0\nproperty list uchar int vertex_indices\n"
        "end_header\n",
    )
    with pytest.raises(FormatError, match="vertex"):
        read_ply(path)
