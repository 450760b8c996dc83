import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.spatial.transform import Rotation

from toporecon.errors import DegenerateCloudError, DimensionError, EmptyCloudError, ParseError
from toporecon.pointcloud_io import (
    PointCloud,
    average_spacing,
    load_pointcloud,
    normalize,
    save_xyz,
)


def test_xyz_three_points(tmp_path):
    path = tmp_path / "tri.xyz"
    path.write_text("# a comment\n0 0\n1 0\n0 1\n")
    cloud = load_pointcloud(path)
    assert cloud.dim == 2 and len(cloud) == 3
    np.testing.assert_array_equal(cloud.points, [[0, 0], [1, 0], [0, 1]])


def test_ply_tetrahedron(tmp_path):
    path = tmp_path / "tet.ply"
    path.write_text(
        "ply\nformat ascii 1.0\nelement vertex 4\nproperty float x\nproperty float y\n"
        "property float z\nelement face 1\nproperty list uchar int vertex_indices\nend_header\n"
        "0 0 0\n1 0 0\n0 1 0\n0 0 1\n3 0 1 2\n"
    )
    cloud = load_pointcloud(path)
    assert cloud.dim == 3 and len(cloud) == 4


def test_nan_rejected(tmp_path):
    path = tmp_path / "bad.xyz"
    path.write_text("0 0\n0 nan\n")
    with pytest.raises(ParseError):
        load_pointcloud(path)


def test_mixed_columns_rejected(tmp_path):
    path = tmp_path / "mixed.xyz"
    path.write_text("0 0\n1 0 0\n")
    with pytest.raises((ParseError, DimensionError)):
        load_pointcloud(path)


def test_empty_file_rejected(tmp_path):
    path = tmp_path / "empty.xyz"
    path.write_text("# nothing\n")
    with pytest.raises(EmptyCloudError):
        load_pointcloud(path)


def test_binary_ply_rejected(tmp_path):
    path = tmp_path / "bin.ply"
    path.write_text("ply\nformat binary_little_endian 1.0\nelement vertex 1\nend_header\n")
    with pytest.raises(ParseError):
        load_pointcloud(path)


def test_missing_file_names_path(tmp_path):
    with pytest.raises(FileNotFoundError, match="nowhere.xyz"):
        load_pointcloud(tmp_path / "nowhere.xyz")


def test_normalize_two_points():
    cloud = normalize(PointCloud.from_points([[0.0, 0.0], [2.0, 0.0]]))
    np.testing.assert_allclose(cloud.points, [[0.0, 0.5], [1.0, 0.5]])
    assert cloud.avg_spacing == pytest.approx(1.0)


def test_normalize_right_triangle():
    # longest side 2 maps to 1, so both legs become length 1
    cloud = normalize(PointCloud.from_points([[5.0, 5.0], [5.0, 7.0], [7.0, 5.0]]))
    np.testing.assert_allclose(cloud.points, [[0, 0], [0, 1], [1, 0]], atol=1e-15)
    assert cloud.avg_spacing == pytest.approx(1.0)


def test_normalize_repeated_point():
    with pytest.raises(DegenerateCloudError):
        normalize(PointCloud.from_points([[1.0, 2.0], [1.0, 2.0], [1.0, 2.0]]))


def test_save_round_trip(tmp_path, rng):
    pts = rng.normal(size=(20, 3))
    save_xyz(tmp_path / "c.xyz", pts)
    np.testing.assert_array_equal(load_pointcloud(tmp_path / "c.xyz").points, pts)


def test_average_spacing_brute_force(rng):
    pts = rng.uniform(size=(50, 2))
    dist = np.linalg.norm(pts[:, None] - pts[None], axis=-1)
    np.fill_diagonal(dist, np.inf)
    assert average_spacing(pts) == pytest.approx(dist.min(axis=1).mean(), rel=1e-12)


clouds = st.integers(0, 10_000).flatmap(
    lambda seed: st.sampled_from([2, 3]).map(
        lambda d: np.random.default_rng(seed).normal(size=(12, d)) * 5.0 + 3.0
    )
)


@settings(max_examples=40, deadline=None)
@given(clouds)
def test_normalize_idempotent(pts):
    once = normalize(PointCloud.from_points(pts))
    twice = normalize(once)
    np.testing.assert_allclose(twice.points, once.points, atol=1e-12, rtol=0)


@settings(max_examples=40, deadline=None)
@given(clouds)
def test_normalize_round_trip(pts):
    cloud = normalize(PointCloud.from_points(pts))
    back = cloud.scale.to_original(cloud.points)
    np.testing.assert_allclose(back, pts, rtol=1e-9, atol=1e-9 * np.abs(pts).max())
    assert cloud.points.min() >= 0.0 and cloud.points.max() <= 1.0


@settings(max_examples=40, deadline=None)
@given(clouds, st.integers(0, 10_000))
def test_avg_spacing_rigid_invariance(pts, seed):
    d = pts.shape[1]
    rng = np.random.default_rng(seed)
    if d == 3:
        rot = Rotation.random(random_state=seed).as_matrix()
    else:
        a = rng.uniform(0, 2 * np.pi)
        rot = np.array([[np.cos(a), -np.sin(a)], [np.sin(a), np.cos(a)]])
    moved = pts @ rot.T + rng.normal(size=d) * 10
    assert average_spacing(moved) == pytest.approx(average_spacing(pts), rel=1e-9)
