"""Mesh ingestion, radar frames, and 3-D pose extraction."""

import numpy as np
import pytest

from gecm import validate_params
from gecm.errors import DegenerateGeometryError, EmptyMeshError, MeshParseError
from gecm.geometry import (
    CenterlineSample,
    TriangleMesh,
    azimuth_rotation,
    compute_centerline,
    extract_pose_3d,
    load_mesh,
    look_vector,
    radar_frame,
    transform_mesh,
)

from conftest import (
    aircraft_arrays,
    box_arrays,
    ellipsoid_arrays,
    merge_arrays,
    mesh_from,
    write_obj,
    write_stl,
)


# ------------------------------------------------------------------
# Loaders
# ------------------------------------------------------------------

def test_load_unit_cube_obj(tmp_path):
    v, f = box_arrays((5.0, -3.0, 2.0), (1, 1, 1))  # off-center: loader recenters
    path = tmp_path / "cube.obj"
    write_obj(path, v, f)
    mesh = load_mesh(path)
    assert mesh.n_faces == 12
    assert mesh.areas.sum() == pytest.approx(6.0, abs=1e-9)
    assert np.allclose(mesh.vertices.mean(axis=0), 0.0, atol=1e-12)
    assert np.allclose(np.linalg.norm(mesh.normals, axis=1), 1.0, atol=1e-12)


def test_load_obj_quad_fan_triangulated(tmp_path):
    path = tmp_path / "quad.obj"
    path.write_text("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n")
    mesh = load_mesh(path)
    assert mesh.n_faces == 2
    assert mesh.areas.sum() == pytest.approx(1.0)


def test_load_stl_drops_degenerate_face(tmp_path):
    v, f = box_arrays((0, 0, 0), (2, 2, 2))
    v = np.vstack([v, [[9, 9, 9]]])
    f = np.vstack([f, [[8, 8, 8]]])  # zero-area triangle
    path = tmp_path / "cube.stl"
    write_stl(path, v, f)
    mesh = load_mesh(path)
    assert mesh.n_faces == 12
    assert mesh.dropped_degenerate == 1


def test_load_empty_file_raises(tmp_path):
    path = tmp_path / "empty.obj"
    path.write_text("")
    with pytest.raises(EmptyMeshError):
        load_mesh(path)


def test_load_bad_face_index_raises(tmp_path):
    path = tmp_path / "bad.obj"
    path.write_text("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 9\n")
    with pytest.raises(MeshParseError):
        load_mesh(path)


def test_load_missing_file_raises(tmp_path):
    with pytest.raises(MeshParseError):
        load_mesh(tmp_path / "nope.obj")


# ------------------------------------------------------------------
# Radar frame
# ------------------------------------------------------------------

def test_azimuth_rotation_identity_at_zero():
    assert np.allclose(azimuth_rotation(0.0), np.eye(3), atol=1e-15)


def test_azimuth_rotation_90_degrees():
    v = azimuth_rotation(90.0) @ np.array([1.0, 0.0, 0.0])
    assert np.allclose(v, [0.0, -1.0, 0.0], atol=1e-12)


def test_look_vector_straight_down():
    k = look_vector(0.0, 90.0)
    assert np.allclose(k, [0.0, 0.0, -1.0], atol=1e-12)


def test_frame_rotation_orthonormal_and_consistent():
    rng = np.random.default_rng(0)
    for _ in range(200):
        az = float(rng.uniform(0, 360))
        dep = float(rng.uniform(0.01, 90))
        params = validate_params({"azimuth_deg": az, "depression_deg": dep})
        frame = radar_frame(params)
        r = frame.rotation
        assert np.max(np.abs(r.T @ r - np.eye(3))) < 1e-9
        assert np.linalg.det(r) == pytest.approx(1.0, abs=1e-9)
        assert np.linalg.norm(frame.look) == pytest.approx(1.0, abs=1e-12)
        # rotation maps the reference look to the look vector
        assert np.allclose(r @ np.array([0.0, 1.0, 0.0]), frame.look, atol=1e-9)
        # look(az, dep) = R_az(az) @ look(0, dep)
        assert np.allclose(azimuth_rotation(az) @ look_vector(0.0, dep), frame.look, atol=1e-9)


def test_transform_identity_frame(unit_cube_mesh):
    params = validate_params({"azimuth_deg": 0.0, "depression_deg": 90.0})
    frame = radar_frame(params)
    ident = type(frame)(rotation=np.eye(3), look=frame.look)
    out = transform_mesh(unit_cube_mesh, ident)
    assert np.array_equal(out.vertices, unit_cube_mesh.vertices)


def test_transform_preserves_areas(unit_cube_mesh):
    params = validate_params({"azimuth_deg": 123.4, "depression_deg": 37.0})
    out = transform_mesh(unit_cube_mesh, radar_frame(params))
    assert np.allclose(out.areas, unit_cube_mesh.areas, atol=1e-9)


def test_transform_roundtrip_at_zero_depression(unit_cube_mesh):
    fwd = radar_frame(validate_params({"azimuth_deg": 77.0, "depression_deg": 1e-9}))
    back = radar_frame(validate_params({"azimuth_deg": -77.0, "depression_deg": 1e-9}))
    out = transform_mesh(transform_mesh(unit_cube_mesh, fwd), back)
    assert np.allclose(out.vertices, unit_cube_mesh.vertices, atol=1e-9)


# ------------------------------------------------------------------
# 3-D pose extraction
# ------------------------------------------------------------------

def test_pose3d_ellipsoid_endpoints():
    mesh = mesh_from(*ellipsoid_arrays(10.0, 2.0, 1.0, n_u=48, n_v=24))
    pose = extract_pose_3d(mesh)
    ends = {tuple(np.round(p, 6)) for p in (pose.nose, pose.tail)}
    targets = [np.array([10.0, 0, 0]), np.array([-10.0, 0, 0])]
    for target in targets:
        assert min(np.linalg.norm(np.array(e) - target) for e in ends) < 0.5


def test_pose3d_cross_wing_root_at_junction():
    from conftest import subdivide_arrays

    fuselage = box_arrays((0, 0, 0), (2.0, 20.0, 1.0))
    wings = box_arrays((0, 3.0, 0), (16.0, 2.0, 0.5))
    mesh = mesh_from(*subdivide_arrays(*merge_arrays(fuselage, wings), levels=2))
    pose = extract_pose_3d(mesh)
    root = np.array(pose.wing_root)
    assert abs(root[1] - 3.0) < 0.5
    assert abs(root[0]) < 0.5


def test_pose3d_symmetric_wing_lengths():
    mesh = mesh_from(*aircraft_arrays())
    pose = extract_pose_3d(mesh)
    root = np.array(pose.wing_root)
    len_l = np.linalg.norm(np.array(pose.left_tip) - root)
    len_r = np.linalg.norm(np.array(pose.right_tip) - root)
    assert abs(len_l - len_r) <= 1e-6


def test_pose3d_scale_equivariance():
    v, f = aircraft_arrays()
    pose1 = extract_pose_3d(mesh_from(v, f))
    pose2 = extract_pose_3d(mesh_from(3.7 * v, f))
    for name, p in pose1.points().items():
        assert np.allclose(3.7 * np.array(p), pose2.points()[name], rtol=1e-9, atol=1e-9), name


def test_pose3d_degenerate_raises():
    v = np.array([[0, 0, 0], [1, 0, 0], [2, 0, 0], [3, 0, 0]], dtype=float)
    f = np.array([[0, 1, 2], [1, 2, 3]])
    with pytest.raises((DegenerateGeometryError, EmptyMeshError)):
        extract_pose_3d(TriangleMesh.from_arrays(v, f))


def test_centerline_ordered_with_nonnegative_spans(aircraft_mesh):
    samples, e_f, e_s = compute_centerline(aircraft_mesh)
    us = [s.u for s in samples]
    assert us == sorted(us)
    assert all(s.span_left >= 0 and s.span_right >= 0 for s in samples)
    assert isinstance(samples[0], CenterlineSample)
    assert abs(np.dot(e_f, e_s)) < 1e-9
