import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import orthogonal_procrustes
from scipy.spatial.transform import Rotation

from errors import DegenerateProjectionError, DegenerateRotationError, InvalidInputError
from geometry import (
    CameraIntrinsics,
    RigidTransform,
    angle_between,
    geodesic_angle,
    lift_from_plane,
    look_at,
    nearest_rotation,
    normalize_pixel,
    plane_basis,
    project_to_plane,
    rotation_exp,
    rotation_log,
    skew,
    unit,
)

finite = st.floats(min_value=-5.0, max_value=5.0, allow_nan=False)
vectors = st.tuples(finite, finite, finite).map(np.array).filter(lambda v: np.linalg.norm(v) > 1e-3)


def test_normalize_pixel_principal_point_is_origin(intrinsics):
    assert np.allclose(normalize_pixel((960.0, 540.0), intrinsics), [0.0, 0.0])
    assert np.allclose(normalize_pixel((960.0 + 1380.0, 540.0 - 690.0), intrinsics), [1.0, -0.5])


def test_normalize_pixel_handles_arrays(intrinsics):
    pixels = np.array([[0.0, 0.0], [1920.0, 1080.0], [960.0, 540.0]])
    uv = normalize_pixel(pixels, intrinsics)
    assert uv.shape == (3, 2)
    assert np.allclose(uv * [1380.0, 1380.0] + [960.0, 540.0], pixels)


def test_normalize_pixel_rejects_non_finite(intrinsics):
    with pytest.raises(InvalidInputError):
        normalize_pixel((np.nan, 1.0), intrinsics)


def test_intrinsics_reject_non_positive_focal_length():
    with pytest.raises(InvalidInputError):
        CameraIntrinsics(fx=0.0, fy=500.0, cx=0.0, cy=0.0)


def test_in_image_mask(intrinsics):
    mask = intrinsics.in_image([[10.0, 10.0], [-1.0, 10.0], [1919.0, 1079.0], [1920.0, 5.0]])
    assert mask.tolist() == [True, False, True, False]
    assert CameraIntrinsics(100.0, 100.0, 0.0, 0.0).in_image([[-1e6, 1e6]]).all()


@given(vectors, vectors)
def test_skew_matches_cross_product(a, b):
    assert np.allclose(skew(a) @ b, np.cross(a, b))


@given(vectors)
def test_plane_basis_is_right_handed_orthonormal(n):
    n = unit(n)
    e1, e2 = plane_basis(n)
    basis = np.column_stack((e1, e2, n))
    assert np.allclose(basis.T @ basis, np.eye(3), atol=1e-12)
    assert np.isclose(np.linalg.det(basis), 1.0)


def test_plane_basis_is_deterministic():
    e1, e2 = plane_basis(np.array([0.0, 0.0, 1.0]))
    assert np.allclose(e1, [1.0, 0.0, 0.0])
    assert np.allclose(e2, [0.0, 1.0, 0.0])


def test_project_to_plane_fronto_parallel_is_identity_up_to_basis():
    uv = np.array([[0.1, -0.2], [0.0, 0.0], [-0.3, 0.4]])
    planar = project_to_plane(uv, np.array([0.0, 0.0, 1.0]))
    assert np.allclose(planar, uv)


@settings(max_examples=50)
@given(st.floats(min_value=-0.5, max_value=0.5), st.floats(min_value=-0.5, max_value=0.5))
def test_lift_inverts_projection(u, v):
    n = unit([0.2, -0.3, 1.0])
    planar = project_to_plane(np.array([u, v]), n)
    point = lift_from_plane(planar, n)
    assert np.isclose(np.dot(point, n), 1.0)
    assert np.allclose(point[:2] / point[2], [u, v])


def test_project_to_plane_rejects_parallel_ray():
    with pytest.raises(DegenerateProjectionError):
        project_to_plane(np.array([0.0, 0.0]), np.array([1.0, 0.0, 0.0]))


@given(st.tuples(finite, finite, finite).map(np.array))
def test_nearest_rotation_of_a_rotation_is_itself(rotvec):
    R = rotation_exp(rotvec)
    assert np.allclose(nearest_rotation(R), R, atol=1e-10)


def test_nearest_rotation_never_returns_a_reflection():
    R = nearest_rotation(np.diag([1.0, 1.0, -1.0]) * 2.0)
    assert np.isclose(np.linalg.det(R), 1.0)
    assert np.allclose(R.T @ R, np.eye(3))


def test_nearest_rotation_of_scaled_rotation():
    R = Rotation.from_rotvec([0.3, -0.2, 0.9]).as_matrix()
    assert np.allclose(nearest_rotation(3.7 * R), R)


def test_nearest_rotation_matches_orthogonal_procrustes():
    rng = np.random.default_rng(12)
    for R in Rotation.random(20, 12).as_matrix():
        M = R + 0.01 * rng.normal(size=(3, 3))
        expected, _ = orthogonal_procrustes(np.eye(3), M)
        nearest = nearest_rotation(M)
        assert np.allclose(nearest, expected, atol=1e-10)
        # no sampled rotation around it is closer to M
        nearby = Rotation.from_rotvec(rng.normal(scale=0.01, size=(50, 3))).as_matrix() @ nearest
        assert np.all(np.linalg.norm(nearby - M, axis=(1, 2)) >= np.linalg.norm(nearest - M) - 1e-12)


def test_nearest_rotation_rejects_rank_one():
    with pytest.raises(DegenerateRotationError):
        nearest_rotation(np.outer([1.0, 2.0, 3.0], [0.0, 1.0, 0.0]))


def test_rotation_log_at_pi_picks_positive_first_component():
    R = rotation_exp([0.0, -np.pi, 0.0])
    v = rotation_log(R)
    assert np.isclose(np.linalg.norm(v), np.pi)
    assert v[1] > 0


@given(st.tuples(finite, finite, finite).map(np.array))
def test_geodesic_angle_is_zero_on_itself_and_symmetric(rotvec):
    R = rotation_exp(rotvec)
    S = rotation_exp([0.1, 0.2, -0.3])
    assert geodesic_angle(R, R) < 1e-7
    assert np.isclose(geodesic_angle(R, S), geodesic_angle(S, R), atol=1e-9)
    assert 0.0 <= geodesic_angle(R, S) <= np.pi + 1e-12


def test_geodesic_angle_matches_rotation_angle():
    assert np.isclose(geodesic_angle(np.eye(3), rotation_exp([0.0, 0.0, 0.25])), 0.25)


def test_angle_between():
    assert np.isclose(angle_between([1, 0, 0], [0, 1, 0]), np.pi / 2)
    assert np.isclose(angle_between([1, 0, 0], [-1, 0, 0]), np.pi)
    assert angle_between([0, 0, 2], [0, 0, 5]) == 0.0


def test_unit_rejects_zero_vector():
    with pytest.raises(InvalidInputError):
        unit([0.0, 0.0, 0.0])


def test_rigid_transform_compose_and_inverse():
    a = RigidTransform.from_rotvec([0.1, 0.2, 0.3], [1.0, -2.0, 0.5])
    b = RigidTransform.from_rotvec([-0.4, 0.0, 0.2], [0.0, 0.3, 0.1])
    p = np.array([[0.2, 0.4, -0.1], [1.0, 0.0, 0.0]])
    assert np.allclose((a @ b).apply(p), a.apply(b.apply(p)))
    assert np.allclose((a @ a.inverse()).as_matrix(), np.eye(4))


def test_rigid_transform_rejects_non_rotation():
    with pytest.raises(InvalidInputError):
        RigidTransform(np.diag([1.0, 1.0, -1.0]), np.zeros(3))
    with pytest.raises(InvalidInputError):
        RigidTransform(np.eye(3) * 1.01, np.zeros(3))


def test_look_at_points_the_optical_axis_at_the_target():
    eye, target = np.array([1.6, 0.6, 0.9]), np.array([0.0, 0.0, 0.4])
    T = look_at(eye, target)
    assert np.allclose(T.apply(eye), 0.0)
    target_camera = T.apply(target)
    assert np.allclose(target_camera[:2], 0.0, atol=1e-12)
    assert target_camera[2] > 0
    # base up projects to image "up", i.e. negative camera y
    assert (T.rotation @ np.array([0.0, 0.0, 1.0]))[1] < 0
