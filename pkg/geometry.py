"""
Geometry Core Module

Shared numerical geometry for the calibration pipeline:
- RigidTransform: SE(3) pose (rotation + translation) used for T_bc and scene poses
- CameraIntrinsics: pinhole intrinsics and pixel normalization
- Projection of normalized image points onto planes through a unit-distance point
- Nearest rotation (SVD projection onto SO(3)), rotation log/exp, geodesic angle
- look_at camera placement helper

Conventions:
    Camera frame: +z is the optical axis, +x to the right, +y down.
    A point x_b in the robot base frame maps to the camera frame as
    x_c = R_bc @ x_b + t_bc.

Usage:
    from geometry import CameraIntrinsics, normalize_pixel, nearest_rotation

    intr = CameraIntrinsics(fx=1000, fy=1000, cx=960, cy=540)
    uv = normalize_pixel((1960, 1540), intr)   # -> (1, 1)
    R = nearest_rotation(2.5 * np.eye(3))      # -> identity
"""

from dataclasses import dataclass

import numpy as np
from scipy.spatial.transform import Rotation

from errors import (
    DegenerateProjectionError,
    DegenerateRotationError,
    InvalidInputError,
)


ORTHOGONALITY_TOL = 1e-9
PARALLEL_RAY_TOL = 1e-9
RANK_TOL = 1e-12


def unit(vector, name="vector"):
    """
    Return vector / ||vector||.

    Args:
        vector: Array-like 3-vector
        name: Used in the error message

    Returns:
        np.ndarray: Unit-length copy

    Raises:
        InvalidInputError: If the vector is non-finite or (numerically) zero
    """
    v = np.asarray(vector, dtype=float)
    norm = np.linalg.norm(v)
    if not np.all(np.isfinite(v)) or norm < 1e-15:
        raise InvalidInputError(f"{name} cannot be normalized: {v}")
    return v / norm


def skew(v):
    """Cross-product matrix: skew(a) @ b == np.cross(a, b)."""
    x, y, z = np.asarray(v, dtype=float)
    return np.array([
        [0.0, -z, y],
        [z, 0.0, -x],
        [-y, x, 0.0],
    ])


@dataclass(frozen=True, eq=False)
class RigidTransform:
    """
    Rigid transform x' = rotation @ x + translation.

    Attributes:
        rotation: 3x3 proper rotation matrix
        translation: 3-vector (meters)
    """
    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        R = np.array(self.rotation, dtype=float).reshape(3, 3)
        t = np.array(self.translation, dtype=float).reshape(3)
        if not (np.all(np.isfinite(R)) and np.all(np.isfinite(t))):
            raise InvalidInputError("rigid transform has non-finite entries")
        if np.linalg.norm(R.T @ R - np.eye(3)) >= ORTHOGONALITY_TOL:
            raise InvalidInputError("rotation is not orthogonal")
        if abs(np.linalg.det(R) - 1.0) > ORTHOGONALITY_TOL:
            raise InvalidInputError(f"rotation determinant is {np.linalg.det(R):.12f}, expected 1")
        R.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls):
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_matrix(cls, matrix):
        T = np.asarray(matrix, dtype=float)
        return cls(T[:3, :3], T[:3, 3])

    @classmethod
    def from_rotvec(cls, rotvec, translation):
        return cls(rotation_exp(rotvec), translation)

    @classmethod
    def from_xyz_rpy(cls, xyz, rpy):
        """Fixed-axis roll/pitch/yaw (URDF origin convention)."""
        return cls(Rotation.from_euler("xyz", rpy).as_matrix(), xyz)

    def as_matrix(self):
        T = np.eye(4)
        T[:3, :3] = self.rotation
        T[:3, 3] = self.translation
        return T

    def inverse(self):
        return RigidTransform(self.rotation.T, -self.rotation.T @ self.translation)

    def compose(self, other):
        """self ∘ other: apply `other` first, then `self`."""
        return RigidTransform(
            self.rotation @ other.rotation,
            self.rotation @ other.translation + self.translation,
        )

    def __matmul__(self, other):
        return self.compose(other)

    def apply(self, points):
        """Transform a 3-vector or an (n, 3) array of points."""
        p = np.asarray(points, dtype=float)
        return p @ self.rotation.T + self.translation

    def rotvec(self):
        return rotation_log(self.rotation)

    def __repr__(self):
        return (f"RigidTransform(rotvec={np.array2string(self.rotvec(), precision=6)}, "
                f"translation={np.array2string(self.translation, precision=6)})")


@dataclass(frozen=True)
class CameraIntrinsics:
    """
    Pinhole intrinsics.

    Attributes:
        fx, fy: Focal lengths (pixels)
        cx, cy: Principal point (pixels)
        width, height: Optional image size (pixels), used for visibility clipping
    """
    fx: float
    fy: float
    cx: float
    cy: float
    width: int = None
    height: int = None

    def __post_init__(self):
        values = (self.fx, self.fy, self.cx, self.cy)
        if not all(np.isfinite(v) for v in values):
            raise InvalidInputError(f"intrinsics must be finite, got {values}")
        if self.fx <= 0 or self.fy <= 0:
            raise InvalidInputError(f"focal lengths must be positive, got fx={self.fx}, fy={self.fy}")

    @property
    def matrix(self):
        return np.array([
            [self.fx, 0.0, self.cx],
            [0.0, self.fy, self.cy],
            [0.0, 0.0, 1.0],
        ])

    def project(self, points_camera):
        """
        Pinhole projection of camera-frame points to pixels.

        Args:
            points_camera: (n, 3) array with z > 0

        Returns:
            np.ndarray: (n, 2) pixel coordinates
        """
        p = np.atleast_2d(np.asarray(points_camera, dtype=float))
        u = p[:, 0] / p[:, 2]
        v = p[:, 1] / p[:, 2]
        return np.column_stack((self.fx * u + self.cx, self.fy * v + self.cy))

    def in_image(self, pixels):
        """Boolean mask of pixels inside the image; all True when no size is set."""
        px = np.atleast_2d(np.asarray(pixels, dtype=float))
        if self.width is None or self.height is None:
            return np.ones(len(px), dtype=bool)
        return ((px[:, 0] >= 0) & (px[:, 0] < self.width)
                & (px[:, 1] >= 0) & (px[:, 1] < self.height))


def normalize_pixel(p, intr):
    """
    Normalize pixel coordinates with respect to the intrinsics.

    u = (px - cx) / fx, v = (py - cy) / fy. Works on a single pair or an (n, 2) array.

    Args:
        p: Pixel coordinate pair or (n, 2) array
        intr: CameraIntrinsics

    Returns:
        np.ndarray: Normalized image point(s), same shape as p

    Raises:
        InvalidInputError: On non-finite input
    """
    px = np.asarray(p, dtype=float)
    if not np.all(np.isfinite(px)):
        raise InvalidInputError(f"pixel coordinates must be finite, got {p}")
    return np.stack(((px[..., 0] - intr.cx) / intr.fx,
                     (px[..., 1] - intr.cy) / intr.fy), axis=-1)


def plane_basis(normal):
    """
    Deterministic orthonormal basis (e1, e2) of the plane with the given normal.

    e1 is the component of the coordinate axis least aligned with the normal
    (first one on ties) orthogonal to it, e2 = normal x e1, so (e1, e2, normal)
    is right-handed.

    Args:
        normal: Unit 3-vector

    Returns:
        tuple: (e1, e2) unit 3-vectors
    """
    n = np.asarray(normal, dtype=float)
    h = np.eye(3)[int(np.argmin(np.abs(n)))]
    e1 = h - np.dot(h, n) * n
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(n, e1)
    return e1, e2


def project_to_plane(p, normal):
    """
    Perspective-project normalized image point(s) onto the plane {x : n.x = 1}.

    The plane sits at unit distance along its normal from the camera center;
    the result is expressed in the plane_basis(normal) coordinates, with the
    foot of the perpendicular (the point n itself) as origin.

    Args:
        p: Normalized image point (u, v) or (k, 2) array
        normal: Unit normal of the plane

    Returns:
        np.ndarray: Planar coordinates, shape (2,) or (k, 2)

    Raises:
        DegenerateProjectionError: If a viewing ray is nearly parallel to the plane
    """
    n = np.asarray(normal, dtype=float)
    uv = np.asarray(p, dtype=float)
    single = uv.ndim == 1
    uv = np.atleast_2d(uv)
    rays = np.column_stack((uv, np.ones(len(uv))))
    denom = rays @ n
    if np.any(np.abs(denom) <= PARALLEL_RAY_TOL):
        raise DegenerateProjectionError(
            f"viewing ray nearly parallel to plane with normal {n} (|ray.n| = {np.min(np.abs(denom)):.3e})")
    points = rays / denom[:, None]
    e1, e2 = plane_basis(n)
    planar = np.column_stack((points @ e1, points @ e2))
    return planar[0] if single else planar


def lift_from_plane(xy, normal):
    """
    3D camera-frame point of planar coordinates on the plane {x : n.x = 1}.

    Inverse of project_to_plane up to the ray scale.
    """
    n = np.asarray(normal, dtype=float)
    e1, e2 = plane_basis(n)
    x, y = np.asarray(xy, dtype=float)
    return n + x * e1 + y * e2


def nearest_rotation(M):
    """
    Closest proper rotation to M in Frobenius norm (orthogonal Procrustes).

    Computes U V^T from M = U S V^T, flipping the last column of U when the
    product would be a reflection.

    Args:
        M: 3x3 real matrix of numerical rank 3

    Returns:
        np.ndarray: 3x3 rotation matrix

    Raises:
        DegenerateRotationError: If the second singular value is below 1e-12
    """
    U, S, Vt = np.linalg.svd(np.asarray(M, dtype=float))
    if S[1] < RANK_TOL:
        raise DegenerateRotationError(f"matrix is rank-deficient, singular values {S}")
    R = U @ Vt
    if np.linalg.det(R) < 0:
        U[:, -1] *= -1
        R = U @ Vt
    return R


def rotation_exp(rotvec):
    """Rotation matrix of an axis-angle vector (radians)."""
    return Rotation.from_rotvec(np.asarray(rotvec, dtype=float)).as_matrix()


def rotation_log(R):
    """
    Axis-angle vector of a rotation, angle in [0, pi].

    At angle pi, where v and -v describe the same rotation, the representative
    whose first nonzero component is positive is returned.

    Args:
        R: 3x3 rotation matrix

    Returns:
        np.ndarray: Rotation vector (radians)
    """
    v = Rotation.from_matrix(np.asarray(R, dtype=float)).as_rotvec()
    angle = np.linalg.norm(v)
    if np.pi - angle < 1e-9:
        nonzero = np.flatnonzero(np.abs(v) > 1e-12)
        if nonzero.size and v[nonzero[0]] < 0:
            v = -v
    return v


def geodesic_angle(R_a, R_b):
    """
    Geodesic distance on SO(3): angle of R_a^T R_b, in [0, pi].

    Equal to arccos((trace(R_a^T R_b) - 1) / 2), evaluated through the log map
    to keep precision for small angles.
    """
    return float(np.linalg.norm(rotation_log(np.asarray(R_a).T @ np.asarray(R_b))))


def angle_between(a, b):
    """Angle between two vectors in radians, in [0, pi]."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return float(np.arctan2(np.linalg.norm(np.cross(a, b)), np.dot(a, b)))


def look_at(eye, target, up=(0.0, 0.0, 1.0)):
    """
    Camera-from-base transform of a camera at `eye` looking at `target`.

    The optical axis (+z) points at the target, +y points "down" relative
    to `up`.

    Args:
        eye: Camera center in the base frame (meters)
        target: Point the optical axis goes through (meters)
        up: Base-frame up direction

    Returns:
        RigidTransform: T_bc mapping base points into the camera frame
    """
    eye = np.asarray(eye, dtype=float)
    z = unit(np.asarray(target, dtype=float) - eye, "viewing direction")
    x = unit(np.cross(z, np.asarray(up, dtype=float)), "camera x axis (up parallel to view?)")
    y = np.cross(z, x)
    R_base_from_camera = np.column_stack((x, y, z))
    R = R_base_from_camera.T
    return RigidTransform(R, -R @ eye)
