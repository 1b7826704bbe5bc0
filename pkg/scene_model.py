"""
Scene Model - build123d Version

This module builds a 3D model of a calibration scene with:
- Robot links as cylinders between consecutive joint origins
- Joints as short cylinders along their rotation axes
- Keypoints as small spheres
- Ground-truth camera and, optionally, the estimated camera as frustum cones

Every part carries a `material:<name>` label that the Three.js viewer uses to
colour it. The model is in millimetres, like the exported GLTF.

Usage:
    from scene_model import generate_scene_model, get_default_parameters

    model = generate_scene_model(config.scene, get_default_parameters(), estimate=result.estimate.transform)
    path = generate_temp_file(model, "gltf")
"""

import logging

import numpy as np
from build123d import *

from utils import DotDict

logger = logging.getLogger(__name__)


MM_PER_M = 1000.0


def get_default_parameters():
    """
    Returns the default drawing sizes of the scene model.

    Returns:
        dict: Nested dictionary of drawing parameters (millimetres)
    """
    return {
        "Robot": [
            {"link_radius": 30},
            {"joint_radius": 45},
            {"joint_length": 80},
            {"keypoint_radius": 12}
        ],
        "Camera": [
            {"frustum_length": 150},
            {"frustum_radius": 90},
            {"body_size": 60}
        ]
    }


def _placed(shape, origin, direction, material):
    """Move a Z-aligned shape so its local Z runs along `direction` from `origin`."""
    plane = Plane(origin=tuple(float(v) for v in origin), z_dir=tuple(float(v) for v in direction))
    part = shape.moved(Location(plane))
    part.label = f"material:{material}"
    return part


def _segment(start, end, radius, material):
    length = float(np.linalg.norm(end - start))
    if length < 1e-6:
        return None
    cylinder = Cylinder(radius, length, align=(Align.CENTER, Align.CENTER, Align.MIN))
    return _placed(cylinder, start, (end - start) / length, material)


def create_camera(camera_from_base, parameters, material):
    """
    Camera body and viewing frustum.

    The frustum apex sits on the optical centre and opens along the camera's +z.

    Args:
        camera_from_base: RigidTransform x_c = R x_b + t
        parameters: Scene model parameters
        material: Material name for both parts

    Returns:
        list: build123d parts
    """
    p = DotDict(parameters)
    base_from_camera = camera_from_base.inverse()
    center = base_from_camera.translation * MM_PER_M
    optical_axis = base_from_camera.rotation[:, 2]

    body = Box(p.body_size, p.body_size, p.body_size)
    frustum = Cone(p.frustum_radius, 0, p.frustum_length, align=(Align.CENTER, Align.CENTER, Align.MIN))
    return [
        _placed(body, center - optical_axis * p.body_size / 2, optical_axis, material),
        _placed(frustum, center + optical_axis * p.frustum_length, -optical_axis, material),
    ]


def create_robot(robot, q, keypoints, parameters):
    """
    Robot links, joints and keypoints at configuration q.

    Returns:
        list: build123d parts
    """
    p = DotDict(parameters)
    frames = robot.link_transforms(q)
    chain = [np.zeros(3)] + [robot.forward_axis_position(q, j)[1] for j in range(1, robot.dof + 1)]
    chain.append(frames[-1].translation)

    parts = []
    for start, end in zip(chain[:-1], chain[1:]):
        link = _segment(np.asarray(start) * MM_PER_M, np.asarray(end) * MM_PER_M, p.link_radius, "metal")
        if link is not None:
            parts.append(link)

    for j in range(1, robot.dof + 1):
        axis, position = robot.forward_axis_position(q, j)
        joint = Cylinder(p.joint_radius, p.joint_length)
        parts.append(_placed(joint, position * MM_PER_M, axis, "joint"))

    for kp in keypoints:
        point = robot.link_points_world(q, kp.link, [kp.point])[0] * MM_PER_M
        sphere = Sphere(p.keypoint_radius)
        sphere = sphere.moved(Location(tuple(float(v) for v in point)))
        sphere.label = "material:keypoint"
        parts.append(sphere)
    return parts


def generate_scene_model(scene, parameters=None, q=None, estimate=None):
    """
    Generate the complete scene.

    Args:
        scene: SceneDefinition
        parameters: Scene model parameters (defaults from get_default_parameters)
        q: Robot configuration (defaults to the mid-range configuration)
        estimate: Optional estimated camera-from-base RigidTransform

    Returns:
        Compound object representing the scene
    """
    parameters = parameters or get_default_parameters()
    q = scene.robot.neutral_configuration() if q is None else np.asarray(q, dtype=float)

    parts = create_robot(scene.robot, q, scene.keypoints, parameters)
    parts += create_camera(scene.camera_from_base, parameters, "camera")
    if estimate is not None:
        parts += create_camera(estimate, parameters, "estimate")

    logger.debug("scene model: %d parts", len(parts))
    return Compound(children=parts)
