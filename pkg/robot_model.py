"""
Robot Model Module

Serial-manipulator kinematics for revolute chains.

Features:
- Joint descriptors: fixed parent-to-joint origin (xyz + fixed-axis rpy) and a local rotation axis
- Forward kinematics of every link frame for a configuration
- forward_axis_position: world rotation axis and origin of one joint (the map used by the calibrator)
- link_points_world: keypoints rigidly attached to a link, in the base frame
- Built-in descriptions: a 7-DoF Panda-like arm and a minimal two-joint planar arm

Indexing:
    Joints are numbered 1..N. Link 0 is the base; link k is moved by joints 1..k.

Usage:
    from robot_model import RobotModel, builtin_description

    robot = RobotModel.from_dict(builtin_description("panda"))
    axis_b, position_b = robot.forward_axis_position(q, 4)
"""

import logging
from dataclasses import dataclass

import numpy as np
from scipy.spatial.transform import Rotation

from errors import InvalidInputError, InvalidJointError
from geometry import RigidTransform, unit
from utils import DotDict

logger = logging.getLogger(__name__)


PANDA_DESCRIPTION = {
    "name": "panda",
    "joints": [
        {"name": "joint1", "xyz": [0.0, 0.0, 0.333], "rpy": [0.0, 0.0, 0.0],
         "axis": [0, 0, 1], "limits": [-2.8973, 2.8973]},
        {"name": "joint2", "xyz": [0.0, 0.0, 0.0], "rpy": [-np.pi / 2, 0.0, 0.0],
         "axis": [0, 0, 1], "limits": [-1.7628, 1.7628]},
        {"name": "joint3", "xyz": [0.0, -0.316, 0.0], "rpy": [np.pi / 2, 0.0, 0.0],
         "axis": [0, 0, 1], "limits": [-2.8973, 2.8973]},
        {"name": "joint4", "xyz": [0.0825, 0.0, 0.0], "rpy": [np.pi / 2, 0.0, 0.0],
         "axis": [0, 0, 1], "limits": [-3.0718, -0.0698]},
        {"name": "joint5", "xyz": [-0.0825, 0.384, 0.0], "rpy": [-np.pi / 2, 0.0, 0.0],
         "axis": [0, 0, 1], "limits": [-2.8973, 2.8973]},
        {"name": "joint6", "xyz": [0.0, 0.0, 0.0], "rpy": [np.pi / 2, 0.0, 0.0],
         "axis": [0, 0, 1], "limits": [-0.0175, 3.7525]},
        {"name": "joint7", "xyz": [0.088, 0.0, 0.0], "rpy": [np.pi / 2, 0.0, 0.0],
         "axis": [0, 0, 1], "limits": [-2.8973, 2.8973]},
    ],
}

TWO_JOINT_DESCRIPTION = {
    "name": "two_joint",
    "joints": [
        {"name": "shoulder", "xyz": [0.0, 0.0, 0.0], "rpy": [0.0, 0.0, 0.0],
         "axis": [0, 0, 1], "limits": [-np.pi, np.pi]},
        {"name": "elbow", "xyz": [0.5, 0.0, 0.0], "rpy": [0.0, 0.0, 0.0],
         "axis": [0, 0, 1], "limits": [-np.pi, np.pi]},
    ],
}

BUILTIN_DESCRIPTIONS = {
    "panda": PANDA_DESCRIPTION,
    "two_joint": TWO_JOINT_DESCRIPTION,
}


def get_default_parameters():
    """
    Default robot-model parameters.

    Returns:
        dict: Sectioned parameter dictionary
    """
    return {
        "Robot": [
            {"robot": "panda"},         # built-in name or a description mapping
        ]
    }


def builtin_description(name):
    """Return a copy-safe built-in robot description by name."""
    try:
        return BUILTIN_DESCRIPTIONS[name]
    except KeyError:
        raise InvalidInputError(
            f"unknown robot '{name}', expected one of {sorted(BUILTIN_DESCRIPTIONS)}") from None


@dataclass(frozen=True, eq=False)
class Joint:
    """
    One revolute joint.

    Attributes:
        name: Joint name
        origin: Fixed transform from the parent link frame to the joint frame
        axis: Unit rotation axis in the joint frame
        limits: (min, max) angle in radians
    """
    name: str
    origin: RigidTransform
    axis: np.ndarray
    limits: tuple

    def __post_init__(self):
        axis = unit(self.axis, f"axis of joint '{self.name}'")
        axis.setflags(write=False)
        object.__setattr__(self, "axis", axis)
        lo, hi = (float(v) for v in self.limits)
        if not lo < hi:
            raise InvalidInputError(f"joint '{self.name}' limits must satisfy min < max, got ({lo}, {hi})")
        object.__setattr__(self, "limits", (lo, hi))

    def motion(self, angle):
        """Joint-frame rotation by `angle` about the joint axis."""
        return RigidTransform(Rotation.from_rotvec(self.axis * angle).as_matrix(), np.zeros(3))


@dataclass(frozen=True, eq=False)
class RobotModel:
    """
    Immutable serial chain of revolute joints.

    Attributes:
        joints: Tuple of Joint, base to tip
        name: Robot name
    """
    joints: tuple
    name: str = "robot"

    def __post_init__(self):
        joints = tuple(self.joints)
        if len(joints) < 1:
            raise InvalidInputError("robot model needs at least one joint")
        object.__setattr__(self, "joints", joints)

    @classmethod
    def from_dict(cls, description):
        """
        Build a model from a description mapping.

        Args:
            description: {"name": str, "joints": [{"name", "type", "xyz", "rpy", "axis", "limits"}, ...]}
                or the name of a built-in description

        Returns:
            RobotModel

        Raises:
            InvalidInputError: On prismatic or unknown joint types and malformed entries
        """
        if isinstance(description, str):
            description = builtin_description(description)
        entries = description.get("joints") or []
        joints = []
        for index, entry in enumerate(entries, start=1):
            name = entry.get("name", f"joint{index}")
            joint_type = entry.get("type", "revolute")
            if joint_type != "revolute":
                raise InvalidInputError(
                    f"joint '{name}' has type '{joint_type}'; only revolute joints are supported")
            try:
                origin = RigidTransform.from_xyz_rpy(entry.get("xyz", [0, 0, 0]), entry.get("rpy", [0, 0, 0]))
                limits = entry.get("limits", [-np.pi, np.pi])
                joints.append(Joint(name=name, origin=origin, axis=entry["axis"], limits=tuple(limits)))
            except (KeyError, TypeError, ValueError) as e:
                if isinstance(e, InvalidInputError):
                    raise
                raise InvalidInputError(f"joint '{name}' is malformed: {e}") from e
        model = cls(joints=tuple(joints), name=description.get("name", "robot"))
        logger.debug("Loaded robot '%s' with %d joints", model.name, model.dof)
        return model

    @classmethod
    def from_parameters(cls, parameters):
        """Build the model named (or described) by the `robot` parameter."""
        return cls.from_dict(DotDict(parameters).robot)

    @property
    def dof(self):
        return len(self.joints)

    @property
    def joint_limits(self):
        """(N, 2) array of (min, max) per joint."""
        return np.array([joint.limits for joint in self.joints])

    def check_joint(self, j):
        if not (isinstance(j, (int, np.integer)) and 1 <= j <= self.dof):
            raise InvalidJointError(f"joint index {j} outside 1..{self.dof}")

    def check_link(self, link):
        if not (isinstance(link, (int, np.integer)) and 0 <= link <= self.dof):
            raise InvalidJointError(f"link index {link} outside 0..{self.dof}")

    def _configuration(self, q):
        q = np.asarray(q, dtype=float).reshape(-1)
        if q.shape != (self.dof,):
            raise InvalidInputError(f"configuration has {q.size} angles, robot has {self.dof} joints")
        if not np.all(np.isfinite(q)):
            raise InvalidInputError(f"configuration must be finite, got {q}")
        return q

    def within_limits(self, q, tol=1e-9):
        """True iff every angle lies inside its joint limits (with tolerance)."""
        q = self._configuration(q)
        limits = self.joint_limits
        return bool(np.all(q >= limits[:, 0] - tol) and np.all(q <= limits[:, 1] + tol))

    def link_transforms(self, q):
        """
        Base-from-link transforms of every link under configuration q.

        T_0 = identity, T_k = T_{k-1} . origin_k . Rot(axis_k, q_k)

        Args:
            q: Joint angles (N,)

        Returns:
            list: N + 1 RigidTransform, index k is link k
        """
        q = self._configuration(q)
        frames = [RigidTransform.identity()]
        for joint, angle in zip(self.joints, q):
            frames.append(frames[-1] @ joint.origin @ joint.motion(angle))
        return frames

    def forward_axis_position(self, q, j):
        """
        World rotation axis and origin of joint j under configuration q.

        Args:
            q: Joint angles (N,)
            j: Joint index, 1..N

        Returns:
            tuple: (axis, position) in the base frame; axis is a unit vector, position in meters

        Raises:
            InvalidJointError: If j is out of range
        """
        self.check_joint(j)
        frames = self.link_transforms(q)
        joint = self.joints[j - 1]
        joint_frame = frames[j - 1] @ joint.origin
        return joint_frame.rotation @ joint.axis, joint_frame.translation.copy()

    def link_points_world(self, q, link, local_points):
        """
        Points rigidly attached to a link, expressed in the base frame.

        Args:
            q: Joint angles (N,)
            link: Link index, 0..N
            local_points: (n, 3) array of points in the link frame

        Returns:
            np.ndarray: (n, 3) base-frame points
        """
        self.check_link(link)
        points = np.atleast_2d(np.asarray(local_points, dtype=float))
        return self.link_transforms(q)[link].apply(points)

    def neutral_configuration(self):
        """Mid-range configuration."""
        return self.joint_limits.mean(axis=1)
