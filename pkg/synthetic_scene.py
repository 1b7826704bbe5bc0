"""
Synthetic Scene Module

Ground-truth simulator standing in for a keypoint tracker.

Features:
- SceneDefinition: robot, hidden camera pose, intrinsics, keypoints rigidly attached to links
- NoiseSpec: pixel noise, track dropout, drifting outlier tracks, forced runner-up axis selection
- execute_motion: sweep one joint and emit per-keypoint trajectories of normalized image points
- Ground-truth helpers for the moved joint's axis in the camera frame

Frame schedule:
    delta_k = linspace(0, sweep, frames). A keypoint is dropped when it leaves the
    half-space in front of the camera (z <= 1e-6) at any frame; leaving the image
    (when clip_to_image is set) or a dropout event truncates its track instead.

Usage:
    from synthetic_scene import SceneDefinition, execute_motion

    trajectories = execute_motion(scene, motion, frames=60, rng_seed=[seed, motion_id, 1])
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from errors import EmptyObservationError, InvalidInputError
from geometry import normalize_pixel
from utils import DotDict

logger = logging.getLogger(__name__)


MIN_DEPTH = 1e-6
OFF_AXIS_TOL = 1e-6
DELTA_RTOL = 1e-9

PANDA_KEYPOINTS = [
    {"link": 1, "points": [[0.06, 0.0, -0.1], [-0.05, 0.05, -0.05]]},
    {"link": 2, "points": [[0.0, -0.08, 0.06], [0.05, -0.15, -0.04]]},
    {"link": 3, "points": [[0.06, 0.04, -0.08], [-0.04, 0.06, -0.1]]},
    {"link": 4, "points": [[-0.05, 0.1, 0.05], [0.04, 0.08, -0.05]]},
    {"link": 5, "points": [[0.05, 0.05, -0.15], [-0.05, 0.02, -0.2], [0.0, 0.09, -0.05]]},
    {"link": 6, "points": [[0.05, -0.04, 0.02], [0.1, 0.03, -0.02]]},
    {"link": 7, "points": [[0.05, 0.05, 0.1], [-0.05, 0.04, 0.12], [0.0, -0.06, 0.15], [0.06, -0.03, 0.2]]},
]

TWO_JOINT_KEYPOINTS = [
    {"link": 1, "points": [[0.2, 0.05, 0.0], [0.35, -0.04, 0.05], [0.45, 0.03, -0.04]]},
    {"link": 2, "points": [[0.1, 0.04, 0.02], [0.2, -0.05, 0.08], [0.3, 0.02, -0.06], [0.25, 0.06, 0.12]]},
]


def get_default_parameters():
    """
    Default simulation parameters.

    Returns:
        dict: Sectioned parameter dictionary
    """
    return {
        "Noise": [
            {"pixel_sigma": 0.0},          # pixels
            {"dropout_prob": 0.0},         # per frame, per keypoint
            {"outlier_prob": 0.0},         # per trajectory
            {"spurious_axis_prob": 0.0},   # per motion
        ],
        "Simulation": [
            {"frames": 60},
            {"clip_to_image": False},
        ],
    }


@dataclass(frozen=True)
class NoiseSpec:
    pixel_sigma: float = 0.0
    dropout_prob: float = 0.0
    outlier_prob: float = 0.0
    spurious_axis_prob: float = 0.0

    def __post_init__(self):
        if not (np.isfinite(self.pixel_sigma) and self.pixel_sigma >= 0):
            raise InvalidInputError(f"pixel_sigma must be >= 0, got {self.pixel_sigma}")
        for name in ("dropout_prob", "outlier_prob", "spurious_axis_prob"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise InvalidInputError(f"{name} must be in [0, 1], got {value}")

    @classmethod
    def from_parameters(cls, parameters):
        p = DotDict(parameters)
        return cls(
            pixel_sigma=float(p.pixel_sigma),
            dropout_prob=float(p.dropout_prob),
            outlier_prob=float(p.outlier_prob),
            spurious_axis_prob=float(p.get("spurious_axis_prob", 0.0)),
        )


@dataclass(frozen=True)
class Keypoint:
    keypoint_id: int
    link: int
    point: tuple


def keypoints_from_groups(groups):
    """
    Flatten [{"link": k, "points": [[x, y, z], ...]}, ...] into Keypoint records.

    Keypoint ids follow the listing order.
    """
    keypoints = []
    for group in groups:
        for point in group["points"]:
            if len(point) != 3:
                raise InvalidInputError(f"keypoint on link {group['link']} must have 3 coordinates, got {point}")
            keypoints.append(Keypoint(len(keypoints), int(group["link"]), tuple(float(v) for v in point)))
    return tuple(keypoints)


@dataclass(frozen=True, eq=False)
class SceneDefinition:
    """
    Simulated ground truth.

    Attributes:
        robot: RobotModel
        camera_from_base: RigidTransform T_bc, x_c = R x_b + t
        intrinsics: CameraIntrinsics
        keypoints: Tuple of Keypoint
        noise: NoiseSpec
        clip_to_image: Treat keypoints leaving the image as track loss
    """
    robot: object
    camera_from_base: object
    intrinsics: object
    keypoints: tuple
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    clip_to_image: bool = False

    def __post_init__(self):
        keypoints = tuple(self.keypoints)
        if not keypoints:
            raise InvalidInputError("scene needs at least one keypoint")
        for kp in keypoints:
            if not 1 <= kp.link <= self.robot.dof:
                raise InvalidInputError(
                    f"keypoint {kp.keypoint_id} is attached to link {kp.link}, robot links are 1..{self.robot.dof}")
        object.__setattr__(self, "keypoints", keypoints)

    def with_camera(self, camera_from_base):
        return SceneDefinition(self.robot, camera_from_base, self.intrinsics, self.keypoints,
                               self.noise, self.clip_to_image)

    def with_noise(self, noise):
        return SceneDefinition(self.robot, self.camera_from_base, self.intrinsics, self.keypoints,
                               noise, self.clip_to_image)


@dataclass(frozen=True, eq=False)
class KeypointTrajectory:
    """
    Image track of one keypoint during one motion.

    Attributes:
        motion_id: Motion index i
        keypoint_id: Keypoint index j
        points: (k, 2) normalized image points
        deltas: (k,) signed joint displacement at each sample, |delta| nondecreasing up to |sweep|,
            sign of sweep
        joint: Moved joint
        sweep: Signed sweep of the motion
        start_config: Start configuration of the motion
        is_outlier: Simulator label for drifting tracks
        forced_spurious: Simulator label for motions reported with the runner-up axis
    """
    motion_id: int
    keypoint_id: int
    points: np.ndarray
    deltas: np.ndarray
    joint: int = 0
    sweep: float = 0.0
    start_config: tuple = ()
    is_outlier: bool = False
    forced_spurious: bool = False

    def __post_init__(self):
        points = np.array(self.points, dtype=float).reshape(-1, 2)
        deltas = np.array(self.deltas, dtype=float).reshape(-1)
        if len(points) != len(deltas):
            raise InvalidInputError(
                f"trajectory {self.motion_id}/{self.keypoint_id}: {len(points)} points but {len(deltas)} deltas")
        if not (np.all(np.isfinite(points)) and np.all(np.isfinite(deltas))):
            raise InvalidInputError(f"trajectory {self.motion_id}/{self.keypoint_id} has non-finite samples")
        if np.any(np.diff(np.abs(deltas)) < 0):
            raise InvalidInputError(f"trajectory {self.motion_id}/{self.keypoint_id}: |delta| must be nondecreasing")
        signs = np.sign(deltas)
        if np.any((signs != 0) & (signs != np.sign(self.sweep))):
            raise InvalidInputError(
                f"trajectory {self.motion_id}/{self.keypoint_id}: deltas must share the sign of sweep {self.sweep}")
        if np.any(np.abs(deltas) > abs(self.sweep) * (1.0 + DELTA_RTOL)):
            raise InvalidInputError(
                f"trajectory {self.motion_id}/{self.keypoint_id}: |delta| exceeds |sweep| = {abs(self.sweep)}")
        points.setflags(write=False)
        deltas.setflags(write=False)
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "deltas", deltas)
        object.__setattr__(self, "start_config", tuple(float(v) for v in self.start_config))

    def __len__(self):
        return len(self.deltas)

    @property
    def samples(self):
        """List of ((u, v), delta) pairs."""
        return [((float(p[0]), float(p[1])), float(d)) for p, d in zip(self.points, self.deltas)]

    @property
    def extent(self):
        """Diagonal of the bounding box of the image points."""
        return float(np.linalg.norm(np.ptp(self.points, axis=0))) if len(self.points) else 0.0


def plannable_joints(scene):
    """
    Joints whose motion moves at least one keypoint.

    A joint qualifies when a keypoint sits on a more distal link, or on its own
    link away from the joint axis.
    """
    joints = []
    for j in range(1, scene.robot.dof + 1):
        axis = scene.robot.joints[j - 1].axis
        for kp in scene.keypoints:
            if kp.link > j:
                joints.append(j)
                break
            if kp.link == j:
                p = np.asarray(kp.point)
                if np.linalg.norm(p - np.dot(p, axis) * axis) > OFF_AXIS_TOL:
                    joints.append(j)
                    break
    return joints


def true_axis_camera(scene, motion):
    """
    Ground-truth axis of the moved joint in the camera frame.

    Returns:
        tuple: (unit axis, point on the axis) in camera coordinates
    """
    axis_b, position_b = scene.robot.forward_axis_position(np.array(motion.start_config), motion.joint)
    T = scene.camera_from_base
    return T.rotation @ axis_b, T.apply(position_b)


def camera_points(scene, motion, deltas, keypoints):
    """(frames, n, 3) camera-frame positions of the given keypoints along the sweep."""
    frames = []
    for delta in deltas:
        q = motion.configuration_at(delta)
        links = scene.robot.link_transforms(q)
        world = np.array([links[kp.link].apply(np.asarray(kp.point)) for kp in keypoints])
        frames.append(scene.camera_from_base.apply(world))
    return np.array(frames)


def _drift_track(rng, start, frames, pixel_scale):
    """Linear drift from `start` with random direction and speed (pixels per frame)."""
    angle = rng.uniform(0.0, 2.0 * np.pi)
    speed = rng.uniform(0.5, 2.0) * pixel_scale
    steps = np.arange(frames)[:, None]
    return start + steps * speed * np.array([np.cos(angle), np.sin(angle)])


def execute_motion(scene, motion, frames=60, rng_seed=0, motion_id=0, forced_spurious=False):
    """
    Simulate one exploratory motion and return the tracked keypoints.

    Pipeline per keypoint on a link distal to the moved joint: base frame ->
    camera frame -> pinhole pixels -> Gaussian pixel noise -> optional drifting
    outlier replacement -> truncation at the first dropout / image exit ->
    normalization.

    Args:
        scene: SceneDefinition
        motion: ExploratoryMotion
        frames: Number of samples over the sweep (>= 2)
        rng_seed: Seed for numpy's default_rng
        motion_id: Motion index stamped on the trajectories
        forced_spurious: Label stamped on the trajectories

    Returns:
        list: KeypointTrajectory ordered by keypoint_id (tracks with fewer than 2 samples are omitted)

    Raises:
        EmptyObservationError: If no keypoint trajectory survives
    """
    if frames < 2:
        raise InvalidInputError(f"frames must be at least 2, got {frames}")
    scene.robot.check_joint(motion.joint)

    rng = np.random.default_rng(rng_seed)
    noise = scene.noise
    intr = scene.intrinsics
    deltas = np.linspace(0.0, motion.sweep, frames)
    moving = [kp for kp in scene.keypoints if kp.link >= motion.joint]
    if not moving:
        raise EmptyObservationError(f"motion {motion_id}: no keypoints distal to joint {motion.joint}")

    cam = camera_points(scene, motion, deltas, moving)
    trajectories = []
    for index, kp in enumerate(moving):
        # draws happen for every keypoint so later keypoints see the same stream
        pixel_noise = rng.normal(0.0, 1.0, size=(frames, 2)) * noise.pixel_sigma
        lost = rng.random(frames) < noise.dropout_prob
        make_outlier = rng.random() < noise.outlier_prob
        drift_state = np.random.default_rng(rng.integers(2**32))

        depth = cam[:, index, 2]
        if np.any(depth <= MIN_DEPTH):
            logger.debug("motion %d: keypoint %d behind the camera, dropped", motion_id, kp.keypoint_id)
            continue

        pixels = intr.project(cam[:, index, :])
        if make_outlier:
            pixels = _drift_track(drift_state, pixels[0], frames, pixel_scale=max(intr.fx, intr.fy) * 2e-3)
        pixels = pixels + pixel_noise

        keep = frames
        if np.any(lost):
            keep = int(np.argmax(lost))
        if scene.clip_to_image:
            outside = ~intr.in_image(pixels)
            if np.any(outside):
                keep = min(keep, int(np.argmax(outside)))
        if keep < 2:
            continue

        trajectories.append(KeypointTrajectory(
            motion_id=motion_id,
            keypoint_id=kp.keypoint_id,
            points=normalize_pixel(pixels[:keep], intr),
            deltas=deltas[:keep],
            joint=motion.joint,
            sweep=motion.sweep,
            start_config=motion.start_config,
            is_outlier=bool(make_outlier),
            forced_spurious=forced_spurious,
        ))

    if not trajectories:
        raise EmptyObservationError(f"motion {motion_id}: no visible keypoint trajectories")
    logger.debug("motion %d: %d trajectories (%d outliers)", motion_id, len(trajectories),
                 sum(t.is_outlier for t in trajectories))
    return trajectories
