import numpy as np
import pytest

from calibrator import CalibrationObservation
from geometry import CameraIntrinsics, look_at, unit
from motion_estimation import MotionObservation
from motion_planner import ExploratoryMotion
from robot_model import RobotModel
from synthetic_scene import PANDA_KEYPOINTS, SceneDefinition, keypoints_from_groups


@pytest.fixture
def intrinsics():
    return CameraIntrinsics(fx=1380.0, fy=1380.0, cx=960.0, cy=540.0, width=1920, height=1080)


@pytest.fixture
def panda():
    return RobotModel.from_dict("panda")


@pytest.fixture
def two_joint():
    return RobotModel.from_dict("two_joint")


@pytest.fixture
def camera_from_base():
    return look_at((1.6, 0.6, 0.9), (0.0, 0.0, 0.4))


@pytest.fixture
def panda_scene(panda, camera_from_base, intrinsics):
    return SceneDefinition(
        robot=panda,
        camera_from_base=camera_from_base,
        intrinsics=intrinsics,
        keypoints=keypoints_from_groups(PANDA_KEYPOINTS),
    )


def true_observation(robot, transform, q, joint, motion_id=0, best=0.0, second=1.0, inlier_ratio=1.0,
                     axis_support=1.0):
    """Noise-free CalibrationObservation of one joint at configuration q."""
    axis_b, position_b = robot.forward_axis_position(q, joint)
    axis_c = transform.rotation @ axis_b
    ref = unit(transform.apply(position_b))
    observation = MotionObservation(
        motion=ExploratoryMotion(tuple(q), joint, 0.5),
        axis=axis_c,
        ref_direction=ref,
        best_score=best,
        second_score=second,
        inlier_ratio=inlier_ratio,
        trajectory_count=4,
        motion_id=motion_id,
        axis_support=axis_support,
    )
    return CalibrationObservation(observation, axis_b, position_b)


@pytest.fixture
def make_observation():
    return true_observation


@pytest.fixture
def true_observations(panda, camera_from_base):
    """Eight noise-free observations over several joints and configurations."""
    rng = np.random.default_rng(3)
    observations = []
    for i, joint in enumerate([1, 2, 3, 4, 5, 6, 2, 4]):
        q = panda.neutral_configuration() + rng.uniform(-0.4, 0.4, size=panda.dof)
        observations.append(true_observation(panda, camera_from_base, q, joint, motion_id=i))
    return observations
