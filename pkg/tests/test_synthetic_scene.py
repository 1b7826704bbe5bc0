import numpy as np
import pytest

from errors import EmptyObservationError, InvalidInputError
from geometry import CameraIntrinsics, look_at, normalize_pixel
from motion_planner import ExploratoryMotion
from synthetic_scene import (
    Keypoint,
    KeypointTrajectory,
    NoiseSpec,
    SceneDefinition,
    camera_points,
    execute_motion,
    keypoints_from_groups,
    plannable_joints,
    true_axis_camera,
)


@pytest.fixture
def motion(panda):
    return ExploratoryMotion(tuple(panda.neutral_configuration()), 4, 0.8)


def test_noise_free_pixels_match_projection(panda_scene, motion):
    trajectories = execute_motion(panda_scene, motion, frames=20)
    moving = [kp for kp in panda_scene.keypoints if kp.link >= 4]
    assert [t.keypoint_id for t in trajectories] == [kp.keypoint_id for kp in moving]

    deltas = np.linspace(0.0, 0.8, 20)
    expected = camera_points(panda_scene, motion, deltas, moving)
    for index, trajectory in enumerate(trajectories):
        pixels = panda_scene.intrinsics.project(expected[:, index, :])
        assert np.allclose(trajectory.points, normalize_pixel(pixels, panda_scene.intrinsics))
        assert np.allclose(trajectory.deltas, deltas)
        assert trajectory.joint == 4 and trajectory.sweep == 0.8
        assert not trajectory.is_outlier


def test_keypoints_circle_the_true_axis(panda_scene, motion):
    axis, point = true_axis_camera(panda_scene, motion)
    moving = [kp for kp in panda_scene.keypoints if kp.link >= 4]
    cam = camera_points(panda_scene, motion, np.linspace(0.0, 0.8, 10), moving)
    for index in range(len(moving)):
        track = cam[:, index, :]
        heights = (track - point) @ axis
        radii = np.linalg.norm(np.cross(track - point, axis), axis=1)
        assert np.ptp(heights) < 1e-12
        assert np.ptp(radii) < 1e-12


def test_same_seed_same_trajectories(panda_scene, motion):
    scene = panda_scene.with_noise(NoiseSpec(pixel_sigma=1.0, dropout_prob=0.01, outlier_prob=0.2))
    a = execute_motion(scene, motion, rng_seed=[5, 1])
    b = execute_motion(scene, motion, rng_seed=[5, 1])
    assert len(a) == len(b)
    for ta, tb in zip(a, b):
        assert np.array_equal(ta.points, tb.points)
        assert ta.is_outlier == tb.is_outlier


def test_dropout_truncates_tracks(panda_scene, motion):
    scene = panda_scene.with_noise(NoiseSpec(dropout_prob=0.2))
    trajectories = execute_motion(scene, motion, frames=60, rng_seed=1)
    assert all(2 <= len(t) <= 60 for t in trajectories)
    assert any(len(t) < 60 for t in trajectories)
    for t in trajectories:
        assert np.allclose(t.deltas, np.linspace(0.0, 0.8, 60)[:len(t)])


def test_all_outliers_are_labelled(panda_scene, motion):
    scene = panda_scene.with_noise(NoiseSpec(outlier_prob=1.0))
    trajectories = execute_motion(scene, motion, frames=30, rng_seed=2)
    assert all(t.is_outlier for t in trajectories)


def test_camera_facing_away_loses_every_keypoint(panda_scene, motion):
    scene = panda_scene.with_camera(look_at((1.6, 0.6, 0.9), (3.0, 1.0, 1.0)))
    with pytest.raises(EmptyObservationError):
        execute_motion(scene, motion)


def test_clip_to_image_drops_keypoints_outside_the_image(panda, motion):
    tiny = CameraIntrinsics(fx=1380.0, fy=1380.0, cx=960.0, cy=540.0, width=2, height=2)
    scene = SceneDefinition(panda, look_at((1.6, 0.6, 0.9), (0.0, 0.0, 0.4)), tiny,
                            keypoints_from_groups([{"link": 7, "points": [[0.05, 0.05, 0.1]]}]),
                            clip_to_image=True)
    with pytest.raises(EmptyObservationError):
        execute_motion(scene, motion)


def test_frames_below_two(panda_scene, motion):
    with pytest.raises(InvalidInputError):
        execute_motion(panda_scene, motion, frames=1)


def test_plannable_joints(panda_scene, panda, intrinsics, camera_from_base):
    assert plannable_joints(panda_scene) == [1, 2, 3, 4, 5, 6, 7]
    on_axis = SceneDefinition(panda, camera_from_base, intrinsics, [Keypoint(0, 7, (0.0, 0.0, 0.1))])
    assert plannable_joints(on_axis) == [1, 2, 3, 4, 5, 6]


def test_keypoint_on_unknown_link(panda, intrinsics, camera_from_base):
    with pytest.raises(InvalidInputError):
        SceneDefinition(panda, camera_from_base, intrinsics, [Keypoint(0, 8, (0.0, 0.0, 0.0))])


def test_keypoint_ids_follow_listing_order():
    keypoints = keypoints_from_groups([{"link": 2, "points": [[0, 0, 0], [1, 0, 0]]},
                                       {"link": 1, "points": [[0, 1, 0]]}])
    assert [(kp.keypoint_id, kp.link) for kp in keypoints] == [(0, 2), (1, 2), (2, 1)]


def test_trajectory_validation():
    with pytest.raises(InvalidInputError):
        KeypointTrajectory(0, 0, np.zeros((3, 2)), np.zeros(2))
    with pytest.raises(InvalidInputError):
        KeypointTrajectory(0, 0, np.zeros((3, 2)), [0.0, 0.2, 0.1])
    t = KeypointTrajectory(0, 0, [[0.0, 0.0], [0.3, 0.4]], [0.0, -0.1], sweep=-0.1)
    assert t.extent == pytest.approx(0.5)
    assert t.samples == [((0.0, 0.0), 0.0), ((0.3, 0.4), -0.1)]


@pytest.mark.parametrize("deltas, sweep", [
    ([0.0, -0.1, 0.2], 0.2),
    ([0.0, 0.4, 2.0], 0.5),
    ([0.0, 0.1, 0.2], -0.5),
    ([0.0, 0.1], 0.0),
])
def test_deltas_must_stay_within_the_sweep(deltas, sweep):
    with pytest.raises(InvalidInputError):
        KeypointTrajectory(0, 0, np.zeros((len(deltas), 2)), deltas, sweep=sweep)


def test_simulated_deltas_end_on_the_sweep(panda_scene, panda):
    motion = ExploratoryMotion(tuple(panda.neutral_configuration()), 3, -0.7)
    for trajectory in execute_motion(panda_scene, motion, frames=15):
        assert trajectory.deltas[-1] == -0.7
        assert np.all(trajectory.deltas <= 0.0)


@pytest.mark.parametrize("kwargs", [{"pixel_sigma": -1.0}, {"dropout_prob": 1.5}, {"outlier_prob": -0.1}])
def test_noise_spec_validation(kwargs):
    with pytest.raises(InvalidInputError):
        NoiseSpec(**kwargs)
