import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from errors import InvalidInputError, InvalidJointError
from robot_model import RobotModel, builtin_description, get_default_parameters


def test_panda_axes_and_origins_at_zero(panda):
    q = np.zeros(7)
    axis, position = panda.forward_axis_position(q, 1)
    assert np.allclose(axis, [0, 0, 1])
    assert np.allclose(position, [0, 0, 0.333])

    axis, position = panda.forward_axis_position(q, 2)
    assert np.allclose(axis, [0, 1, 0])
    assert np.allclose(position, [0, 0, 0.333])

    assert np.allclose(panda.forward_axis_position(q, 3)[1], [0, 0, 0.649])
    assert np.allclose(panda.forward_axis_position(q, 4)[1], [0.0825, 0, 0.649])


def test_two_joint_elbow_follows_shoulder(two_joint):
    axis, position = two_joint.forward_axis_position([0.0, 0.0], 2)
    assert np.allclose(axis, [0, 0, 1])
    assert np.allclose(position, [0.5, 0, 0])
    assert np.allclose(two_joint.forward_axis_position([np.pi / 2, 0.0], 2)[1], [0, 0.5, 0])


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(min_value=-1.0, max_value=1.0), min_size=7, max_size=7), st.integers(1, 7))
def test_axis_is_unit_and_does_not_depend_on_own_angle(offsets, j):
    robot = RobotModel.from_dict("panda")
    q = robot.neutral_configuration() + np.array(offsets) * 0.5
    axis, position = robot.forward_axis_position(q, j)
    assert np.isclose(np.linalg.norm(axis), 1.0)

    moved = q.copy()
    moved[j - 1] += 0.7
    axis_moved, position_moved = robot.forward_axis_position(moved, j)
    assert np.allclose(axis, axis_moved)
    assert np.allclose(position, position_moved)


def test_points_on_moving_link_rotate_about_the_joint_axis(panda):
    q = panda.neutral_configuration()
    axis, origin = panda.forward_axis_position(q, 4)
    local = np.array([[0.05, 0.1, -0.02]])
    before = panda.link_points_world(q, 4, local)[0]
    q2 = q.copy()
    q2[3] += 0.9
    after = panda.link_points_world(q2, 4, local)[0]
    # distance to the axis line and the height along it are preserved
    assert np.isclose(np.dot(before - origin, axis), np.dot(after - origin, axis))
    radial = lambda p: np.linalg.norm(np.cross(p - origin, axis))
    assert np.isclose(radial(before), radial(after))


def test_link_transforms_has_one_frame_per_link(panda):
    frames = panda.link_transforms(np.zeros(7))
    assert len(frames) == 8
    assert np.allclose(frames[0].as_matrix(), np.eye(4))


@pytest.mark.parametrize("j", [0, 8, -1, 2.0])
def test_joint_index_out_of_range(panda, j):
    with pytest.raises(InvalidJointError):
        panda.forward_axis_position(np.zeros(7), j)


def test_wrong_configuration_length(panda):
    with pytest.raises(InvalidInputError):
        panda.link_transforms(np.zeros(6))


def test_within_limits(panda):
    assert panda.within_limits(panda.neutral_configuration())
    q = panda.neutral_configuration()
    q[3] = 0.5
    assert not panda.within_limits(q)


def test_prismatic_joint_is_rejected():
    description = {"joints": [{"name": "slide", "type": "prismatic", "axis": [1, 0, 0]}]}
    with pytest.raises(InvalidInputError, match="revolute"):
        RobotModel.from_dict(description)


def test_inverted_limits_are_rejected():
    description = {"joints": [{"axis": [0, 0, 1], "limits": [1.0, -1.0]}]}
    with pytest.raises(InvalidInputError):
        RobotModel.from_dict(description)


def test_unknown_builtin():
    with pytest.raises(InvalidInputError):
        builtin_description("ur5")


def test_custom_description_defaults():
    robot = RobotModel.from_dict({"name": "pan_tilt", "joints": [{"axis": [0, 0, 1]},
                                                                 {"xyz": [0, 0, 0.1], "axis": [0, 1, 0]}]})
    assert robot.dof == 2
    assert robot.name == "pan_tilt"
    assert np.allclose(robot.forward_axis_position([0.0, 0.0], 2)[1], [0, 0, 0.1])
    assert np.allclose(robot.neutral_configuration(), [0.0, 0.0])


def test_default_parameters_build_the_panda():
    robot = RobotModel.from_parameters(get_default_parameters())
    assert robot.name == "panda" and robot.dof == 7
    two = RobotModel.from_parameters({"Robot": {"robot": "two_joint"}})
    assert two.dof == 2
