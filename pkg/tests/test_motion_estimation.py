import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import least_squares

from errors import (
    CenterlineFailureError,
    DegenerateArcError,
    InsufficientDataError,
    NotARealConeError,
    ObservationUnusableError,
    PointCircleError,
)
from geometry import angle_between, plane_basis, unit
from motion_estimation import (
    AxisCandidate,
    EstimationParams,
    MotionObservation,
    RansacParams,
    _pool_candidates,
    axis_candidates,
    estimate_observation,
    fit_centerline,
    fit_circle_to_arc,
    fit_projected_circle,
    get_default_parameters,
    refine_axis,
    rotation_sense,
)
from motion_planner import ExploratoryMotion
from pattern_fitting import ConicCoefficients, fit_independent_conics, usable_trajectories, validate_ellipses
from synthetic_scene import KeypointTrajectory, execute_motion, true_axis_camera
from utils import merge_parameter_dicts


def arc(center, radius, phase, deltas):
    return np.column_stack((center[0] + radius * np.cos(deltas + phase),
                            center[1] + radius * np.sin(deltas + phase)))


def circle_trajectory(center, normal, radius, deltas, keypoint_id=0):
    """Normalized image track of a point turning about `normal` through `center` (camera frame)."""
    e1, e2 = plane_basis(unit(normal))
    points = (np.asarray(center) + radius * (np.outer(np.cos(deltas), e1) + np.outer(np.sin(deltas), e2)))
    return KeypointTrajectory(0, keypoint_id, points[:, :2] / points[:, 2:], deltas, sweep=deltas[-1])


def test_exact_circle_parameters():
    deltas = np.linspace(0.0, 1.0, 30)
    fit = fit_circle_to_arc(arc((1.0, 2.0), 0.5, 0.3, deltas), deltas)
    assert np.allclose(fit.center, (1.0, 2.0), atol=1e-9)
    assert np.isclose(fit.radius, 0.5, atol=1e-9)
    assert np.isclose(fit.phase, 0.3, atol=1e-9)
    assert fit.residual < 1e-18


def test_one_perturbed_sample_costs_its_squared_offset_at_most():
    deltas = np.linspace(0.0, 1.0, 30)
    points = arc((1.0, 2.0), 0.5, 0.3, deltas)
    points[10] += (0.01, -0.02)
    fit = fit_circle_to_arc(points, deltas)
    assert 0.0 < fit.residual <= 0.01 ** 2 + 0.02 ** 2


@settings(max_examples=40, deadline=None)
@given(st.floats(min_value=0.05, max_value=3.0), st.floats(min_value=0.0, max_value=6.2),
       st.floats(min_value=0.2, max_value=3.0))
def test_circle_fit_recovers_any_arc(radius, phase, span):
    deltas = np.linspace(-span / 2, span / 2, 20)
    fit = fit_circle_to_arc(arc((0.3, -0.4), radius, phase, deltas), deltas)
    assert np.isclose(fit.radius, radius, rtol=1e-7)
    assert np.allclose(fit.center, (0.3, -0.4), atol=1e-7)
    assert angle_between([np.cos(fit.phase), np.sin(fit.phase), 0], [np.cos(phase), np.sin(phase), 0]) < 1e-6


def test_circle_fit_agrees_with_a_nonlinear_solver():
    rng = np.random.default_rng(8)
    for _ in range(50):
        center, radius, phase = rng.uniform(-0.5, 0.5, 2), rng.uniform(0.05, 0.5), rng.uniform(0.0, 2.0 * np.pi)
        deltas = np.linspace(0.0, rng.uniform(0.5, 2.5), 25) * rng.choice([-1.0, 1.0])
        points = arc(center, radius, phase, deltas) + rng.normal(scale=0.01 * radius, size=(25, 2))
        fit = fit_circle_to_arc(points, deltas)

        def residuals(x):
            cx, cy, r, p = x
            return np.concatenate((cx + r * np.cos(deltas + p) - points[:, 0],
                                   cy + r * np.sin(deltas + p) - points[:, 1]))

        oracle = least_squares(residuals, x0=[*center, radius, phase], xtol=1e-14, ftol=1e-14, gtol=1e-14)
        assert fit.residual == pytest.approx(2.0 * oracle.cost, rel=1e-6, abs=1e-15)
        assert np.isclose(fit.radius, abs(oracle.x[2]), rtol=1e-6)


def test_circle_fit_errors():
    deltas = np.linspace(0.0, 1.0, 10)
    with pytest.raises(InsufficientDataError):
        fit_circle_to_arc(np.zeros((3, 2)), deltas[:3])
    with pytest.raises(DegenerateArcError):
        fit_circle_to_arc(np.ones((10, 2)), np.full(10, 0.4))
    with pytest.raises(PointCircleError):
        fit_circle_to_arc(np.tile([0.2, 0.1], (10, 1)), deltas)


def test_centerline_ignores_outliers():
    x = np.linspace(-0.3, 0.3, 6)
    points = np.vstack((np.column_stack((x, 0.5 * x + 0.1)), [[0.0, 0.6], [0.2, -0.5]]))
    line, mask = fit_centerline(points)
    assert mask.tolist() == [True] * 6 + [False, False]
    assert np.allclose(line.distance(points[:6]), 0.0, atol=1e-12)


def test_centerline_failures():
    with pytest.raises(CenterlineFailureError):
        fit_centerline([[0.0, 0.0]])
    with pytest.raises(CenterlineFailureError):
        fit_centerline([[0.1, 0.1], [0.1, 0.1]])
    scattered = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [0.5, 3.0]]
    with pytest.raises(CenterlineFailureError):
        fit_centerline(scattered, RansacParams(min_inliers=3))


def test_fronto_parallel_circle_gives_the_optical_axis_twice():
    deltas = np.linspace(0.0, 1.5, 20)
    trajectory = KeypointTrajectory(0, 0, arc((0.0, 0.0), 0.2, 0.0, deltas), deltas, sweep=1.5)
    candidates = axis_candidates(ConicCoefficients(1.0, 0.0, 1.0, 0.0, 0.0, -0.04), trajectory)
    assert len(candidates) == 2
    for candidate in candidates:
        assert np.allclose(candidate.axis, [0.0, 0.0, 1.0], atol=1e-9)


def test_imaginary_cone_has_no_candidates():
    trajectory = KeypointTrajectory(0, 0, np.zeros((6, 2)), np.linspace(0.0, 1.0, 6), sweep=1.0)
    with pytest.raises(NotARealConeError):
        axis_candidates(ConicCoefficients(1.0, 0.0, 1.0, 0.0, 0.0, 1.0), trajectory)


@pytest.mark.parametrize("sweep", [1.2, -1.2])
def test_tilted_circle_has_one_candidate_on_the_true_normal(sweep):
    normal = unit([np.sin(np.radians(25.0)), 0.0, np.cos(np.radians(25.0))])
    deltas = np.linspace(0.0, sweep, 40)
    trajectory = circle_trajectory((0.05, -0.02, 1.2), normal, 0.15, deltas)
    conic = fit_independent_conics([trajectory]).conics[0]
    candidates = axis_candidates(conic, trajectory)
    errors = sorted(angle_between(c.axis, normal) for c in candidates)
    assert errors[0] < 1e-6
    assert errors[1] > 1e-3

    true_axis = min(candidates, key=lambda c: angle_between(c.axis, normal)).axis
    fit = fit_projected_circle(trajectory, true_axis)
    assert fit.normalized_residual < 1e-6


def test_reference_direction_parallel_to_axis_is_rejected():
    with pytest.raises(ObservationUnusableError):
        MotionObservation(ExploratoryMotion((0.0,), 1, 0.5), [0, 0, 1], [0, 0, 2], 0.0, 1.0, 1.0, 3)


def test_score_gap():
    obs = MotionObservation(ExploratoryMotion((0.0,), 1, 0.5), [0, 0, 1], [1, 0, 1], 0.2, 1.0, 1.0, 3)
    assert obs.score_gap == pytest.approx(0.8)
    assert np.allclose(obs.plane_normal, unit(np.cross([1, 0, 1], [0, 0, 1])))


def observe_motion(scene, motion, **kwargs):
    trajectories = execute_motion(scene, motion, frames=60)
    fit = validate_ellipses(fit_independent_conics(usable_trajectories(trajectories)))
    return estimate_observation(motion, fit, **kwargs)


@pytest.mark.parametrize("joint, sweep", [(2, 0.9), (4, -0.8), (5, 1.1), (6, 0.7)])
def test_noise_free_motion_recovers_the_axis(panda_scene, panda, joint, sweep):
    motion = ExploratoryMotion(tuple(panda.neutral_configuration()), joint, sweep)
    observation = observe_motion(panda_scene, motion)
    axis, point = true_axis_camera(panda_scene, motion)

    assert angle_between(observation.axis, axis) < 1e-5
    assert abs(np.dot(observation.plane_normal, unit(point))) < 1e-5
    assert abs(np.dot(observation.plane_normal, unit(point + 0.3 * axis))) < 1e-5
    assert observation.inlier_ratio == 1.0
    assert observation.best_score < observation.second_score


def test_forced_runner_up_is_another_axis(panda_scene, panda):
    motion = ExploratoryMotion(tuple(panda.neutral_configuration()), 4, -0.8)
    observation = observe_motion(panda_scene, motion, force_candidate_rank=1)
    axis, _ = true_axis_camera(panda_scene, motion)
    assert observation.forced_spurious
    assert angle_between(observation.axis, axis) > 1e-3


def test_empty_fit_is_unusable(panda_scene, panda):
    motion = ExploratoryMotion(tuple(panda.neutral_configuration()), 4, -0.8)
    fit = fit_independent_conics(execute_motion(panda_scene, motion)).subset([])
    with pytest.raises(ObservationUnusableError):
        estimate_observation(motion, fit, params=EstimationParams())


def tilted(tilt_deg, azimuth_deg=0.0):
    tilt, azimuth = np.radians(tilt_deg), np.radians(azimuth_deg)
    return unit([np.sin(tilt) * np.cos(azimuth), np.sin(tilt) * np.sin(azimuth), np.cos(tilt)])


def test_true_candidate_scores_below_the_other_one():
    rng = np.random.default_rng(21)
    for _ in range(100):
        normal = tilted(rng.uniform(5.0, 60.0), rng.uniform(0.0, 360.0))
        center = np.append(rng.uniform(-0.2, 0.2, 2), rng.uniform(0.8, 1.5))
        deltas = np.linspace(0.0, rng.uniform(0.8, 2.0), 40) * rng.choice([-1.0, 1.0])
        trajectory = circle_trajectory(center, normal, rng.uniform(0.08, 0.2), deltas)
        conic = fit_independent_conics([trajectory]).conics[0]
        true_axis, other = sorted((c.axis for c in axis_candidates(conic, trajectory)),
                                  key=lambda n: angle_between(n, normal))
        assert angle_between(true_axis, normal) < 1e-5
        true_score = fit_projected_circle(trajectory, true_axis).normalized_residual
        assert true_score < fit_projected_circle(trajectory, other).normalized_residual


def test_rotation_sense_is_a_majority_vote():
    normal = tilted(30.0)
    deltas = np.linspace(0.0, 1.2, 30)
    tracks = [circle_trajectory((0.05, -0.02, 1.2), normal, 0.15, deltas, keypoint_id=0),
              circle_trajectory((-0.1, 0.05, 1.0), normal, 0.1, -deltas, keypoint_id=1)]
    backwards = KeypointTrajectory(0, 2, tracks[0].points[::-1], deltas, sweep=1.2)
    assert rotation_sense(tracks + [backwards], normal) == 1
    assert rotation_sense(tracks + [backwards], -normal) == -1
    assert rotation_sense([tracks[0], backwards], normal) == 0


def test_candidates_pool_into_the_axis_most_tracks_share():
    z = np.array([0.0, 0.0, 1.0])
    candidates = []
    for track, azimuth in enumerate([0.0, 120.0, 240.0]):
        near = tilted(0.5, 90.0 * track)
        candidates += [AxisCandidate(-near if track == 2 else near, track),
                       AxisCandidate(tilted(40.0, azimuth), track)]
    candidates += [AxisCandidate(np.array([1.0, 0.0, 0.0]), 3), AxisCandidate(np.array([0.0, 1.0, 0.0]), 3)]

    clusters = _pool_candidates(candidates, np.radians(2.0), np.radians(12.0))
    assert clusters[0].support == (0, 1, 2)
    assert sorted(clusters[0].members) == [0, 2, 4]
    assert abs(clusters[0].axis @ z) > np.cos(np.radians(0.5))
    assert all(len(c.support) == 1 for c in clusters[1:])
    assert sum(len(c.members) for c in clusters) == len(candidates)


def test_refinement_pulls_a_perturbed_axis_back():
    normal = tilted(30.0, 20.0)
    deltas = np.linspace(0.0, 2.0, 40)
    tracks = [circle_trajectory((0.05, -0.02, 0.8), normal, 0.2, deltas, keypoint_id=0),
              circle_trajectory((-0.1, 0.1, 0.9), normal, 0.15, deltas, keypoint_id=1)]
    start = unit(normal + np.tan(np.radians(3.0)) * plane_basis(normal)[0])
    refined = refine_axis(tracks, start)
    assert angle_between(refined, normal) < 1e-3
    assert angle_between(refine_axis(tracks, normal), normal) < 1e-9
    short = KeypointTrajectory(0, 0, np.zeros((3, 2)), [0.0, 0.1, 0.2], sweep=0.2)
    assert np.allclose(refine_axis([short], start), start)


def test_noise_free_motion_is_fully_supported(panda_scene, panda):
    motion = ExploratoryMotion(tuple(panda.neutral_configuration()), 2, 0.9)
    observation = observe_motion(panda_scene, motion)
    assert observation.axis_support == 1.0


def test_consensus_and_refinement_settings_are_read():
    params = EstimationParams.from_parameters(merge_parameter_dicts(
        get_default_parameters(), {"Estimation": {"consensus_tol_deg": 6.0, "refine_axis": False}}))
    assert params.consensus_tol == pytest.approx(np.radians(6.0))
    assert params.refine_axis is False
