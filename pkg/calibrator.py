"""
Calibrator Module

Recovers the camera-from-base transform from per-motion observations.

Features:
- attach_kinematics: pairs each observation with the joint axis and origin in the base frame
- assemble_constraints: collinearity rows (3 per motion) and coplanarity rows (1 per motion)
- solve_calibration: rotation from the null space of the translation-eliminated system,
  projected onto SO(3), then the least-squares translation
- prune_stage1 / prune_stage2: candidate-agreement filter and residual filter
- check_convergence: sliding-window range test on (rotation vector, translation)
- SimulatedSource / RecordedSource: live simulation or replay of recorded trajectories
- calibrate_loop: the select -> execute -> estimate -> prune -> solve loop

vec() is column-major throughout: vec(R) = R.flatten(order="F"), so that
R @ a == kron(a^T, I3) @ vec(R).

Usage:
    from calibrator import SimulatedSource, calibrate_loop

    source = SimulatedSource(scene, planner_params, seed=0)
    result = calibrate_loop(source, scene.robot, ground_truth=scene.camera_from_base)
    print(result.estimate.transform, result.converged)
"""

import logging
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from errors import (
    OBSERVATION_ERRORS,
    CalibrationAbortedError,
    DegenerateRotationError,
    EmptyObservationError,
    InsufficientDataError,
    InvalidInputError,
    ObservationUnusableError,
    PlanningFailureError,
    RotationUnobservableError,
    TranslationUnobservableError,
)
from geometry import RigidTransform, angle_between, geodesic_angle, nearest_rotation, rotation_log, skew
from motion_estimation import EstimationParams, estimate_observation
from motion_planner import ExploratoryMotion, PlannerParams, select_motion
from pattern_fitting import FittingParams, fit_conics, usable_trajectories, validate_ellipses
from synthetic_scene import execute_motion, plannable_joints
from utils import DotDict

logger = logging.getLogger(__name__)


MIN_OBSERVATIONS = 3
UNOBSERVABLE_RTOL = 1e-6


def get_default_parameters():
    """
    Default calibration parameters.

    Returns:
        dict: Sectioned parameter dictionary
    """
    return {
        "Pruning": [
            {"agreement_min": 0.6},
            {"support_min": 0.5},
            {"ambiguity_ratio_min": 0.05},
            {"axis_tol": 0.1},          # radians
            {"plane_tol": 0.05},        # meters
        ],
        "Convergence": [
            {"window": 5},
            {"gamma_max": [0.01, 0.01, 0.01, 0.01, 0.01, 0.01]},
        ],
    }


@dataclass(frozen=True)
class PruningConfig:
    agreement_min: float = 0.6
    support_min: float = 0.5
    ambiguity_ratio_min: float = 0.05
    axis_tol: float = 0.1
    plane_tol: float = 0.05

    def __post_init__(self):
        for name in ("agreement_min", "support_min", "ambiguity_ratio_min", "axis_tol", "plane_tol"):
            if not getattr(self, name) > 0:
                raise InvalidInputError(f"{name} must be positive, got {getattr(self, name)}")

    @classmethod
    def from_parameters(cls, parameters):
        p = DotDict(parameters)
        return cls(
            agreement_min=float(p.agreement_min),
            support_min=float(p.get("support_min", 0.5)),
            ambiguity_ratio_min=float(p.ambiguity_ratio_min),
            axis_tol=float(p.axis_tol),
            plane_tol=float(p.plane_tol),
        )


@dataclass(frozen=True)
class ConvergenceConfig:
    window: int = 5
    gamma_max: tuple = (0.01, 0.01, 0.01, 0.01, 0.01, 0.01)

    def __post_init__(self):
        gamma = tuple(float(g) for g in self.gamma_max)
        if int(self.window) < 2:
            raise InvalidInputError(f"convergence window must be at least 2, got {self.window}")
        if len(gamma) != 6 or not all(g > 0 for g in gamma):
            raise InvalidInputError(f"gamma_max needs 6 positive thresholds, got {self.gamma_max}")
        object.__setattr__(self, "gamma_max", gamma)

    @classmethod
    def from_parameters(cls, parameters):
        p = DotDict(parameters)
        return cls(window=int(p.window), gamma_max=tuple(p.gamma_max))


@dataclass(frozen=True, eq=False)
class CalibrationObservation:
    """MotionObservation with the moved joint's axis and origin in the base frame."""
    observation: object
    axis_base: np.ndarray
    position_base: np.ndarray

    @property
    def motion_id(self):
        return self.observation.motion_id


def attach_kinematics(observation, robot):
    """Evaluate the robot's joint axis and origin at the motion's start configuration."""
    motion = observation.motion
    axis_b, position_b = robot.forward_axis_position(np.array(motion.start_config), motion.joint)
    return CalibrationObservation(observation, axis_b, position_b)


@dataclass(frozen=True, eq=False)
class ConstraintSystem:
    """
    Stacked linear constraints on (vec(R), t).

    Attributes:
        H_r: (3N, 9) collinearity rows, H_r vec(R) = 0
        H_p: (N, 9) coplanarity rows, H_p vec(R) + K_p t = 0
        K_p: (N, 3) plane normals
        row_sources: (4N,) observation index of each row of H
    """
    H_r: np.ndarray
    H_p: np.ndarray
    K_p: np.ndarray
    row_sources: np.ndarray
    axes_base: np.ndarray = None

    @property
    def observation_count(self):
        return len(self.K_p)

    @property
    def H(self):
        return np.vstack((self.H_r, self.H_p))

    @property
    def K(self):
        return np.vstack((np.zeros((len(self.H_r), 3)), self.K_p))


def collinearity_rows(axis_camera, axis_base):
    """3x9 block with block @ vec(R) = axis_camera x (R @ axis_base)."""
    return skew(axis_camera) @ np.kron(np.asarray(axis_base).reshape(1, 3), np.eye(3))


def coplanarity_row(plane_normal, position_base):
    """9-vector with row @ vec(R) = plane_normal . (R @ position_base)."""
    return np.kron(np.asarray(position_base, dtype=float), np.asarray(plane_normal, dtype=float))


def assemble_constraints(observations):
    """
    Build the constraint system of a list of CalibrationObservation.

    Args:
        observations: Sequence of CalibrationObservation

    Returns:
        ConstraintSystem

    Raises:
        InsufficientDataError: Empty input
    """
    observations = list(observations)
    if not observations:
        raise InsufficientDataError("no observations to assemble")
    H_r, H_p, K_p = [], [], []
    for obs in observations:
        rho = obs.observation.plane_normal
        H_r.append(collinearity_rows(obs.observation.axis, obs.axis_base))
        H_p.append(coplanarity_row(rho, obs.position_base))
        K_p.append(rho)
    n = len(observations)
    sources = np.concatenate((np.repeat(np.arange(n), 3), np.arange(n)))
    return ConstraintSystem(
        H_r=np.vstack(H_r),
        H_p=np.array(H_p),
        K_p=np.array(K_p),
        row_sources=sources,
        axes_base=np.array([obs.axis_base for obs in observations]),
    )


@dataclass(frozen=True, eq=False)
class CalibrationEstimate:
    """
    Attributes:
        transform: Estimated camera-from-base RigidTransform
        residual: ||S vec(R)|| / ||vec(R)||
        observation_count: Observations used
        iteration: Loop iteration that produced it
        stage2_fallback: Stage-2 pruning kept fewer than 3 and the stage-1 set was used
    """
    transform: RigidTransform
    residual: float
    observation_count: int
    iteration: int = 0
    stage2_fallback: bool = False


def translation_projector(K):
    """
    Orthonormal basis U_k of col(K) from its SVD, and I - U_k U_k^T applied lazily.

    Raises:
        TranslationUnobservableError: K does not have rank 3
    """
    U, s, _ = np.linalg.svd(K, full_matrices=False)
    if s[0] <= 0 or s[-1] < UNOBSERVABLE_RTOL * s[0]:
        raise TranslationUnobservableError(
            f"plane normals do not span 3D (singular values {np.array2string(s, precision=3)})")
    return U[:, :3]


def solve_calibration(system, iteration=0):
    """
    Relaxed linear solve for the camera-from-base transform.

    S = (I - U_k U_k^T) H removes the translation; the right singular vector
    of S for the smallest singular value, signed to a positive determinant and
    reshaped column-major, is projected onto SO(3). Only one singular value may
    vanish: three motions give six independent rotation constraints for nine
    unknowns, so at least four are needed in general position. The translation
    is the least-squares solution of K t = -H vec(R).

    Args:
        system: ConstraintSystem from at least 3 observations
        iteration: Stamped on the estimate

    Returns:
        CalibrationEstimate

    Raises:
        InsufficientDataError: Fewer than 3 observations
        RotationUnobservableError: Base axes span fewer than two directions, or the
            projected system leaves more than one rotation direction free
        TranslationUnobservableError: Plane normals do not span 3D
    """
    n = system.observation_count
    if n < MIN_OBSERVATIONS:
        raise InsufficientDataError(f"{n} observation(s), need {MIN_OBSERVATIONS}")
    if system.axes_base is not None:
        s_axes = np.linalg.svd(system.axes_base, compute_uv=False)
        if s_axes[1] < UNOBSERVABLE_RTOL * s_axes[0]:
            raise RotationUnobservableError("all observed joint axes are parallel")

    H, K = system.H, system.K
    U_k = translation_projector(K)
    S = H - U_k @ (U_k.T @ H)

    _, s, Vt = np.linalg.svd(S)
    if s[-2] < UNOBSERVABLE_RTOL * s[0]:
        raise RotationUnobservableError(
            f"rotation constraints leave a {int(np.sum(s < UNOBSERVABLE_RTOL * s[0]))}-dimensional null space")
    r = Vt[-1]
    M = r.reshape(3, 3, order="F")
    if np.linalg.det(M) < 0:
        M = -M
    try:
        R = nearest_rotation(M)
    except DegenerateRotationError as e:
        raise RotationUnobservableError(f"relaxed rotation is degenerate: {e}") from e

    vec_r = R.flatten(order="F")
    t = -np.linalg.lstsq(K, H @ vec_r, rcond=None)[0]
    residual = float(np.linalg.norm(S @ vec_r) / np.linalg.norm(vec_r))
    return CalibrationEstimate(
        transform=RigidTransform(R, t),
        residual=residual,
        observation_count=n,
        iteration=iteration,
    )


def axis_error(obs, transform):
    """Angle between the observed axis and the predicted one, radians."""
    return angle_between(obs.observation.axis, transform.rotation @ obs.axis_base)


def plane_error(obs, transform):
    """Distance of the predicted joint origin from the observed axis plane, meters."""
    return float(abs(np.dot(obs.observation.plane_normal, transform.apply(obs.position_base))))


def _base_observation(obs):
    return obs.observation if isinstance(obs, CalibrationObservation) else obs


def prune_stage1(observations, cfg):
    """
    Keep observations whose trajectories agree and whose best axis stands out.

    Agreement is twofold: the circle centres under the chosen axis lie on one
    line (inlier_ratio >= agreement_min) and the tracks' own ellipses point
    at that axis (axis_support >= support_min).

    Args:
        observations: MotionObservation or CalibrationObservation items
        cfg: PruningConfig

    Returns:
        list: Kept items, in input order
    """
    kept = []
    for obs in observations:
        base = _base_observation(obs)
        if (base.inlier_ratio >= cfg.agreement_min and base.axis_support >= cfg.support_min
                and base.score_gap >= cfg.ambiguity_ratio_min):
            kept.append(obs)
        else:
            logger.debug("stage 1 drops motion %d (inliers %.2f, support %.2f, gap %.3f)",
                         base.motion_id, base.inlier_ratio, base.axis_support, base.score_gap)
    return kept


def prune_stage2(observations, estimate, cfg):
    """
    Keep observations consistent with a previous estimate.

    Args:
        observations: CalibrationObservation items
        estimate: CalibrationEstimate (previous iteration)
        cfg: PruningConfig

    Returns:
        tuple: (kept list, fell_back) where fell_back means fewer than 3
        survived and the input list is returned unchanged
    """
    observations = list(observations)
    T = estimate.transform
    kept = []
    for obs in observations:
        ea, ed = axis_error(obs, T), plane_error(obs, T)
        if ea <= cfg.axis_tol and ed <= cfg.plane_tol:
            kept.append(obs)
        else:
            logger.debug("stage 2 drops motion %d (axis %.4f rad, plane %.4f m)", obs.motion_id, ea, ed)
    if len(kept) < MIN_OBSERVATIONS:
        logger.warning("stage 2 kept %d of %d observations, using the stage 1 set",
                       len(kept), len(observations))
        return observations, True
    return kept, False


def pose_vector(transform):
    """6-vector (rotation vector, translation)."""
    return np.concatenate((rotation_log(transform.rotation), transform.translation))


def check_convergence(history, cfg):
    """
    True when the last cfg.window estimates vary less than cfg.gamma_max per dimension.

    Args:
        history: Sequence of CalibrationEstimate
        cfg: ConvergenceConfig
    """
    if len(history) < cfg.window:
        return False
    poses = np.array([pose_vector(e.transform) for e in history[-cfg.window:]])
    return bool(np.all(np.ptp(poses, axis=0) <= np.array(cfg.gamma_max)))


@dataclass(frozen=True, eq=False)
class MotionBatch:
    motion_id: int
    motion: ExploratoryMotion
    trajectories: list
    forced_spurious: bool = False


class SimulatedSource:
    """
    Live trajectory source: plans each motion and simulates it.

    Motion i uses seeds [seed, i] for planning, [seed, i, 1] for the tracker
    and [seed, i, 2] for the spurious-axis draw.
    """
    motion_budget = None

    def __init__(self, scene, planner_params=None, seed=0, frames=60, feasible=None):
        self.scene = scene
        self.planner_params = planner_params or PlannerParams()
        self.seed = int(seed)
        self.frames = int(frames)
        self.feasible = feasible
        self.joints = plannable_joints(scene)

    def next_motion(self, motion_id):
        motion = select_motion(self.scene.robot, self.feasible, [self.seed, motion_id],
                               self.planner_params, joints=self.joints)
        spurious_draw = np.random.default_rng([self.seed, motion_id, 2]).random()
        forced = bool(spurious_draw < self.scene.noise.spurious_axis_prob)
        trajectories = execute_motion(self.scene, motion, frames=self.frames,
                                      rng_seed=[self.seed, motion_id, 1], motion_id=motion_id,
                                      forced_spurious=forced)
        return MotionBatch(motion_id, motion, trajectories, forced)


class RecordedSource:
    """Replays trajectories grouped by motion_id; missing ids are empty motions."""

    def __init__(self, trajectories):
        self.by_motion = defaultdict(list)
        for trajectory in trajectories:
            self.by_motion[trajectory.motion_id].append(trajectory)
        self.motion_budget = (max(self.by_motion) + 1) if self.by_motion else 0

    def next_motion(self, motion_id):
        trajectories = sorted(self.by_motion.get(motion_id, []), key=lambda t: t.keypoint_id)
        if not trajectories:
            raise EmptyObservationError(f"motion {motion_id}: no recorded trajectories")
        first = trajectories[0]
        motion = ExploratoryMotion(first.start_config, first.joint, first.sweep)
        return MotionBatch(motion_id, motion, trajectories, first.forced_spurious)


@dataclass
class IterationRecord:
    iteration: int
    motion_id: int
    joint: int = None
    sweep: float = None
    accepted: bool = False
    reason: str = ""
    raw_count: int = 0
    stage1_count: int = 0
    stage2_count: int = 0
    stage2_fallback: bool = False
    residual: float = None
    rotation_error: float = None
    translation_error: float = None


@dataclass
class CalibrationResult:
    estimate: CalibrationEstimate = None
    converged: bool = False
    history: list = field(default_factory=list)
    records: list = field(default_factory=list)
    observations: list = field(default_factory=list)
    final_kept: list = field(default_factory=list)

    @property
    def rejections(self):
        return [(r.motion_id, r.reason) for r in self.records if not r.accepted]

    def pruning_statistics(self):
        """Counts over all accepted observations against the final kept set."""
        kept_ids = {obs.motion_id for obs in self.final_kept}
        spurious = [obs for obs in self.observations if obs.observation.forced_spurious]
        return {
            "observations": len(self.observations),
            "kept": len(kept_ids),
            "rejected_motions": len(self.rejections),
            "spurious": len(spurious),
            "spurious_rejected": sum(obs.motion_id not in kept_ids for obs in spurious),
        }


def observe(batch, estimation_params=None, fitting_params=None):
    """Fit, validate and estimate one motion batch."""
    estimation_params = estimation_params or EstimationParams()
    fitting_params = fitting_params or FittingParams()
    usable = usable_trajectories(batch.trajectories, fitting_params.min_samples, fitting_params.min_extent)
    if not usable:
        raise ObservationUnusableError(f"motion {batch.motion_id}: no usable trajectories")
    fit = fit_conics(usable, fitting_params)
    fit = validate_ellipses(fit, fitting_params.ellipse_eps, fitting_params.max_axis_ratio)
    return estimate_observation(batch.motion, fit, params=estimation_params, motion_id=batch.motion_id,
                                force_candidate_rank=1 if batch.forced_spurious else 0)


def calibrate_loop(source, robot, estimation_params=None, fitting_params=None, pruning=None,
                   convergence=None, max_iterations=60, ground_truth=None, stop_on_convergence=True,
                   max_planning_failures=5):
    """
    Run the calibration loop.

    Each iteration takes one motion from the source, turns it into an
    observation, re-filters every observation collected so far (stage 1, then
    stage 2 against the previous estimate) and solves once at least three
    remain.

    Args:
        source: SimulatedSource or RecordedSource
        robot: RobotModel for the kinematics of each motion
        estimation_params, fitting_params: Per-motion estimation settings
        pruning: PruningConfig
        convergence: ConvergenceConfig
        max_iterations: Motion budget (a RecordedSource may end earlier)
        ground_truth: Optional true RigidTransform for per-iteration errors
        stop_on_convergence: Stop as soon as check_convergence holds
        max_planning_failures: Consecutive planning failures before aborting

    Returns:
        CalibrationResult

    Raises:
        CalibrationAbortedError: After max_planning_failures consecutive planning failures
    """
    pruning = pruning or PruningConfig()
    convergence = convergence or ConvergenceConfig()
    budget = max_iterations
    if source.motion_budget is not None:
        budget = min(budget, source.motion_budget)

    result = CalibrationResult()
    planning_failures = 0

    for i in range(budget):
        record = IterationRecord(iteration=i, motion_id=i)
        result.records.append(record)
        try:
            batch = source.next_motion(i)
            planning_failures = 0
            record.joint, record.sweep = batch.motion.joint, batch.motion.sweep
            observation = observe(batch, estimation_params, fitting_params)
            result.observations.append(attach_kinematics(observation, robot))
            record.accepted = True
        except PlanningFailureError as e:
            planning_failures += 1
            record.reason = f"planning failure: {e}"
            logger.info("iteration %d: %s", i, record.reason)
            if planning_failures >= max_planning_failures:
                raise CalibrationAbortedError(
                    f"{planning_failures} consecutive planning failures, last: {e}") from e
        except OBSERVATION_ERRORS as e:
            record.reason = f"{type(e).__name__}: {e}"

        stage1 = prune_stage1(result.observations, pruning)
        kept, fell_back = stage1, False
        if result.estimate is not None and len(stage1) >= MIN_OBSERVATIONS:
            kept, fell_back = prune_stage2(stage1, result.estimate, pruning)
        record.raw_count, record.stage1_count, record.stage2_count = len(result.observations), len(stage1), len(kept)
        record.stage2_fallback = fell_back

        if record.accepted and len(kept) >= MIN_OBSERVATIONS:
            try:
                estimate = solve_calibration(assemble_constraints(kept), iteration=i)
                result.estimate = CalibrationEstimate(estimate.transform, estimate.residual,
                                                      estimate.observation_count, i, fell_back)
                result.history.append(result.estimate)
                result.final_kept = kept
            except (InsufficientDataError, RotationUnobservableError, TranslationUnobservableError) as e:
                logger.debug("iteration %d: no solve (%s)", i, e)

        if result.estimate is not None:
            record.residual = result.estimate.residual
            if ground_truth is not None:
                record.rotation_error = geodesic_angle(result.estimate.transform.rotation, ground_truth.rotation)
                record.translation_error = float(np.linalg.norm(
                    result.estimate.transform.translation - ground_truth.translation))

        logger.info("iteration %d: joint %s sweep %s %s, kept %d/%d, residual %s", i, record.joint,
                    f"{record.sweep:.3f}" if record.sweep is not None else "-",
                    "accepted" if record.accepted else f"rejected ({record.reason})",
                    record.stage2_count, record.raw_count,
                    f"{record.residual:.3e}" if record.residual is not None else "-")

        if record.accepted and check_convergence(result.history, convergence):
            result.converged = True
            if stop_on_convergence:
                logger.info("converged after %d iterations", i + 1)
                break

    if not result.converged:
        logger.warning("no convergence after %d iterations", len(result.records))
    return result
