"""
Motion Estimation Module

Turns the validated conics of one motion into a rotation axis and a reference
direction in the camera frame.

Features:
- axis_candidates: circular sections of the projection cone of an ellipse (two signed normals)
- rotation_sense: turning direction of a motion's tracks about a normal, by majority vote
- fit_projected_circle: rigid-rotation circle model on a projection plane, solved linearly
- refine_axis: local least-squares polish of an axis against the circle model of several tracks
- fit_centerline: RANSAC line through the circle centres with a total-least-squares refit
- estimate_observation: consensus pooling, scoring, selection and the axis reference direction

Circle model on the plane normal to a candidate axis n, basis (e1, e2, n) right-handed:
    u'' = cx + a1 cos(d) - a2 sin(d)
    v'' = cy + a1 sin(d) + a2 cos(d)
with radius = hypot(a1, a2) and phase = atan2(a2, a1).

Usage:
    from motion_estimation import EstimationParams, estimate_observation

    observation = estimate_observation(motion, fit, params=EstimationParams())
    print(observation.axis, observation.ref_direction)
"""

import itertools
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares

from errors import (
    CalibrationError,
    CenterlineFailureError,
    DegenerateArcError,
    InsufficientDataError,
    NotARealConeError,
    ObservationUnusableError,
    PointCircleError,
)
from geometry import lift_from_plane, plane_basis, project_to_plane, unit
from utils import DotDict

logger = logging.getLogger(__name__)


PARALLEL_TOL = 1e-6
ARC_RCOND = 1e-12
MIN_ARC_SAMPLES = 4
FAILED_RESIDUAL = 1.0       # plane units, per coordinate of a track that cannot be projected
REFINE_EVALUATIONS = 200


def get_default_parameters():
    """
    Default estimation parameters.

    Returns:
        dict: Sectioned parameter dictionary
    """
    return {
        "Estimation": [
            {"dedup_tol_deg": 2.0},
            {"consensus_tol_deg": 12.0},
            {"refine_axis": True},
        ],
        "Ransac": [
            {"line_tol": 0.01},         # plane units (unit-distance plane)
            {"min_inliers": 2},
            {"ransac_iterations": 200},
            {"ransac_seed": 0},
        ],
    }


@dataclass(frozen=True)
class RansacParams:
    line_tol: float = 0.01
    min_inliers: int = 2
    iterations: int = 200
    seed: int = 0

    @classmethod
    def from_parameters(cls, parameters):
        p = DotDict(parameters)
        return cls(
            line_tol=float(p.line_tol),
            min_inliers=int(p.min_inliers),
            iterations=int(p.ransac_iterations),
            seed=int(p.ransac_seed),
        )


@dataclass(frozen=True)
class EstimationParams:
    """
    Attributes:
        dedup_tol: Candidates closer than this (radians, sign-insensitive) are duplicates
        consensus_tol: Candidates of different tracks closer than this support each other
        refine_axis: Polish the selected axis with refine_axis
        ransac: RansacParams of the centerline
    """
    dedup_tol: float = float(np.radians(2.0))
    consensus_tol: float = float(np.radians(12.0))
    refine_axis: bool = True
    ransac: RansacParams = field(default_factory=RansacParams)

    @classmethod
    def from_parameters(cls, parameters):
        p = DotDict(parameters)
        return cls(
            dedup_tol=float(np.radians(p.dedup_tol_deg)),
            consensus_tol=float(np.radians(p.get("consensus_tol_deg", 12.0))),
            refine_axis=bool(p.get("refine_axis", True)),
            ransac=RansacParams.from_parameters(parameters),
        )


@dataclass(frozen=True, eq=False)
class AxisCandidate:
    axis: np.ndarray
    source_trajectory: int
    score: float = None


@dataclass(frozen=True, eq=False)
class CandidateCluster:
    """
    Candidates of several tracks that agree on one axis.

    Attributes:
        axis: Unit mean of the sign-aligned members
        members: Indices into the pooled candidate list
        support: Keypoint ids contributing a member, sorted
    """
    axis: np.ndarray
    members: tuple
    support: tuple


@dataclass(frozen=True)
class CircleFit:
    """
    Circle fitted to a projected trajectory.

    Attributes:
        center: (cx, cy) in plane coordinates
        radius: alpha > 0
        phase: beta in [0, 2 pi)
        residual: Sum of squared distances J
    """
    center: tuple
    radius: float
    phase: float
    residual: float

    @property
    def normalized_residual(self):
        return self.residual / self.radius


@dataclass(frozen=True, eq=False)
class Line2D:
    """Line through `point` along unit `direction`."""
    point: np.ndarray
    direction: np.ndarray

    @property
    def normal(self):
        return np.array([-self.direction[1], self.direction[0]])

    def distance(self, points):
        p = np.atleast_2d(np.asarray(points, dtype=float))
        return np.abs((p - self.point) @ self.normal)

    def project(self, point):
        """Orthogonal projection of a point onto the line."""
        p = np.asarray(point, dtype=float)
        return self.point + np.dot(p - self.point, self.direction) * self.direction


@dataclass(frozen=True, eq=False)
class MotionObservation:
    """
    Per-motion estimate.

    Attributes:
        motion: ExploratoryMotion
        axis: Chosen rotation axis, camera frame
        ref_direction: Unit ray from the camera centre to a point of the axis line
        best_score, second_score: Scores of the first and second ranked candidate clusters
        inlier_ratio: Fraction of circle centres on the centerline
        trajectory_count: Number of trajectories used
        motion_id: Motion index
        candidate_count: Candidate clusters after pooling
        forced_spurious: True when the runner-up candidate was reported on purpose
        inlier_keypoints: keypoint ids whose circle centres are centerline inliers
        axis_support: Fraction of trajectories whose own ellipse agrees with the axis
    """
    motion: object
    axis: np.ndarray
    ref_direction: np.ndarray
    best_score: float
    second_score: float
    inlier_ratio: float
    trajectory_count: int
    motion_id: int = 0
    candidate_count: int = 1
    forced_spurious: bool = False
    inlier_keypoints: tuple = ()
    axis_support: float = 1.0

    def __post_init__(self):
        axis = unit(self.axis, "observation axis")
        ref = unit(self.ref_direction, "reference direction")
        if np.linalg.norm(np.cross(axis, ref)) <= PARALLEL_TOL:
            raise ObservationUnusableError("reference direction is parallel to the axis")
        object.__setattr__(self, "axis", axis)
        object.__setattr__(self, "ref_direction", ref)

    @property
    def plane_normal(self):
        """Unit normal of the plane through the camera centre containing the axis line."""
        return unit(np.cross(self.ref_direction, self.axis), "plane normal")

    @property
    def score_gap(self):
        """Relative gap (second - best) / second; 0 when second <= 0."""
        if self.second_score <= 0:
            return 0.0
        return (self.second_score - self.best_score) / self.second_score


def _turning_sign(planar, deltas):
    """+1 when the planar track turns counter-clockwise for increasing delta, -1 clockwise, 0 if undecided."""
    travel = deltas[-1] - deltas[0]
    if len(planar) < 3 or travel == 0:
        return 0
    centred = planar - planar.mean(axis=0)
    x, y = centred[:, 0], centred[:, 1]
    # shoelace area of the track closed by its chord
    area = np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y)
    if area == 0:
        return 0
    return int(np.sign(area) * np.sign(travel))


def rotation_sense(trajectories, axis):
    """
    Majority vote of the turning direction of every track about `axis`.

    Each track is projected on the plane normal to `axis` and votes with the
    sign of its swept area times the sign of its joint travel; tracks that
    cannot be projected abstain.

    Returns:
        int: +1 (counter-clockwise for positive delta), -1, or 0 on a tie
    """
    votes = 0
    for trajectory in trajectories:
        try:
            planar = project_to_plane(trajectory.points, axis)
        except CalibrationError:
            continue
        votes += _turning_sign(planar, trajectory.deltas)
    return int(np.sign(votes))


def axis_candidates(conic, trajectory, motion_trajectories=None):
    """
    Two signed candidate rotation axes from one ellipse.

    The conic matrix Q is scaled so exactly one eigenvalue is negative,
    l3 < 0 < l1 <= l2 with eigenvectors e3, e1, e2. Planes with normal
    sqrt((l1 - l3) / (l2 - l3)) e3 +/- sqrt((l2 - l1) / (l2 - l3)) e2 cut the
    cone in circles. Each normal is first taken with positive z, then signed
    so that a positive joint displacement turns the tracks counter-clockwise
    about it, by rotation_sense over all tracks of the motion.

    Args:
        conic: ConicCoefficients of a validated ellipse
        trajectory: KeypointTrajectory the conic was fitted to
        motion_trajectories: Tracks voting on the sign (defaults to `trajectory` alone)

    Returns:
        list: Two AxisCandidate, sorted by axis components

    Raises:
        NotARealConeError: Eigenvalue signature is not (+, +, -)
    """
    voters = [trajectory] if motion_trajectories is None else list(motion_trajectories)
    Q = conic.matrix
    scale = np.max(np.abs(Q))
    if not scale > 0:
        raise NotARealConeError("conic matrix is zero")
    Q = Q / scale
    w = np.linalg.eigvalsh(Q)
    if np.sum(w < 0) == 2:
        Q = -Q
    w, V = np.linalg.eigh(Q)
    tol = 1e-12 * np.max(np.abs(w))
    if not (w[0] < -tol and w[1] > tol):
        raise NotARealConeError(f"cone eigenvalues {w} do not have signature (+, +, -)")

    l3, l1, l2 = w
    e3, e2 = V[:, 0], V[:, 2]
    a = np.sqrt(max((l1 - l3) / (l2 - l3), 0.0))
    b = np.sqrt(max((l2 - l1) / (l2 - l3), 0.0))

    candidates = []
    for n in (a * e3 + b * e2, a * e3 - b * e2):
        n = unit(n, "cone section normal")
        if n[2] < 0:
            n = -n
        if rotation_sense(voters, n) < 0:
            n = -n
        candidates.append(AxisCandidate(axis=n, source_trajectory=trajectory.keypoint_id))
    candidates.sort(key=lambda c: tuple(np.round(c.axis, 12)))
    return candidates


def _arc_design(deltas):
    c, s = np.cos(deltas), np.sin(deltas)
    ones, zeros = np.ones_like(deltas), np.zeros_like(deltas)
    return np.vstack([
        np.column_stack((ones, zeros, c, -s)),
        np.column_stack((zeros, ones, s, c)),
    ])


def fit_circle_to_arc(planar, deltas):
    """
    Least-squares rigid-rotation circle through planar samples with known angles.

    Args:
        planar: (k, 2) points on the projection plane
        deltas: (k,) rotation angles of the samples

    Returns:
        CircleFit

    Raises:
        InsufficientDataError: Fewer than 4 samples
        DegenerateArcError: Angles do not spread (singular normal equations)
        PointCircleError: Radius below 1e-9
    """
    planar = np.asarray(planar, dtype=float)
    deltas = np.asarray(deltas, dtype=float)
    if len(planar) < MIN_ARC_SAMPLES:
        raise InsufficientDataError(f"circle fit needs {MIN_ARC_SAMPLES} samples, got {len(planar)}")

    M = _arc_design(deltas)
    y = np.concatenate((planar[:, 0], planar[:, 1]))

    sv = np.linalg.svd(M, compute_uv=False)
    if sv[-1] <= ARC_RCOND * sv[0]:
        raise DegenerateArcError(f"joint angles span {np.ptp(deltas):.3e} rad, circle is undetermined")
    solution, *_ = np.linalg.lstsq(M, y, rcond=None)
    cx, cy, a1, a2 = solution
    radius = float(np.hypot(a1, a2))
    if radius < 1e-9:
        raise PointCircleError(f"projected trajectory has radius {radius:.3e}")
    residual = float(np.sum((M @ solution - y) ** 2))
    return CircleFit(
        center=(float(cx), float(cy)),
        radius=radius,
        phase=float(np.arctan2(a2, a1) % (2 * np.pi)),
        residual=residual,
    )


def fit_projected_circle(trajectory, axis):
    """
    Project a trajectory onto the plane normal to `axis` and fit the circle model.

    Args:
        trajectory: KeypointTrajectory
        axis: Candidate unit axis (camera frame)

    Returns:
        CircleFit
    """
    planar = project_to_plane(trajectory.points, axis)
    return fit_circle_to_arc(planar, trajectory.deltas)


def _circle_residuals(trajectory, axis):
    """Signed residuals of the circle model, u'' rows then v'' rows."""
    try:
        planar = project_to_plane(trajectory.points, axis)
    except CalibrationError:
        return np.full(2 * len(trajectory), FAILED_RESIDUAL)
    M = _arc_design(trajectory.deltas)
    y = np.concatenate((planar[:, 0], planar[:, 1]))
    solution, *_ = np.linalg.lstsq(M, y, rcond=None)
    return M @ solution - y


def refine_axis(trajectories, axis):
    """
    Polish an axis by minimizing the summed circle residual sum_j J_j of several tracks.

    The axis moves in its own tangent plane, n(x) = unit(n0 + x1 e1 + x2 e2),
    and the residuals of all tracks are stacked for scipy's least_squares.
    Tracks share the projection plane, so their residuals share units.

    Args:
        trajectories: KeypointTrajectory items turning about the axis
        axis: Starting unit axis (camera frame)

    Returns:
        np.ndarray: Refined unit axis, or the start when nothing improves on it
    """
    start = unit(axis, "axis")
    trajectories = [t for t in trajectories if len(t) >= MIN_ARC_SAMPLES]
    if not trajectories:
        return start
    e1, e2 = plane_basis(start)

    def direction(x):
        return unit(start + x[0] * e1 + x[1] * e2, "axis")

    def residuals(x):
        n = direction(x)
        return np.concatenate([_circle_residuals(t, n) for t in trajectories])

    initial_cost = 0.5 * float(np.sum(residuals(np.zeros(2)) ** 2))
    solution = least_squares(residuals, np.zeros(2), max_nfev=REFINE_EVALUATIONS)
    if not solution.cost < initial_cost:
        return start
    refined = direction(solution.x)
    logger.debug("axis refined by %.2e rad over %d tracks (cost %.3e -> %.3e)",
                 np.arccos(np.clip(refined @ start, -1.0, 1.0)), len(trajectories), initial_cost, solution.cost)
    return refined


def _line_through(p, q):
    d = q - p
    length = np.linalg.norm(d)
    if length < 1e-12:
        return None
    return Line2D(point=p, direction=d / length)


def _tls_line(points):
    center = points.mean(axis=0)
    _, _, Vt = np.linalg.svd(points - center)
    return Line2D(point=center, direction=Vt[0])


def fit_centerline(centers, params=None):
    """
    Robust line through circle centres.

    Two-point hypotheses (all pairs when there are at most params.iterations of
    them, seeded random pairs otherwise), inliers within params.line_tol,
    ties broken by the smallest inlier distance sum, then a total-least-squares
    refit on the inliers.

    Args:
        centers: (n, 2) planar points
        params: RansacParams

    Returns:
        tuple: (Line2D, inlier mask)

    Raises:
        CenterlineFailureError: Fewer than params.min_inliers inliers
    """
    params = params or RansacParams()
    points = np.atleast_2d(np.asarray(centers, dtype=float))
    n = len(points)
    if n < max(2, params.min_inliers):
        raise CenterlineFailureError(f"{n} circle centre(s), need {max(2, params.min_inliers)}")

    if n * (n - 1) // 2 <= params.iterations:
        pairs = itertools.combinations(range(n), 2)
    else:
        rng = np.random.default_rng(params.seed)
        pairs = (tuple(rng.choice(n, size=2, replace=False)) for _ in range(params.iterations))

    best_key, best_mask = None, None
    for i, k in pairs:
        line = _line_through(points[i], points[k])
        if line is None:
            continue
        dist = line.distance(points)
        mask = dist <= params.line_tol
        key = (int(mask.sum()), -float(dist[mask].sum()))
        if best_key is None or key > best_key:
            best_key, best_mask = key, mask
    if best_mask is None:
        raise CenterlineFailureError("all circle centres coincide")

    line = _tls_line(points[best_mask])
    mask = line.distance(points) <= params.line_tol
    if mask.sum() < params.min_inliers:
        raise CenterlineFailureError(f"{int(mask.sum())} inlier(s) on the centerline, need {params.min_inliers}")
    return line, mask


def _pool_candidates(candidates, dedup_tol, consensus_tol):
    """
    Group candidates by agreement across tracks.

    Each round seeds a cluster at the remaining candidate with the most tracks
    holding a candidate within consensus_tol of it (sign-insensitive), ties
    going to the tighter neighbourhood. The cluster takes the nearest such
    candidate of every supporting track plus every duplicate within dedup_tol
    of the seed. Its axis is the mean of the members, signed like the seed.

    Returns:
        list: CandidateCluster in order of creation (largest support first)
    """
    axes = np.array([c.axis for c in candidates])
    sources = [c.source_trajectory for c in candidates]
    gap = np.arccos(np.clip(np.abs(axes @ axes.T), 0.0, 1.0))

    remaining = list(range(len(candidates)))
    clusters = []
    while remaining:
        best = None
        for i in remaining:
            nearest = {}
            for k in remaining:
                if gap[i, k] > consensus_tol:
                    continue
                if sources[k] not in nearest or gap[i, k] < gap[i, nearest[sources[k]]]:
                    nearest[sources[k]] = k
            key = (len(nearest), -sum(gap[i, k] for k in nearest.values()))
            if best is None or key > best[0]:
                best = (key, i, nearest)
        _, seed, nearest = best
        members = sorted(set(nearest.values()) | {k for k in remaining if gap[seed, k] <= dedup_tol})
        aligned = axes[members] * np.where(axes[members] @ axes[seed] < 0, -1.0, 1.0)[:, None]
        clusters.append(CandidateCluster(
            axis=unit(aligned.sum(axis=0), "cluster axis"),
            members=tuple(members),
            support=tuple(sorted({sources[k] for k in members})),
        ))
        remaining = [k for k in remaining if k not in members]
    return clusters


def _fit_circles(trajectories, axis):
    fits = {}
    for trajectory in trajectories:
        try:
            fits[trajectory.keypoint_id] = fit_projected_circle(trajectory, axis)
        except CalibrationError:
            pass
    return fits


def estimate_observation(motion, fit, trajectories=None, params=None, motion_id=0, force_candidate_rank=0):
    """
    Estimate the rotation axis and reference direction of one motion.

    Candidates of every ellipse are signed by the motion's majority turning
    direction and pooled into clusters of tracks that agree on an axis. Each
    cluster axis is scored by sum_j J_j / radius_j over the trajectories whose
    circle fit succeeds under every cluster; clusters rank by support, then by
    score, and a cluster within consensus_tol of a better one is left out of
    the ranking. The winning axis is refined against its supporting tracks.
    Circle centres under it are fitted with a RANSAC centerline, and the
    centroid of the inlier centres is lifted to the reference direction.

    Args:
        motion: ExploratoryMotion
        fit: Validated MotionConicFit
        trajectories: Optional subset; when given, only fit entries for these keypoints are used
        params: EstimationParams
        motion_id: Motion index stamped on the observation
        force_candidate_rank: Report the cluster of this rank (0 = best), unrefined

    Returns:
        MotionObservation

    Raises:
        ObservationUnusableError: No candidate, no common support, centerline failure,
            or a reference direction parallel to the axis
    """
    params = params or EstimationParams()
    if len(fit) == 0:
        raise ObservationUnusableError(f"motion {motion_id}: no validated ellipse")

    pairs = sorted(zip(fit.trajectories, fit.conics), key=lambda tc: tc[0].keypoint_id)
    if trajectories is not None:
        wanted = {t.keypoint_id for t in trajectories}
        pairs = [(t, c) for t, c in pairs if t.keypoint_id in wanted]
    if not pairs:
        raise ObservationUnusableError(f"motion {motion_id}: no validated ellipse")
    tracks = [t for t, _ in pairs]

    raw = []
    for trajectory, conic in pairs:
        try:
            raw.extend(axis_candidates(conic, trajectory, tracks))
        except CalibrationError as e:
            logger.debug("motion %d keypoint %d: no axis candidates (%s)", motion_id, trajectory.keypoint_id, e)
    if not raw:
        raise ObservationUnusableError(f"motion {motion_id}: no axis candidates")

    clusters = _pool_candidates(raw, params.dedup_tol, params.consensus_tol)
    fits = [_fit_circles(tracks, cluster.axis) for cluster in clusters]
    common = set.intersection(*(set(f) for f in fits))
    if not common:
        raise ObservationUnusableError(f"motion {motion_id}: no trajectory fits a circle under every candidate")
    scores = [sum(f[k].normalized_residual for k in common) for f in fits]
    ranking = []
    for i in sorted(range(len(clusters)), key=lambda i: (-len(clusters[i].support), scores[i], i)):
        # a lesser cluster next to a better one is a split of the same axis
        if all(abs(clusters[i].axis @ clusters[r].axis) < np.cos(params.consensus_tol) for r in ranking):
            ranking.append(i)
    best_score = scores[ranking[0]]
    second_score = scores[ranking[1]] if len(ranking) > 1 else best_score
    logger.debug("motion %d: %d clusters, support %s, scores %s", motion_id, len(ranking),
                 [len(clusters[i].support) for i in ranking],
                 np.array2string(np.array([scores[i] for i in ranking]), precision=3))

    forced = force_candidate_rank > 0 and len(ranking) > force_candidate_rank
    cluster = clusters[ranking[force_candidate_rank] if forced else ranking[0]]
    axis = cluster.axis
    if params.refine_axis and not forced:
        axis = refine_axis([t for t in tracks if t.keypoint_id in cluster.support], axis)
    chosen_fits = _fit_circles(tracks, axis)

    keypoint_ids = sorted(chosen_fits)
    centers = np.array([chosen_fits[k].center for k in keypoint_ids])
    try:
        line, mask = fit_centerline(centers, params.ransac)
    except CenterlineFailureError as e:
        raise ObservationUnusableError(f"motion {motion_id}: {e}") from e

    anchor = line.project(centers[mask].mean(axis=0))
    ref_direction = unit(lift_from_plane(anchor, axis), "reference direction")
    if np.linalg.norm(np.cross(axis, ref_direction)) <= PARALLEL_TOL:
        raise ObservationUnusableError(f"motion {motion_id}: reference direction parallel to the axis")

    return MotionObservation(
        motion=motion,
        axis=axis,
        ref_direction=ref_direction,
        best_score=float(best_score),
        second_score=float(second_score),
        inlier_ratio=float(mask.mean()),
        trajectory_count=len(pairs),
        motion_id=motion_id,
        candidate_count=len(ranking),
        forced_spurious=forced,
        inlier_keypoints=tuple(k for k, m in zip(keypoint_ids, mask) if m),
        axis_support=len(cluster.support) / len(pairs),
    )
