"""
Pattern Fitting Module

Fits the keypoint trajectories of one motion to conics, either sharing one
orientation across the motion or each on its own.

Features:
- ConicCoefficients: A u^2 + B uv + C v^2 + D u + E v + F = 0 on the normalized image plane
- usable_trajectories: drops short tracks and tracks that barely move (keypoints near the axis)
- fit_shared_conics: one homogeneous least-squares problem for every trajectory of a motion,
  with B and G = C - A shared, solved by SVD on isotropically normalized coordinates
- fit_independent_conics: one general conic per trajectory (exact under perspective projection)
- validate_ellipses: keeps real, non-degenerate ellipses with bounded axis ratio

Usage:
    from pattern_fitting import FittingParams, fit_conics, usable_trajectories, validate_ellipses

    fit = validate_ellipses(fit_conics(usable_trajectories(trajectories), FittingParams()))
    for trajectory, conic in zip(fit.trajectories, fit.conics):
        ...
"""

import logging
from dataclasses import dataclass

import numpy as np

from errors import DegenerateFitError, InsufficientDataError, InvalidInputError
from utils import DotDict

logger = logging.getLogger(__name__)


RANK_RTOL = 1e-10
CIRCLE_NULL_TOL = 1e-8
CONIC_MODELS = ("independent", "shared")


def get_default_parameters():
    """
    Default fitting parameters.

    Returns:
        dict: Sectioned parameter dictionary
    """
    return {
        "Fitting": [
            {"min_samples": 6},
            {"min_extent": 2e-3},       # normalized image units
            {"ellipse_eps": 1e-9},      # on B^2 - 4AC after A^2 + B^2 + C^2 = 1
            {"max_axis_ratio": 50.0},
            {"conic_model": "independent"},  # or "shared"
        ]
    }


@dataclass(frozen=True)
class FittingParams:
    min_samples: int = 6
    min_extent: float = 2e-3
    ellipse_eps: float = 1e-9
    max_axis_ratio: float = 50.0
    conic_model: str = "independent"

    def __post_init__(self):
        if self.conic_model not in CONIC_MODELS:
            raise InvalidInputError(f"conic_model must be one of {CONIC_MODELS}, got '{self.conic_model}'")

    @classmethod
    def from_parameters(cls, parameters):
        p = DotDict(parameters)
        return cls(
            min_samples=int(p.min_samples),
            min_extent=float(p.min_extent),
            ellipse_eps=float(p.ellipse_eps),
            max_axis_ratio=float(p.max_axis_ratio),
            conic_model=str(p.get("conic_model", "independent")),
        )


@dataclass(frozen=True)
class ConicCoefficients:
    A: float
    B: float
    C: float
    D: float
    E: float
    F: float

    def as_array(self):
        return np.array([self.A, self.B, self.C, self.D, self.E, self.F])

    @classmethod
    def from_array(cls, values):
        return cls(*(float(v) for v in values))

    @classmethod
    def from_matrix(cls, M):
        return cls(M[0, 0], 2 * M[0, 1], M[1, 1], 2 * M[0, 2], 2 * M[1, 2], M[2, 2])

    @property
    def matrix(self):
        """Symmetric 3x3 matrix Q with x^T Q x = 0 for x = (u, v, 1)."""
        return np.array([
            [self.A, self.B / 2, self.D / 2],
            [self.B / 2, self.C, self.E / 2],
            [self.D / 2, self.E / 2, self.F],
        ])

    @property
    def discriminant(self):
        return self.B ** 2 - 4 * self.A * self.C

    def evaluate(self, points):
        """Algebraic distance of each (u, v) point."""
        p = np.atleast_2d(np.asarray(points, dtype=float))
        u, v = p[:, 0], p[:, 1]
        return (self.A * u * u + self.B * u * v + self.C * v * v
                + self.D * u + self.E * v + self.F)

    def scaled(self, factor):
        return ConicCoefficients.from_array(self.as_array() * factor)


@dataclass(frozen=True, eq=False)
class MotionConicFit:
    """
    Conic fit of one motion.

    Attributes:
        conics: Tuple of ConicCoefficients, aligned with `trajectories`
        trajectories: Tuple of the fitted KeypointTrajectory, by keypoint_id
        shared_B, shared_G: Motion-wide B and G = C - A (None for independent fits)
        residual: RMS algebraic distance over all samples
        circle_fallback: True when the fit fell back to independent circles
    """
    conics: tuple
    trajectories: tuple
    shared_B: float
    shared_G: float
    residual: float
    circle_fallback: bool = False

    def __len__(self):
        return len(self.conics)

    def subset(self, keep):
        """Fit restricted to the entries where `keep` is True."""
        keep = list(keep)
        return MotionConicFit(
            conics=tuple(c for c, k in zip(self.conics, keep) if k),
            trajectories=tuple(t for t, k in zip(self.trajectories, keep) if k),
            shared_B=self.shared_B,
            shared_G=self.shared_G,
            residual=self.residual,
            circle_fallback=self.circle_fallback,
        )


def usable_trajectories(trajectories, min_samples=6, min_extent=2e-3):
    """
    Trajectories with enough samples and image motion to carry a conic.

    Args:
        trajectories: Iterable of KeypointTrajectory
        min_samples: Minimum sample count
        min_extent: Minimum bounding-box diagonal (normalized units)

    Returns:
        list: Kept trajectories, in input order
    """
    kept = []
    for trajectory in trajectories:
        if len(trajectory) < min_samples:
            logger.debug("keypoint %d: %d samples, discarded", trajectory.keypoint_id, len(trajectory))
        elif trajectory.extent < min_extent:
            logger.debug("keypoint %d: extent %.2e, discarded", trajectory.keypoint_id, trajectory.extent)
        else:
            kept.append(trajectory)
    return kept


def _normalizing_transform(points):
    """Similarity T moving the centroid to 0 and the RMS distance to sqrt(2)."""
    center = points.mean(axis=0)
    rms = np.sqrt(np.mean(np.sum((points - center) ** 2, axis=1)))
    if rms < 1e-15:
        raise DegenerateFitError("all samples coincide")
    s = np.sqrt(2.0) / rms
    return np.array([
        [s, 0.0, -s * center[0]],
        [0.0, s, -s * center[1]],
        [0.0, 0.0, 1.0],
    ])


def _design_matrix(point_sets):
    """
    Rows (uv, v^2 | per trajectory: u^2 + v^2, u, v, 1) for every sample.

    Column layout of g: (B, G, A_1, D_1, E_1, F_1, ..., A_L, D_L, E_L, F_L).
    """
    total = sum(len(p) for p in point_sets)
    W = np.zeros((total, 2 + 4 * len(point_sets)))
    row = 0
    for j, p in enumerate(point_sets):
        u, v = p[:, 0], p[:, 1]
        rows = slice(row, row + len(p))
        W[rows, 0] = u * v
        W[rows, 1] = v * v
        block = 2 + 4 * j
        W[rows, block] = u * u + v * v
        W[rows, block + 1] = u
        W[rows, block + 2] = v
        W[rows, block + 3] = 1.0
        row += len(p)
    return W


def _null_space(W):
    """Right singular vectors of W spanning its numerical null space (at least one)."""
    _, S, Vt = np.linalg.svd(W, full_matrices=True)
    n_cols = W.shape[1]
    singular = np.zeros(n_cols)
    singular[:len(S)] = S
    tol = RANK_RTOL * max(S[0], 1e-300)
    nullity = max(1, int(np.sum(singular < tol)))
    return Vt[-nullity:], singular


def _circle_blocks(point_sets):
    """Independent circle fit per trajectory, B = G = 0."""
    g = np.zeros(2 + 4 * len(point_sets))
    for j, p in enumerate(point_sets):
        block = _design_matrix([p])[:, 2:]
        null, _ = _null_space(block)
        if len(null) > 1:
            raise DegenerateFitError(f"trajectory {j} does not determine a circle")
        g[2 + 4 * j: 6 + 4 * j] = null[-1]
    return g


def _conics_from_vector(g, L):
    B, G = g[0], g[1]
    conics = []
    for j in range(L):
        A, D, E, F = g[2 + 4 * j: 6 + 4 * j]
        conics.append(ConicCoefficients(A, B, A + G, D, E, F))
    return conics


def _vector_from_conics(conics):
    B = conics[0].B
    G = conics[0].C - conics[0].A
    g = [B, G]
    for c in conics:
        g.extend([c.A, c.D, c.E, c.F])
    return np.array(g)


def fit_shared_conics(trajectories, min_samples=6):
    """
    Fit every trajectory of a motion to a conic with shared B and C - A.

    Minimizes ||W g||^2 subject to ||g|| = 1 over g = (B, G, {A_j, D_j, E_j, F_j}).
    The SVD runs on coordinates normalized jointly for the whole motion; the
    conics are mapped back with C = T^T C_n T and g renormalized in the original
    coordinates.

    When the null space is larger than one and contains only circle
    directions (B = G = 0), the fit falls back to one circle per trajectory.

    Args:
        trajectories: Iterable of KeypointTrajectory
        min_samples: Trajectories with fewer samples are dropped first

    Returns:
        MotionConicFit

    Raises:
        InsufficientDataError: No trajectory has enough samples
        DegenerateFitError: Design matrix rank below 4L + 1 outside the circle case
    """
    kept = sorted((t for t in trajectories if len(t) >= min_samples),
                  key=lambda t: (t.motion_id, t.keypoint_id))
    if not kept:
        raise InsufficientDataError(f"no trajectory with at least {min_samples} samples")
    L = len(kept)

    raw = [np.asarray(t.points, dtype=float) for t in kept]
    T = _normalizing_transform(np.vstack(raw))
    normalized = [p @ T[:2, :2].T + T[:2, 2] for p in raw]

    W = _design_matrix(normalized)
    null, singular = _null_space(W)
    circle_fallback = False
    if len(null) > 1:
        if np.max(np.abs(null[:, :2])) > CIRCLE_NULL_TOL:
            raise DegenerateFitError(
                f"design matrix rank {W.shape[1] - len(null)} below {4 * L + 1} for {L} trajectories")
        logger.debug("exact-circle null space of dimension %d, fitting circles independently", len(null))
        g_n = _circle_blocks(normalized)
        circle_fallback = True
    else:
        g_n = null[-1]

    conics = []
    for c in _conics_from_vector(g_n, L):
        M = T.T @ c.matrix @ T
        conics.append(ConicCoefficients.from_matrix(M))

    g = _vector_from_conics(conics)
    g /= np.linalg.norm(g)
    if sum(g[2 + 4 * j] for j in range(L)) < 0:
        g = -g
    conics = _conics_from_vector(g, L)

    residual = float(np.linalg.norm(_design_matrix(raw) @ g) / np.sqrt(sum(len(p) for p in raw)))
    logger.debug("shared conic fit: %d trajectories, residual %.3e, smallest singular values %s",
                 L, residual, np.array2string(singular[-2:], precision=3))
    return MotionConicFit(
        conics=tuple(conics),
        trajectories=tuple(kept),
        shared_B=float(g[0]),
        shared_G=float(g[1]),
        residual=residual,
        circle_fallback=circle_fallback,
    )


def _general_conic(points):
    """Unit-norm conic through one point set, or None when the points do not determine one."""
    T = _normalizing_transform(points)
    p = points @ T[:2, :2].T + T[:2, 2]
    u, v = p[:, 0], p[:, 1]
    W = np.column_stack((u * u, u * v, v * v, u, v, np.ones_like(u)))
    null, _ = _null_space(W)
    if len(null) > 1:
        return None
    M = T.T @ ConicCoefficients.from_array(null[-1]).matrix @ T
    c = ConicCoefficients.from_matrix(M).as_array()
    c /= np.linalg.norm(c)
    if c[0] + c[2] < 0:
        c = -c
    return ConicCoefficients.from_array(c)


def fit_independent_conics(trajectories, min_samples=6):
    """
    Fit every trajectory of a motion to its own general conic.

    Coaxial circles share the orientation of their images only under affine
    projection; this fit drops that coupling and is exact on noise-free
    perspective data. Trajectories whose samples do not determine a unique
    conic are dropped.

    Args:
        trajectories: Iterable of KeypointTrajectory
        min_samples: Trajectories with fewer samples are dropped first

    Returns:
        MotionConicFit with shared_B = shared_G = None

    Raises:
        InsufficientDataError: No trajectory has enough samples
        DegenerateFitError: No trajectory determines a conic
    """
    kept = sorted((t for t in trajectories if len(t) >= min_samples),
                  key=lambda t: (t.motion_id, t.keypoint_id))
    if not kept:
        raise InsufficientDataError(f"no trajectory with at least {min_samples} samples")

    conics, fitted, squared, count = [], [], 0.0, 0
    for trajectory in kept:
        points = np.asarray(trajectory.points, dtype=float)
        try:
            conic = _general_conic(points)
        except DegenerateFitError:
            conic = None
        if conic is None:
            logger.debug("keypoint %d: samples do not determine a conic", trajectory.keypoint_id)
            continue
        conics.append(conic)
        fitted.append(trajectory)
        squared += float(np.sum(conic.evaluate(points) ** 2))
        count += len(points)
    if not conics:
        raise DegenerateFitError(f"none of {len(kept)} trajectories determines a conic")

    return MotionConicFit(
        conics=tuple(conics),
        trajectories=tuple(fitted),
        shared_B=None,
        shared_G=None,
        residual=float(np.sqrt(squared / count)),
    )


def fit_conics(trajectories, params=None):
    """Conic fit of one motion with the model selected in FittingParams."""
    params = params or FittingParams()
    if params.conic_model == "shared":
        return fit_shared_conics(trajectories, params.min_samples)
    return fit_independent_conics(trajectories, params.min_samples)


def is_valid_ellipse(conic, ellipse_eps=1e-9, max_axis_ratio=50.0):
    """
    Ellipse gate for one conic.

    The conic is scaled to A^2 + B^2 + C^2 = 1, then must satisfy
    B^2 - 4AC < -ellipse_eps, be real (non-empty), and have a semi-axis ratio
    of at most max_axis_ratio.
    """
    k = np.sqrt(conic.A ** 2 + conic.B ** 2 + conic.C ** 2)
    if k < 1e-15:
        return False
    c = conic.scaled(1.0 / k)
    if not c.discriminant < -ellipse_eps:
        return False
    # real ellipse: det(Q) has the opposite sign of A + C
    if not np.linalg.det(c.matrix) * (c.A + c.C) < 0:
        return False
    eig = np.abs(np.linalg.eigvalsh(np.array([[c.A, c.B / 2], [c.B / 2, c.C]])))
    return bool(np.sqrt(eig.max() / eig.min()) <= max_axis_ratio)


def validate_ellipses(fit, ellipse_eps=1e-9, max_axis_ratio=50.0):
    """
    Keep the conics of a fit that are genuine ellipses.

    Args:
        fit: MotionConicFit
        ellipse_eps: Discriminant margin
        max_axis_ratio: Largest accepted semi-axis ratio

    Returns:
        MotionConicFit: Possibly empty
    """
    keep = [is_valid_ellipse(c, ellipse_eps, max_axis_ratio) for c in fit.conics]
    for trajectory, ok in zip(fit.trajectories, keep):
        if not ok:
            logger.debug("keypoint %d: conic is not a usable ellipse", trajectory.keypoint_id)
    return fit.subset(keep)
