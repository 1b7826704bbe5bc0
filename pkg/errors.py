"""
Calibration Errors Module

Exception hierarchy shared by every stage of the calibration pipeline.

- CalibrationError: root of everything raised on purpose by this package
- InvalidInputError: bad files, bad configuration, bad indices (also a ValueError)
- Geometric degeneracies raised by the fitting and solving stages
- Control-flow errors raised by the planner and the main loop

Usage:
    from errors import CalibrationError, ObservationUnusableError

    try:
        observation = estimate_observation(motion, fit, trajectories)
    except CalibrationError as e:
        rejections.append(str(e))
"""


class CalibrationError(Exception):
    """Root of all errors raised on purpose by the calibration package."""


# Input errors

class InvalidInputError(CalibrationError, ValueError):
    """Input data or parameters are malformed or out of range."""


class ConfigError(InvalidInputError):
    """
    Run configuration failed to parse or validate.

    Args:
        message: Summary line
        problems: List of "field.path: reason" (or "line N: reason") strings
    """
    def __init__(self, message, problems=None):
        self.problems = list(problems or [])
        if self.problems:
            message = message + "\n" + "\n".join(f"  - {p}" for p in self.problems)
        super().__init__(message)


class TrajectoryFormatError(InvalidInputError):
    """A trajectory JSON Lines record could not be parsed."""
    def __init__(self, message, line_number=None):
        self.line_number = line_number
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)


class InvalidJointError(InvalidInputError):
    """Joint or link index outside the kinematic chain."""


# Geometric degeneracies

class DegenerateProjectionError(CalibrationError):
    """Viewing ray (nearly) parallel to the projection plane."""


class DegenerateRotationError(CalibrationError):
    """Matrix too close to rank-deficient to project onto SO(3)."""


class InsufficientDataError(CalibrationError):
    """Not enough usable samples or trajectories to fit."""


class DegenerateFitError(CalibrationError):
    """Conic design matrix has a null space larger than the model allows."""


class NotARealConeError(CalibrationError):
    """Conic does not back-project to a real elliptic cone."""


class DegenerateArcError(CalibrationError):
    """Circle fit normal equations are singular (no angular spread)."""


class PointCircleError(CalibrationError):
    """Projected trajectory collapses to a point (radius ~ 0)."""


class CenterlineFailureError(CalibrationError):
    """RANSAC centerline did not gather enough inliers."""


# Observation level

class EmptyObservationError(CalibrationError):
    """A motion produced no visible keypoint trajectories."""


class ObservationUnusableError(CalibrationError):
    """A motion's trajectories could not be turned into an observation."""


# Solver level

class TranslationUnobservableError(CalibrationError):
    """Coplanarity normals do not span R^3; translation is not determined."""


class RotationUnobservableError(CalibrationError):
    """Observed axes span fewer than two directions; rotation is not determined."""


# Control flow

class PlanningFailureError(CalibrationError):
    """No feasible exploratory motion was found."""


class CalibrationAbortedError(CalibrationError):
    """The calibration loop gave up (e.g. repeated planning failures)."""


# Geometric failures that make one motion unusable but leave the run alive
OBSERVATION_ERRORS = (
    DegenerateProjectionError,
    InsufficientDataError,
    DegenerateFitError,
    NotARealConeError,
    DegenerateArcError,
    PointCircleError,
    CenterlineFailureError,
    EmptyObservationError,
    ObservationUnusableError,
)
