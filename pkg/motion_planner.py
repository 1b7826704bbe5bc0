"""
Motion Planner Module

Selects exploratory motions: a start configuration, one joint, and a signed sweep.

Features:
- Random start configuration within joint limits, random joint from the plannable set
- Swept path sampled every path_step radians, each sample checked by a feasibility predicate
- Sweep maximized up to delta_max in whichever direction reaches further
- Deterministic for a fixed seed (numpy Generator seeded per call)

Usage:
    from motion_planner import PlannerParams, select_motion

    params = PlannerParams()
    motion = select_motion(robot, robot.within_limits, rng_seed=[0, 3], params=params)
"""

import logging
import math
from dataclasses import dataclass

import numpy as np

from errors import InvalidInputError, PlanningFailureError
from utils import DotDict

logger = logging.getLogger(__name__)


def get_default_parameters():
    """
    Default planner parameters.

    Returns:
        dict: Sectioned parameter dictionary
    """
    return {
        "Planner": [
            {"delta_min": 0.5},        # radians
            {"delta_max": 1.5},        # radians
            {"path_step": 0.05},       # radians between feasibility checks
            {"max_attempts": 200},
        ]
    }


@dataclass(frozen=True)
class PlannerParams:
    delta_min: float = 0.5
    delta_max: float = 1.5
    path_step: float = 0.05
    max_attempts: int = 200

    def __post_init__(self):
        if not self.delta_min > 0:
            raise InvalidInputError(f"delta_min must be positive, got {self.delta_min}")
        if self.delta_max < self.delta_min:
            raise InvalidInputError(
                f"delta_max ({self.delta_max}) must not be below delta_min ({self.delta_min})")
        if not self.path_step > 0:
            raise InvalidInputError(f"path_step must be positive, got {self.path_step}")
        if int(self.max_attempts) < 1:
            raise InvalidInputError(f"max_attempts must be at least 1, got {self.max_attempts}")

    @classmethod
    def from_parameters(cls, parameters):
        p = DotDict(parameters)
        return cls(
            delta_min=float(p.delta_min),
            delta_max=float(p.delta_max),
            path_step=float(p.path_step),
            max_attempts=int(p.max_attempts),
        )


@dataclass(frozen=True)
class ExploratoryMotion:
    """
    Single-joint motion (start configuration, joint, signed sweep).

    Attributes:
        start_config: Tuple of N joint angles (radians)
        joint: Moved joint, 1..N
        sweep: Signed joint displacement (radians)
    """
    start_config: tuple
    joint: int
    sweep: float

    def __post_init__(self):
        object.__setattr__(self, "start_config", tuple(float(v) for v in self.start_config))
        object.__setattr__(self, "joint", int(self.joint))
        object.__setattr__(self, "sweep", float(self.sweep))

    def configuration_at(self, delta):
        """Configuration after moving the joint by `delta` from the start."""
        q = np.array(self.start_config)
        q[self.joint - 1] += delta
        return q

    @property
    def end_config(self):
        return self.configuration_at(self.sweep)


def _reach(model, feasible, start, joint, direction, params):
    """Largest feasible displacement (<= delta_max) along one direction, at path_step resolution."""
    steps = math.ceil(params.delta_max / params.path_step - 1e-9)
    reach = 0.0
    q = np.array(start, dtype=float)
    for k in range(1, steps + 1):
        d = min(k * params.path_step, params.delta_max)
        q[joint - 1] = start[joint - 1] + direction * d
        if not (model.within_limits(q) and feasible(q)):
            break
        reach = d
    return reach


def select_motion(model, feasible, rng_seed, params, joints=None):
    """
    Pick a random feasible exploratory motion.

    Args:
        model: RobotModel
        feasible: Predicate on a configuration array; None means joint limits only
        rng_seed: Seed (int or sequence of ints) for numpy's default_rng
        params: PlannerParams
        joints: Candidate joint indices (default: all joints)

    Returns:
        ExploratoryMotion: |sweep| in [delta_min, delta_max], whole path feasible

    Raises:
        PlanningFailureError: No feasible motion within max_attempts
    """
    feasible = feasible or (lambda q: True)
    joints = list(joints) if joints is not None else list(range(1, model.dof + 1))
    if not joints:
        raise PlanningFailureError("no plannable joints")
    for j in joints:
        model.check_joint(j)

    rng = np.random.default_rng(rng_seed)
    limits = model.joint_limits
    best_reach = 0.0

    for attempt in range(params.max_attempts):
        start = rng.uniform(limits[:, 0], limits[:, 1])
        joint = int(joints[rng.integers(len(joints))])
        if not feasible(start):
            continue

        forward = _reach(model, feasible, start, joint, 1.0, params)
        backward = _reach(model, feasible, start, joint, -1.0, params)
        reach, direction = (forward, 1.0) if forward >= backward else (backward, -1.0)
        best_reach = max(best_reach, reach)

        if reach >= params.delta_min:
            motion = ExploratoryMotion(start_config=start, joint=joint, sweep=direction * reach)
            logger.debug("Motion after %d attempt(s): joint %d, sweep %.3f rad", attempt + 1, joint, motion.sweep)
            return motion

    raise PlanningFailureError(
        f"no feasible motion with |sweep| >= {params.delta_min} rad after {params.max_attempts} attempts "
        f"(largest feasible sweep found: {best_reach:.3f} rad)")
