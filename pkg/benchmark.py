"""
Benchmark Module

Error metrics and the error-versus-motion-count benchmark.

Features:
- ErrorMetrics: geodesic rotation error and translation error against ground truth
- random_camera_poses: cameras on a spherical shell around the robot, looking at it
- run_benchmark: every (camera pose, seed) pair runs the full loop with the convergence
  stop disabled; errors are sampled after fixed motion counts. Runs may go to a process pool.

Usage:
    from benchmark import run_benchmark
    from run_config import load_run_config

    rows = run_benchmark(load_run_config("presets/benchmark.yaml"), jobs=4)
"""

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from calibrator import SimulatedSource, calibrate_loop
from errors import CalibrationError
from geometry import geodesic_angle, look_at
from run_config import build_camera_pose
from utils import DotDict, merge_parameter_dicts

logger = logging.getLogger(__name__)


DEFAULT_MOTION_COUNTS = tuple(range(3, 26, 2))


def get_default_parameters():
    """
    Default camera-pose sampling parameters.

    Returns:
        dict: Sectioned parameter dictionary
    """
    return {
        "Poses": [
            {"radius_min": 1.4},          # meters
            {"radius_max": 2.2},
            {"elevation_min_deg": 10.0},
            {"elevation_max_deg": 50.0},
            {"target_height": 0.4},       # meters above the base
        ]
    }


@dataclass(frozen=True)
class ErrorMetrics:
    rotation_error: float
    translation_error: float


def compute_error_metrics(estimate, truth):
    """
    Errors of an estimated camera-from-base transform.

    Args:
        estimate: Estimated RigidTransform
        truth: True RigidTransform

    Returns:
        ErrorMetrics: geodesic angle in [0, pi] (radians) and translation distance (meters)
    """
    return ErrorMetrics(
        rotation_error=geodesic_angle(estimate.rotation, truth.rotation),
        translation_error=float(np.linalg.norm(estimate.translation - truth.translation)),
    )


def random_camera_poses(count, seed=0, parameters=None):
    """
    Random cameras looking at a point above the robot base.

    Args:
        count: Number of poses
        seed: Seed for numpy's default_rng
        parameters: Overrides of the Poses section of get_default_parameters()

    Returns:
        list: RigidTransform (camera from base) per pose
    """
    p = DotDict(merge_parameter_dicts(get_default_parameters(), parameters))
    rng = np.random.default_rng(seed)
    target = np.array([0.0, 0.0, p.target_height])
    poses = []
    for _ in range(count):
        r = rng.uniform(p.radius_min, p.radius_max)
        elevation = np.radians(rng.uniform(p.elevation_min_deg, p.elevation_max_deg))
        azimuth = rng.uniform(0.0, 2.0 * np.pi)
        eye = target + r * np.array([
            np.cos(elevation) * np.cos(azimuth),
            np.cos(elevation) * np.sin(azimuth),
            np.sin(elevation),
        ])
        poses.append(look_at(eye, target))
    return poses


def benchmark_poses(config):
    """
    Ground-truth camera poses of a benchmark configuration.

    `benchmark.poses` is either a count of random poses, drawn with the
    `benchmark.pose_sampling` overrides, or a list of pose mappings.
    """
    poses = config.benchmark.get("poses", 0)
    if isinstance(poses, (int, np.integer)):
        return random_camera_poses(int(poses), seed=int(config.benchmark.get("pose_seed", 0)),
                                   parameters={"Poses": config.benchmark.get("pose_sampling") or {}})
    return [build_camera_pose(p) for p in poses]


def run_single(config, pose_id, camera_from_base, seed, motion_counts):
    """
    One benchmark run.

    Returns:
        list: Row dicts, one per motion count
    """
    run_config = config.with_camera(camera_from_base).with_seed(seed)
    counts = sorted(int(m) for m in motion_counts)
    records = []
    try:
        source = SimulatedSource(run_config.scene, run_config.planner, seed=seed, frames=run_config.frames)
        result = calibrate_loop(
            source,
            run_config.scene.robot,
            estimation_params=run_config.estimation,
            fitting_params=run_config.fitting,
            pruning=run_config.pruning,
            convergence=run_config.convergence,
            max_iterations=counts[-1],
            ground_truth=run_config.scene.camera_from_base,
            stop_on_convergence=False,
            max_planning_failures=run_config.max_planning_failures,
        )
        records = result.records
    except CalibrationError as e:
        logger.warning("pose %d seed %d failed: %s", pose_id, seed, e)

    rows = []
    for m in counts:
        record = records[m - 1] if m <= len(records) else None
        failed = record is None or record.rotation_error is None
        rows.append({
            "pose_id": int(pose_id),
            "seed": int(seed),
            "motions": m,
            "rot_err_rad": np.nan if failed else record.rotation_error,
            "trans_err_m": np.nan if failed else record.translation_error,
            "failed": failed,
        })
    logger.info("pose %d seed %d done", pose_id, seed)
    return rows


def _run_job(args):
    return run_single(*args)


def run_benchmark(config, jobs=1):
    """
    Run every (pose, seed) pair of a benchmark configuration.

    Args:
        config: RunConfig with a benchmark section
        jobs: Worker processes (1 runs in-process)

    Returns:
        list: Row dicts ordered by (pose_id, seed, motions)
    """
    poses = benchmark_poses(config)
    seeds = [int(s) for s in config.benchmark.get("seeds", [config.seed])]
    motion_counts = config.benchmark.get("motion_counts") or list(DEFAULT_MOTION_COUNTS)
    tasks = [(config, pose_id, pose, seed, motion_counts)
             for pose_id, pose in enumerate(poses) for seed in seeds]
    logger.info("benchmark: %d poses x %d seeds", len(poses), len(seeds))

    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_job, tasks))
    else:
        results = [_run_job(task) for task in tasks]
    return [row for rows in results for row in rows]
