"""
Command Line Interface

Entry points for simulation, calibration, benchmarking and scene export.

Commands:
- simulate: plan and simulate the configured motion budget, dump trajectories as JSON Lines
- calibrate: run the loop live on a scene configuration or replay a trajectory dump
- benchmark: error-versus-motion-count table over camera poses and seeds
- export-scene: write the robot, keypoints and cameras as GLTF / STL / STEP

Exit codes: 0 ok, 2 input error, 3 no convergence, 4 no usable observations or aborted run.

Usage:
    python cli.py simulate --config presets/panda_scene.yaml --out motions.jsonl
    python cli.py calibrate --trajectories motions.jsonl --config presets/panda_scene.yaml --report report.json
    python cli.py benchmark --config presets/benchmark.yaml --out errors.csv --jobs 4
"""

import argparse
import logging
import sys

import numpy as np

import robot_model
from benchmark import run_benchmark
from calibrator import RecordedSource, SimulatedSource, calibrate_loop
from errors import CalibrationAbortedError, EmptyObservationError, InvalidInputError, PlanningFailureError
from file_exporters import (build_report, export_model, median_series, benchmark_frame, read_report_transform,
                            read_trajectories_jsonl, write_benchmark_csv, write_report_json,
                            write_trajectories_jsonl)
from robot_model import RobotModel
from run_config import load_run_config
from scene_model import generate_scene_model
from utils import configure_logging

logger = logging.getLogger(__name__)


EXIT_OK = 0
EXIT_INPUT_ERROR = 2
EXIT_NOT_CONVERGED = 3
EXIT_NO_ESTIMATE = 4


def simulate_trajectories(config):
    """
    Trajectories of every motion in the budget, in motion order.

    Motions whose planning fails or whose keypoints are all lost leave a gap in
    the motion ids; a replay records those as empty motions.
    """
    source = SimulatedSource(config.scene, config.planner, seed=config.seed, frames=config.frames)
    trajectories = []
    for motion_id in range(config.motion_budget):
        try:
            batch = source.next_motion(motion_id)
        except (PlanningFailureError, EmptyObservationError) as e:
            logger.info("motion %d skipped: %s", motion_id, e)
            continue
        trajectories.extend(batch.trajectories)
    return trajectories


def cmd_simulate(args):
    config = load_run_config(args.config)
    if args.seed is not None:
        config = config.with_seed(args.seed)
    trajectories = simulate_trajectories(config)
    write_trajectories_jsonl(trajectories, args.out)
    motions = len({t.motion_id for t in trajectories})
    print(f"Wrote {len(trajectories)} trajectories from {motions} motions to {args.out}")
    return EXIT_OK


def _format_transform(transform):
    rotvec = ", ".join(f"{v:+.6f}" for v in transform.rotvec())
    translation = ", ".join(f"{v:+.6f}" for v in transform.translation)
    return f"  rotvec [rad]:    [{rotvec}]\n  translation [m]: [{translation}]"


def cmd_calibrate(args):
    config = None
    if args.scene:
        config = load_run_config(args.scene)
    elif args.config:
        config = load_run_config(args.config)
    if config is not None and args.seed is not None:
        config = config.with_seed(args.seed)

    if args.trajectories:
        source = RecordedSource(read_trajectories_jsonl(args.trajectories))
        robot = config.scene.robot if config else RobotModel.from_parameters(robot_model.get_default_parameters())
        mode = "replay"
    else:
        source = SimulatedSource(config.scene, config.planner, seed=config.seed, frames=config.frames)
        robot = config.scene.robot
        mode = "live"
    ground_truth = config.scene.camera_from_base if config else None

    kwargs = {}
    if config is not None:
        kwargs = dict(estimation_params=config.estimation, fitting_params=config.fitting,
                      pruning=config.pruning, convergence=config.convergence,
                      max_iterations=config.max_iterations, stop_on_convergence=config.stop_on_convergence,
                      max_planning_failures=config.max_planning_failures)

    try:
        result = calibrate_loop(source, robot, ground_truth=ground_truth, **kwargs)
    except CalibrationAbortedError as e:
        print(f"Calibration aborted: {e}", file=sys.stderr)
        return EXIT_NO_ESTIMATE

    report = build_report(result, mode, ground_truth)
    write_report_json(report, args.report)

    if result.estimate is None:
        print("No usable observations, no estimate:", file=sys.stderr)
        for motion_id, reason in result.rejections:
            print(f"  motion {motion_id}: {reason}", file=sys.stderr)
        return EXIT_NO_ESTIMATE

    status = "converged" if result.converged else "NOT converged"
    print(f"Camera-from-base transform ({status} after {len(result.records)} iterations, "
          f"{result.estimate.observation_count} observations):")
    print(_format_transform(result.estimate.transform))
    if report["errors"] is not None:
        print(f"  rotation error [rad]: {report['errors']['rotation_error']:.3e}")
        print(f"  translation error [m]: {report['errors']['translation_error']:.3e}")
    print(f"Report written to {args.report}")
    return EXIT_OK if result.converged else EXIT_NOT_CONVERGED


def cmd_benchmark(args):
    config = load_run_config(args.config)
    rows = run_benchmark(config, jobs=args.jobs)
    path, medians = write_benchmark_csv(rows, args.out)
    series = median_series(benchmark_frame(rows))
    for row in series.itertuples(index=False):
        logger.info("motions %d: median rot %.4g rad, trans %.4g m over %d runs", row.motions,
                    row.median_rot_err_rad, row.median_trans_err_m, row.successful_runs)
    failed = int(np.sum([row["failed"] for row in rows])) if rows else 0
    print(f"Wrote {len(rows)} rows ({failed} failed) to {path} and medians to {medians}")
    return EXIT_OK


def cmd_export_scene(args):
    config = load_run_config(args.config)
    estimate = read_report_transform(args.report) if args.report else None
    model = generate_scene_model(config.scene, estimate=estimate)
    export_model(model, args.out, args.quality)
    print(f"Scene written to {args.out}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="cli.py", description="Markerless camera-to-robot calibration")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="-v for INFO, -vv for DEBUG")
    subparsers = parser.add_subparsers(dest="command", required=True)

    simulate = subparsers.add_parser("simulate", help="Simulate motions and dump trajectories")
    simulate.add_argument("--config", required=True, help="Run configuration YAML")
    simulate.add_argument("--out", required=True, help="Output JSON Lines file")
    simulate.add_argument("--seed", type=int, help="Override run.seed")
    simulate.set_defaults(handler=cmd_simulate)

    calibrate = subparsers.add_parser("calibrate", help="Calibrate live or from a trajectory dump")
    source = calibrate.add_mutually_exclusive_group(required=True)
    source.add_argument("--scene", help="Run configuration YAML, live simulation")
    source.add_argument("--trajectories", help="JSON Lines trajectory dump, replay")
    calibrate.add_argument("--config", help="Run configuration for replay (robot, settings, ground truth)")
    calibrate.add_argument("--report", required=True, help="Output report JSON")
    calibrate.add_argument("--seed", type=int, help="Override run.seed")
    calibrate.set_defaults(handler=cmd_calibrate)

    benchmark = subparsers.add_parser("benchmark", help="Error versus motion count over poses and seeds")
    benchmark.add_argument("--config", required=True, help="Run configuration YAML with a benchmark section")
    benchmark.add_argument("--out", required=True, help="Output CSV (medians go to <out>_median.csv)")
    benchmark.add_argument("--jobs", type=int, default=1, help="Worker processes")
    benchmark.set_defaults(handler=cmd_benchmark)

    export = subparsers.add_parser("export-scene", help="Export the scene as a 3D model")
    export.add_argument("--config", required=True, help="Run configuration YAML")
    export.add_argument("--out", required=True, help=".gltf, .stl or .step file")
    export.add_argument("--report", help="Calibration report whose estimate is drawn as a second camera")
    export.add_argument("--quality", choices=["coarse", "medium", "fine"], default="medium")
    export.set_defaults(handler=cmd_export_scene)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose)
    try:
        return args.handler(args)
    except InvalidInputError as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_INPUT_ERROR


if __name__ == "__main__":
    sys.exit(main())
