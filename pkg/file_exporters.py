"""
File Exporters Module

Readers and writers for everything the calibration tools put on disk.

Supports:
- Trajectory dumps: JSON Lines, one record per keypoint trajectory (read errors carry line numbers)
- Calibration reports: JSON (the only timestamp lives in `generated_at`)
- Benchmark tables: CSV per run and median-aggregated CSV (pandas)
- Scene models: GLTF / STL / STEP export of build123d compounds, with part labels kept as mesh names

Usage:
    from file_exporters import write_trajectories_jsonl, read_trajectories_jsonl, generate_temp_file

    write_trajectories_jsonl(trajectories, "motions.jsonl")
    trajectories = read_trajectories_jsonl("motions.jsonl")

    model = generate_scene_model(scene)
    gltf_file = generate_temp_file(model, "gltf", "medium")
"""

import base64
import json
import logging
import os
import tempfile
from datetime import datetime, timezone
from enum import Enum

import numpy as np
import pandas as pd

from errors import InvalidInputError, TrajectoryFormatError
from synthetic_scene import KeypointTrajectory

logger = logging.getLogger(__name__)


BENCHMARK_COLUMNS = ["pose_id", "seed", "motions", "rot_err_rad", "trans_err_m", "failed"]
MEDIAN_COLUMNS = ["motions", "median_rot_err_rad", "median_trans_err_m", "successful_runs"]
TRAJECTORY_KEYS = ("motion_id", "keypoint_id", "joint", "sweep", "start_config", "samples")


# Trajectory dumps

def trajectory_to_record(trajectory):
    """JSON-ready record of one KeypointTrajectory."""
    return {
        "motion_id": int(trajectory.motion_id),
        "keypoint_id": int(trajectory.keypoint_id),
        "joint": int(trajectory.joint),
        "sweep": float(trajectory.sweep),
        "start_config": [float(v) for v in trajectory.start_config],
        "samples": [[float(p[0]), float(p[1]), float(d)] for p, d in zip(trajectory.points, trajectory.deltas)],
        "is_outlier": bool(trajectory.is_outlier),
        "forced_spurious": bool(trajectory.forced_spurious),
    }


def record_to_trajectory(record, line_number=None):
    """
    Build a KeypointTrajectory from a parsed record.

    Raises:
        TrajectoryFormatError: Missing keys or malformed samples
    """
    if not isinstance(record, dict):
        raise TrajectoryFormatError("record must be a JSON object", line_number)
    missing = [key for key in TRAJECTORY_KEYS if key not in record]
    if missing:
        raise TrajectoryFormatError(f"missing field(s) {', '.join(missing)}", line_number)
    samples = np.asarray(record["samples"], dtype=float) if record["samples"] else np.zeros((0, 3))
    if samples.ndim != 2 or samples.shape[1] != 3:
        raise TrajectoryFormatError("samples must be a list of [u, v, delta] triples", line_number)
    try:
        return KeypointTrajectory(
            motion_id=int(record["motion_id"]),
            keypoint_id=int(record["keypoint_id"]),
            points=samples[:, :2],
            deltas=samples[:, 2],
            joint=int(record["joint"]),
            sweep=float(record["sweep"]),
            start_config=tuple(record["start_config"]),
            is_outlier=bool(record.get("is_outlier", False)),
            forced_spurious=bool(record.get("forced_spurious", False)),
        )
    except (InvalidInputError, TypeError, ValueError) as e:
        raise TrajectoryFormatError(str(e), line_number) from e


def write_trajectories_jsonl(trajectories, output_path):
    """
    Write trajectories as JSON Lines, in the given order.

    Floats are written with their shortest round-trip representation, so a
    dump read back reproduces the simulated values bit for bit.

    Returns:
        str: output_path
    """
    with open(output_path, "w", encoding="utf-8", newline="\n") as f:
        for trajectory in trajectories:
            f.write(json.dumps(trajectory_to_record(trajectory), separators=(",", ":")) + "\n")
    return output_path


def read_trajectories_jsonl(input_path):
    """
    Read a JSON Lines trajectory dump.

    Blank lines are skipped.

    Returns:
        list: KeypointTrajectory

    Raises:
        TrajectoryFormatError: Unparseable line, with its 1-based line number
    """
    trajectories = []
    try:
        with open(input_path, "r", encoding="utf-8") as f:
            for line_number, line in enumerate(f, start=1):
                if not line.strip():
                    continue
                try:
                    record = json.loads(line)
                except json.JSONDecodeError as e:
                    raise TrajectoryFormatError(f"invalid JSON ({e.msg})", line_number) from e
                trajectories.append(record_to_trajectory(record, line_number))
    except OSError as e:
        raise InvalidInputError(f"cannot read trajectories {input_path}: {e.strerror}") from e
    return trajectories


# Reports

def transform_to_dict(transform):
    return {
        "rotation": [[float(v) for v in row] for row in transform.rotation],
        "rotvec": [float(v) for v in transform.rotvec()],
        "translation": [float(v) for v in transform.translation],
    }


def _optional_float(value):
    return None if value is None else float(value)


def build_report(result, mode, ground_truth=None):
    """
    Calibration report dictionary of a CalibrationResult.

    Args:
        result: CalibrationResult
        mode: "live" or "replay"
        ground_truth: Optional true RigidTransform

    Returns:
        dict: Report matching docs/schemas/calibration_report.schema.json
    """
    from benchmark import compute_error_metrics

    estimate = None
    errors = None
    if result.estimate is not None:
        estimate = {
            "transform": transform_to_dict(result.estimate.transform),
            "residual": float(result.estimate.residual),
            "observation_count": int(result.estimate.observation_count),
            "iteration": int(result.estimate.iteration),
            "stage2_fallback": bool(result.estimate.stage2_fallback),
        }
        if ground_truth is not None:
            metrics = compute_error_metrics(result.estimate.transform, ground_truth)
            errors = {"rotation_error": metrics.rotation_error, "translation_error": metrics.translation_error}

    history = []
    for r in result.records:
        history.append({
            "iteration": r.iteration,
            "motion_id": r.motion_id,
            "joint": r.joint,
            "sweep": _optional_float(r.sweep),
            "accepted": r.accepted,
            "reason": r.reason,
            "raw_count": r.raw_count,
            "stage1_count": r.stage1_count,
            "stage2_count": r.stage2_count,
            "stage2_fallback": r.stage2_fallback,
            "residual": _optional_float(r.residual),
            "rotation_error": _optional_float(r.rotation_error),
            "translation_error": _optional_float(r.translation_error),
        })

    return {
        "generated_at": datetime.now(timezone.utc).isoformat(),
        "mode": mode,
        "converged": bool(result.converged),
        "iterations": len(result.records),
        "estimate": estimate,
        "ground_truth": transform_to_dict(ground_truth) if ground_truth is not None else None,
        "errors": errors,
        "pruning": result.pruning_statistics(),
        "rejections": [{"motion_id": m, "reason": reason} for m, reason in result.rejections],
        "history": history,
    }


def write_report_json(report, output_path):
    with open(output_path, "w", encoding="utf-8") as f:
        json.dump(report, f, indent=2)
    return output_path


def read_report_transform(report_path):
    """Estimated RigidTransform stored in a report, or None."""
    from geometry import RigidTransform

    with open(report_path, "r", encoding="utf-8") as f:
        report = json.load(f)
    estimate = report.get("estimate")
    if not estimate:
        return None
    transform = estimate["transform"]
    return RigidTransform(np.array(transform["rotation"]), np.array(transform["translation"]))


# Benchmark tables

def benchmark_frame(rows):
    """DataFrame with the benchmark columns, in column order."""
    frame = pd.DataFrame(rows, columns=BENCHMARK_COLUMNS)
    return frame.astype({"pose_id": int, "seed": int, "motions": int, "failed": bool})


def median_series(frame):
    """
    Median errors per motion count over successful runs.

    Returns:
        pd.DataFrame: MEDIAN_COLUMNS
    """
    if frame.empty:
        return pd.DataFrame(columns=MEDIAN_COLUMNS)
    ok = frame[~frame["failed"]]
    grouped = ok.groupby("motions")
    series = pd.DataFrame({
        "median_rot_err_rad": grouped["rot_err_rad"].median(),
        "median_trans_err_m": grouped["trans_err_m"].median(),
        "successful_runs": grouped.size(),
    }).reindex(sorted(frame["motions"].unique()))
    series["successful_runs"] = series["successful_runs"].fillna(0).astype(int)
    return series.reset_index().rename(columns={"index": "motions"})[MEDIAN_COLUMNS]


def median_path(output_path):
    root, ext = os.path.splitext(output_path)
    return f"{root}_median{ext or '.csv'}"


def write_benchmark_csv(rows, output_path):
    """
    Write the per-run table and its median series next to it.

    Returns:
        tuple: (per-run path, median path)
    """
    frame = benchmark_frame(rows)
    frame.to_csv(output_path, index=False)
    medians = median_path(output_path)
    median_series(frame).to_csv(medians, index=False)
    return output_path, medians


# Scene models

def prepare_gltf_for_download(gltf_file_path):
    """
    Prepare a GLTF file for download by embedding any external .bin files as base64 data URIs.

    Args:
        gltf_file_path: Path to the GLTF file

    Returns:
        bytes: The modified GLTF JSON as UTF-8 encoded bytes, ready for download
    """
    with open(gltf_file_path, 'r') as f:
        gltf_json = json.load(f)

    gltf_dir = os.path.dirname(gltf_file_path)
    for buffer in gltf_json.get('buffers', []):
        if 'uri' in buffer and buffer['uri'].endswith('.bin'):
            bin_file_path = os.path.join(gltf_dir, buffer['uri'])
            if os.path.exists(bin_file_path):
                with open(bin_file_path, 'rb') as bin_file:
                    bin_base64 = base64.b64encode(bin_file.read()).decode('utf-8')
                buffer['uri'] = f"data:application/octet-stream;base64,{bin_base64}"

    return json.dumps(gltf_json, indent=2).encode('utf-8')


class Tessellation(Enum):
    """Tessellation quality levels for mesh export (millimetres)"""
    COARSE = 0.5
    MEDIUM = 0.1
    FINE = 0.01


def _collect_part_labels(model):
    """
    Labels of the parts that become meshes, in export order.

    Args:
        model: build123d Compound

    Returns:
        list: Labels of leaf parts
    """
    from anytree import PreOrderIter
    from build123d import Compound

    labels = []
    for node in PreOrderIter(model):
        if isinstance(node, Compound) and node.children:
            continue
        if hasattr(node, 'wrapped') and node.wrapped is not None:
            labels.append(node.label or '')
    return labels


def _postprocess_gltf_with_labels(gltf_path, labels):
    """
    Write part labels into mesh and node names of an exported GLTF.

    The viewer reads the node name to pick a material.
    """
    with open(gltf_path, 'r') as f:
        gltf = json.load(f)

    for i, mesh in enumerate(gltf.get('meshes', [])):
        if i < len(labels) and labels[i]:
            mesh['name'] = labels[i]
    for node in gltf.get('nodes', []):
        mesh_idx = node.get('mesh')
        if mesh_idx is not None and mesh_idx < len(labels) and labels[mesh_idx]:
            node['name'] = labels[mesh_idx]

    with open(gltf_path, 'w') as f:
        json.dump(gltf, f)


def export_model(model, output_path, quality="medium"):
    """
    Export a build123d model to the format given by the file extension.

    Args:
        model: build123d Compound
        output_path: .gltf, .stl or .step path
        quality: "coarse", "medium", or "fine"

    Returns:
        str: output_path
    """
    from build123d import export_gltf, export_step, export_stl

    tolerance = Tessellation[quality.upper()].value
    ext = os.path.splitext(output_path)[1].lower()
    if ext == ".gltf":
        labels = _collect_part_labels(model)
        export_gltf(model, output_path, linear_deflection=tolerance, angular_deflection=0.1)
        _postprocess_gltf_with_labels(output_path, labels)
    elif ext == ".stl":
        export_stl(model, output_path, tolerance=tolerance, angular_tolerance=0.1)
    elif ext in (".step", ".stp"):
        export_step(model, output_path)
    else:
        raise InvalidInputError(f"Unsupported file format: {ext or output_path}")
    return output_path


def generate_temp_file(model, file_format, quality="medium"):
    """
    Export a model into a temporary file.

    Args:
        model: build123d Compound
        file_format: "gltf", "stl", or "step"
        quality: "coarse", "medium", or "fine"

    Returns:
        str: Path to the generated temporary file
    """
    with tempfile.NamedTemporaryFile(delete=False, suffix=f".{file_format.lower()}") as tmpfile:
        path = tmpfile.name
    try:
        return export_model(model, path, quality)
    except InvalidInputError:
        raise
    except Exception as e:
        if file_format.lower() != "gltf":
            raise
        logger.warning("GLTF export failed (%s), using STL format", e)
        with tempfile.NamedTemporaryFile(delete=False, suffix=".stl") as stl_tmpfile:
            return export_model(model, stl_tmpfile.name, quality)
