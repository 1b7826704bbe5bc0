"""
Streamlit Calibration Explorer App

Interactive front end for the markerless camera-to-robot calibration loop:
- Preset selector (any YAML run configuration in presets/)
- Tracker noise, planner and run controls in the left sidebar
- Per-iteration error curves and the pruning statistics
- Final camera-from-base transform against the ground truth
- 3D view of the robot, the keypoints, the true camera and the estimated camera
- Downloads: calibration report (JSON) and scene (GLTF)

Usage:
    streamlit run streamlit_app.py
"""

import json
import logging
from pathlib import Path

import pandas as pd
import streamlit as st
import streamlit.components.v1 as components

import motion_planner
import synthetic_scene
from calibrator import SimulatedSource, calibrate_loop
from errors import CalibrationError
from file_exporters import build_report, generate_temp_file, prepare_gltf_for_download
from run_config import build_run_config, normalize_document, parse_yaml
from scene_model import generate_scene_model
from threejs_viewer import create_threejs_gltf_viewer
from utils import DotDict

logger = logging.getLogger(__name__)


PRESET_DIR = Path(__file__).resolve().parent / "presets"

# Cache version - increment to invalidate cache when the loop or the export changes
_CACHE_VERSION = 3  # v3: estimated camera drawn in the scene


def get_builtin_presets():
    """Named presets shipped with the app: every YAML file in presets/."""
    return {path.stem: path for path in sorted(PRESET_DIR.glob("*.yaml"))}


def apply_overrides(document, overrides):
    """
    Copy of a run configuration document with sidebar values written over it.

    Args:
        document: Parsed YAML document
        overrides: {"noise": {...}, "planner": {...}, "run": {...}}

    Returns:
        dict: Normalized document
    """
    doc = normalize_document(document)
    scene = dict(doc.get("scene", {}))
    scene["noise"] = {**scene.get("noise", {}), **overrides.get("noise", {})}
    doc["scene"] = scene
    for name in ("planner", "run"):
        doc[name] = {**doc.get(name, {}), **overrides.get(name, {})}
    return doc


@st.cache_data
def run_calibration_cached(preset_text, overrides, tessellation, _cache_version=_CACHE_VERSION):
    """
    Cached live calibration run and scene export.

    Args:
        preset_text: YAML text of the selected preset
        overrides: Sidebar values (see apply_overrides)
        tessellation: GLTF quality
        _cache_version: Forces cache invalidation when version changes

    Returns:
        tuple: (report dict, GLTF file path)
    """
    config = build_run_config(apply_overrides(parse_yaml(preset_text), overrides))
    source = SimulatedSource(config.scene, config.planner, seed=config.seed, frames=config.frames)
    result = calibrate_loop(
        source,
        config.scene.robot,
        estimation_params=config.estimation,
        fitting_params=config.fitting,
        pruning=config.pruning,
        convergence=config.convergence,
        max_iterations=config.max_iterations,
        ground_truth=config.scene.camera_from_base,
        stop_on_convergence=config.stop_on_convergence,
        max_planning_failures=config.max_planning_failures,
    )
    report = build_report(result, "live", config.scene.camera_from_base)
    estimate = result.estimate.transform if result.estimate is not None else None
    model = generate_scene_model(config.scene, estimate=estimate)
    return report, generate_temp_file(model, "gltf", tessellation)


def sidebar_controls():
    """Sidebar widgets. Returns (preset name, overrides, tessellation)."""
    noise = DotDict(synthetic_scene.get_default_parameters())
    planner = DotDict(motion_planner.get_default_parameters())

    with st.sidebar:
        st.title("Calibration Explorer")

        presets = get_builtin_presets()
        preset_name = st.selectbox("Preset", list(presets.keys()),
                                   index=list(presets.keys()).index("panda_scene") if "panda_scene" in presets else 0,
                                   help="Scene and run configuration")

        with st.expander("Tracker noise", expanded=True):
            pixel_sigma = st.slider("Pixel noise σ (px)", 0.0, 3.0, float(noise.pixel_sigma), 0.1)
            dropout_prob = st.slider("Track dropout per frame", 0.0, 0.05, float(noise.dropout_prob), 0.001,
                                     format="%.3f")
            outlier_prob = st.slider("Drifting trajectories", 0.0, 0.5, float(noise.outlier_prob), 0.05)
            spurious_prob = st.slider("Spurious-axis motions", 0.0, 0.5, float(noise.spurious_axis_prob), 0.05)

        with st.expander("Exploratory motions", expanded=False):
            delta_min, delta_max = st.slider("Sweep range (rad)", 0.1, 3.0,
                                             (float(planner.delta_min), float(planner.delta_max)), 0.05)

        with st.expander("Run", expanded=False):
            seed = st.number_input("Seed", min_value=0, value=0, step=1)
            max_iterations = st.slider("Motion budget", 3, 60, 30)
            stop_on_convergence = st.checkbox("Stop on convergence", value=True)

        quality = st.selectbox("3D quality", ["coarse", "medium", "fine"], index=0)

    overrides = {
        "noise": {"pixel_sigma": pixel_sigma, "dropout_prob": dropout_prob,
                  "outlier_prob": outlier_prob, "spurious_axis_prob": spurious_prob},
        "planner": {"delta_min": delta_min, "delta_max": delta_max},
        "run": {"seed": int(seed), "max_iterations": int(max_iterations), "motion_budget": int(max_iterations),
                "stop_on_convergence": stop_on_convergence},
    }
    return presets[preset_name], overrides, quality


def show_transform(report):
    estimate = report["estimate"]
    col_est, col_true = st.columns(2)
    with col_est:
        st.markdown("**Estimated camera-from-base**")
        st.dataframe(pd.DataFrame({
            "rotvec (rad)": estimate["transform"]["rotvec"],
            "translation (m)": estimate["transform"]["translation"],
        }, index=["x", "y", "z"]), use_container_width=True)
    with col_true:
        st.markdown("**Ground truth**")
        truth = report["ground_truth"]
        st.dataframe(pd.DataFrame({
            "rotvec (rad)": truth["rotvec"],
            "translation (m)": truth["translation"],
        }, index=["x", "y", "z"]), use_container_width=True)


def main():
    """Main Streamlit application"""

    st.set_page_config(
        layout='wide',
        page_title='Calibration Explorer',
        initial_sidebar_state='expanded'
    )

    preset_path, overrides, quality = sidebar_controls()

    try:
        report, gltf_path = run_calibration_cached(preset_path.read_text(encoding="utf-8"), overrides, quality)
    except CalibrationError as e:
        st.error(f"Calibration failed: {e}")
        return

    col1, col2, col3, col4 = st.columns(4)
    col1.metric("Status", "Converged" if report["converged"] else "Not converged")
    col2.metric("Iterations", report["iterations"])
    if report["errors"]:
        col3.metric("Rotation error", f"{report['errors']['rotation_error']:.2e} rad")
        col4.metric("Translation error", f"{report['errors']['translation_error'] * 1000:.2f} mm")

    tab_curves, tab_3d, tab_pruning = st.tabs(["Error Curves", "3D View", "Observations"])

    with tab_curves:
        history = pd.DataFrame(report["history"]).set_index("iteration")
        if history["rotation_error"].notna().any():
            st.subheader("Rotation error (rad)")
            st.line_chart(history["rotation_error"])
            st.subheader("Translation error (m)")
            st.line_chart(history["translation_error"])
            st.subheader("Constraint residual")
            st.line_chart(history["residual"])
        else:
            st.info("No estimate yet: fewer than three usable observations.")
        if report["estimate"]:
            show_transform(report)

    with tab_3d:
        try:
            viewer_html = create_threejs_gltf_viewer(gltf_file_path=gltf_path, height=600)
            components.html(viewer_html, height=620, scrolling=False)
        except Exception as e:
            st.error(f"Failed to create 3D viewer: {str(e)}")

    with tab_pruning:
        st.subheader("Pruning statistics")
        st.dataframe(pd.DataFrame([report["pruning"]]), use_container_width=True)
        st.subheader("Per-iteration record")
        st.dataframe(history[["motion_id", "joint", "sweep", "accepted", "reason", "raw_count",
                              "stage1_count", "stage2_count", "stage2_fallback"]],
                     use_container_width=True)

    st.subheader("Download Files")
    download_col1, download_col2 = st.columns(2)
    with download_col1:
        st.download_button(
            label="Download report (JSON)",
            data=json.dumps(report, indent=2),
            file_name=f"calibration_{preset_path.stem}.json",
            mime="application/json",
        )
    with download_col2:
        try:
            st.download_button(
                label="Download scene (GLTF)",
                data=prepare_gltf_for_download(gltf_path),
                file_name=f"calibration_{preset_path.stem}.gltf",
                mime="model/gltf+json",
                help="Robot, keypoints and cameras for web viewers",
            )
        except OSError:
            st.error("GLTF file not available")


if __name__ == "__main__":
    main()
