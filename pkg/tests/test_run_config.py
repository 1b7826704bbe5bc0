from pathlib import Path

import numpy as np
import pytest

from errors import ConfigError, InvalidInputError
from run_config import build_run_config, load_run_config, normalize_document, parse_yaml

PRESETS = Path(__file__).resolve().parent.parent / "presets"

MINIMAL = """
scene:
  camera:
    intrinsics: {fx: 600.0, fy: 600.0, cx: 320.0, cy: 240.0}
    pose:
      look_at: {eye: [1.5, 0.0, 1.0], target: [0.0, 0.0, 0.4]}
"""


def test_minimal_document_gets_every_default():
    config = build_run_config(parse_yaml(MINIMAL))
    assert config.scene.robot.name == "panda"
    assert len(config.scene.keypoints) > 0
    assert config.scene.noise.pixel_sigma == 0.0
    assert config.planner.delta_min == 0.5
    assert config.pruning.agreement_min == 0.6
    assert config.pruning.support_min == 0.5
    assert config.convergence.window == 5
    assert config.fitting.conic_model == "independent"
    assert np.isclose(config.estimation.dedup_tol, np.radians(2.0))
    assert (config.seed, config.motion_budget, config.frames) == (0, 30, 60)


@pytest.mark.parametrize("name", ["panda_scene", "two_joint_scene", "benchmark"])
def test_presets_load(name):
    config = load_run_config(PRESETS / f"{name}.yaml")
    assert config.source_path.endswith(f"{name}.yaml")


def test_list_of_single_key_sections():
    config = load_run_config(PRESETS / "two_joint_scene.yaml")
    assert config.planner.delta_min == 0.5 and config.planner.delta_max == 1.5
    assert config.seed == 7


def test_estimation_keys_reach_the_ransac_parameters():
    document = parse_yaml(MINIMAL + "estimation: {dedup_tol_deg: 4.0, line_tol: 0.02, ransac_seed: 3}\n")
    config = build_run_config(document)
    assert np.isclose(config.estimation.dedup_tol, np.radians(4.0))
    assert config.estimation.ransac.line_tol == 0.02
    assert config.estimation.ransac.seed == 3


def test_consensus_keys_stay_in_the_estimation_section():
    document = parse_yaml(MINIMAL + "estimation: {consensus_tol_deg: 8.0, refine_axis: false, line_tol: 0.02}\n")
    config = build_run_config(document)
    assert np.isclose(config.estimation.consensus_tol, np.radians(8.0))
    assert config.estimation.refine_axis is False
    assert config.estimation.ransac.line_tol == 0.02


def test_yaml_syntax_error_reports_the_line():
    with pytest.raises(ConfigError, match="line 2"):
        parse_yaml("run:\n  seed: 1: 2\n")


def test_schema_violations_are_all_listed():
    document = parse_yaml(MINIMAL + "planner: {delta_min: -1.0}\nrun: {frames: 1, colour: red}\n")
    with pytest.raises(ConfigError) as excinfo:
        build_run_config(document)
    problems = excinfo.value.problems
    assert any(p.startswith("planner.delta_min") for p in problems)
    assert any(p.startswith("run.frames") for p in problems)
    assert any("colour" in p for p in problems)


def test_missing_scene():
    with pytest.raises(ConfigError):
        build_run_config({"run": {"seed": 1}})


def test_inconsistent_planner_range_becomes_a_config_error():
    document = parse_yaml(MINIMAL + "planner: {delta_min: 1.0, delta_max: 0.5}\n")
    with pytest.raises(ConfigError, match="delta_max"):
        build_run_config(document)


def test_custom_robot_needs_keypoints():
    document = parse_yaml(MINIMAL)
    document["scene"]["robot"] = {"name": "arm", "joints": [{"axis": [0, 0, 1]}]}
    with pytest.raises(ConfigError, match="keypoints"):
        build_run_config(document)


def test_config_error_is_an_input_error():
    assert issubclass(ConfigError, InvalidInputError)


def test_unreadable_file(tmp_path):
    with pytest.raises(ConfigError):
        load_run_config(tmp_path / "missing.yaml")


def test_non_mapping_document():
    with pytest.raises(ConfigError):
        parse_yaml("- 1\n- 2\n")


def test_rotvec_pose_round_trips_through_the_document():
    config = build_run_config(parse_yaml(MINIMAL))
    document = normalize_document(parse_yaml(MINIMAL))
    camera = config.scene.camera_from_base
    document["scene"]["camera"]["pose"] = {"rotvec": [float(v) for v in camera.rotvec()],
                                           "translation": [float(v) for v in camera.translation]}
    again = build_run_config(document)
    assert np.allclose(again.scene.camera_from_base.as_matrix(), config.scene.camera_from_base.as_matrix())


def test_with_seed_and_camera_return_copies():
    config = build_run_config(parse_yaml(MINIMAL))
    other = config.with_seed(9)
    assert other.seed == 9 and config.seed == 0
    assert other.scene is config.scene
