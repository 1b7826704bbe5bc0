from run_config import build_run_config, parse_yaml
from streamlit_app import apply_overrides, get_builtin_presets


def test_every_preset_is_offered():
    assert {"panda_scene", "two_joint_scene", "benchmark"} <= set(get_builtin_presets())


def test_sidebar_values_override_the_preset():
    preset = get_builtin_presets()["two_joint_scene"].read_text(encoding="utf-8")
    overrides = {"noise": {"pixel_sigma": 0.5}, "planner": {"delta_max": 1.2}, "run": {"seed": 4}}
    config = build_run_config(apply_overrides(parse_yaml(preset), overrides))
    assert config.scene.noise.pixel_sigma == 0.5
    assert config.planner.delta_min == 0.5 and config.planner.delta_max == 1.2
    assert config.seed == 4 and config.motion_budget == 3
