"""
Run Configuration Module

Loads and validates the YAML run configuration and builds the runtime objects.

Features:
- YAML parsing (PyYAML safe_load) with line numbers on syntax errors
- Sections in mapping form or list-of-single-key-dicts form
- jsonschema validation against docs/schemas/run_config.schema.json, listing every violation
- Module defaults overlaid with the user's values (utils.merge_parameter_dicts)
- Scene construction: robot, camera pose (look_at or rotation vector), intrinsics, keypoints, noise

Usage:
    from run_config import load_run_config

    config = load_run_config("presets/panda_scene.yaml")
    source = SimulatedSource(config.scene, config.planner, seed=config.seed, frames=config.frames)
"""

import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

import jsonschema
import yaml

import calibrator
import motion_estimation
import motion_planner
import pattern_fitting
import robot_model
import synthetic_scene
from calibrator import ConvergenceConfig, PruningConfig
from errors import ConfigError, InvalidInputError
from geometry import CameraIntrinsics, RigidTransform, look_at
from motion_estimation import EstimationParams
from motion_planner import PlannerParams
from pattern_fitting import FittingParams
from robot_model import RobotModel
from synthetic_scene import NoiseSpec, SceneDefinition, keypoints_from_groups
from utils import DotDict, flatten_parameters, merge_parameter_dicts

logger = logging.getLogger(__name__)


SCHEMA_DIR = Path(__file__).resolve().parent / "docs" / "schemas"
RUN_CONFIG_SCHEMA = SCHEMA_DIR / "run_config.schema.json"

FLAT_SECTIONS = ("planner", "estimation", "fitting", "pruning", "convergence", "run", "benchmark")
ESTIMATION_KEYS = ("dedup_tol_deg", "consensus_tol_deg", "refine_axis")


def get_default_parameters():
    """
    Default run settings.

    Returns:
        dict: Sectioned parameter dictionary
    """
    return {
        "Run": [
            {"seed": 0},
            {"motion_budget": 30},
            {"frames": 60},
            {"max_iterations": 60},
            {"max_planning_failures": 5},
            {"stop_on_convergence": True},
        ],
        "Benchmark": [
            {"poses": 10},
            {"seeds": [0, 1, 2, 3, 4]},
            {"motion_counts": list(range(3, 26, 2))},
            {"pose_seed": 0},
        ],
    }


def load_schema(name):
    with open(SCHEMA_DIR / name, encoding="utf-8") as f:
        return json.load(f)


@dataclass(frozen=True, eq=False)
class RunConfig:
    """
    Everything one run needs.

    Attributes:
        scene: SceneDefinition (robot, ground-truth camera, keypoints, noise)
        planner, estimation, fitting, pruning, convergence: stage parameters
        seed, motion_budget, frames, max_iterations, max_planning_failures, stop_on_convergence: loop settings
        benchmark: dict with poses (int or list of pose mappings), seeds, motion_counts, pose_seed
        source_path: File the configuration came from
    """
    scene: SceneDefinition
    planner: PlannerParams = field(default_factory=PlannerParams)
    estimation: EstimationParams = field(default_factory=EstimationParams)
    fitting: FittingParams = field(default_factory=FittingParams)
    pruning: PruningConfig = field(default_factory=PruningConfig)
    convergence: ConvergenceConfig = field(default_factory=ConvergenceConfig)
    seed: int = 0
    motion_budget: int = 30
    frames: int = 60
    max_iterations: int = 60
    max_planning_failures: int = 5
    stop_on_convergence: bool = True
    benchmark: dict = field(default_factory=dict)
    source_path: str = None

    def with_seed(self, seed):
        return replace(self, seed=int(seed))

    def with_camera(self, camera_from_base):
        return replace(self, scene=self.scene.with_camera(camera_from_base))


def _as_mapping(section, name):
    """Accept a mapping or a list of single-key mappings."""
    if section is None:
        return {}
    if isinstance(section, dict):
        return section
    if isinstance(section, list) and all(isinstance(item, dict) for item in section):
        merged = {}
        for item in section:
            merged.update(item)
        return merged
    raise ConfigError("configuration is invalid", [f"{name}: expected a mapping or a list of single-key mappings"])


def parse_yaml(text, source="<string>"):
    try:
        document = yaml.safe_load(text)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        where = f"line {mark.line + 1}" if mark is not None else source
        raise ConfigError(f"{source}: YAML syntax error", [f"{where}: {getattr(e, 'problem', e)}"]) from e
    if document is None:
        document = {}
    if not isinstance(document, dict):
        raise ConfigError(f"{source}: configuration must be a mapping")
    return document


def normalize_document(document):
    """Return a copy with flat sections (and scene sub-sections) in mapping form."""
    doc = dict(document)
    for name in FLAT_SECTIONS:
        if name in doc:
            doc[name] = _as_mapping(doc[name], name)
    if isinstance(doc.get("scene"), (dict, list)):
        scene = dict(_as_mapping(doc["scene"], "scene"))
        for name in ("noise", "camera"):
            if name in scene:
                scene[name] = _as_mapping(scene[name], f"scene.{name}")
        doc["scene"] = scene
    return doc


def validate_document(document, schema=None):
    """
    Validate a normalized configuration document.

    Raises:
        ConfigError: Listing every violation as "path: message"
    """
    schema = schema or load_schema("run_config.schema.json")
    validator = jsonschema.Draft7Validator(schema)
    problems = []
    for error in sorted(validator.iter_errors(document), key=lambda e: list(e.absolute_path)):
        path = ".".join(str(p) for p in error.absolute_path) or "<root>"
        problems.append(f"{path}: {error.message}")
    if problems:
        raise ConfigError("configuration is invalid", problems)


def _section(defaults, section_name, user_values):
    return merge_parameter_dicts({section_name: defaults[section_name]}, {section_name: user_values or {}})


def build_camera_pose(pose):
    """
    Camera-from-base transform from a pose mapping.

    Accepts {"look_at": {"eye", "target", "up"}} or {"rotvec", "translation"}.
    """
    if "look_at" in pose:
        spec = pose["look_at"]
        return look_at(spec["eye"], spec["target"], spec.get("up", (0.0, 0.0, 1.0)))
    return RigidTransform.from_rotvec(pose["rotvec"], pose["translation"])


def build_scene(scene_doc):
    robot_spec = scene_doc.get("robot", DotDict(robot_model.get_default_parameters()).robot)
    robot = RobotModel.from_dict(robot_spec)

    camera = scene_doc["camera"]
    intrinsics = CameraIntrinsics(**camera["intrinsics"])
    camera_from_base = build_camera_pose(camera["pose"])

    groups = scene_doc.get("keypoints")
    if groups is None:
        name = robot_spec if isinstance(robot_spec, str) else robot.name
        groups = {"panda": synthetic_scene.PANDA_KEYPOINTS,
                  "two_joint": synthetic_scene.TWO_JOINT_KEYPOINTS}.get(name)
        if groups is None:
            raise ConfigError("configuration is invalid", ["scene.keypoints: required for a custom robot"])

    noise_parameters = _section(synthetic_scene.get_default_parameters(), "Noise", scene_doc.get("noise"))
    noise = NoiseSpec.from_parameters(noise_parameters)
    return SceneDefinition(
        robot=robot,
        camera_from_base=camera_from_base,
        intrinsics=intrinsics,
        keypoints=keypoints_from_groups(groups),
        noise=noise,
        clip_to_image=bool(camera.get("clip_to_image", False)),
    )


def build_run_config(document, source_path=None):
    """
    Validate a parsed document and build the RunConfig.

    Raises:
        ConfigError: Schema violations or inconsistent values
    """
    doc = normalize_document(document)
    validate_document(doc)
    try:
        scene = build_scene(doc["scene"])
        run = flatten_parameters(_section(get_default_parameters(), "Run", doc.get("run")))
        benchmark = flatten_parameters(_section(get_default_parameters(), "Benchmark", doc.get("benchmark")))
        estimation_sections = merge_parameter_dicts(
            motion_estimation.get_default_parameters(),
            {"Estimation": {k: v for k, v in doc.get("estimation", {}).items() if k in ESTIMATION_KEYS},
             "Ransac": {k: v for k, v in doc.get("estimation", {}).items() if k not in ESTIMATION_KEYS}},
        )
        config = RunConfig(
            scene=scene,
            planner=PlannerParams.from_parameters(
                _section(motion_planner.get_default_parameters(), "Planner", doc.get("planner"))),
            estimation=EstimationParams.from_parameters(estimation_sections),
            fitting=FittingParams.from_parameters(
                _section(pattern_fitting.get_default_parameters(), "Fitting", doc.get("fitting"))),
            pruning=PruningConfig.from_parameters(
                _section(calibrator.get_default_parameters(), "Pruning", doc.get("pruning"))),
            convergence=ConvergenceConfig.from_parameters(
                _section(calibrator.get_default_parameters(), "Convergence", doc.get("convergence"))),
            seed=int(run["seed"]),
            motion_budget=int(run["motion_budget"]),
            frames=int(run["frames"]),
            max_iterations=int(run["max_iterations"]),
            max_planning_failures=int(run["max_planning_failures"]),
            stop_on_convergence=bool(run["stop_on_convergence"]),
            benchmark=benchmark,
            source_path=str(source_path) if source_path else None,
        )
    except ConfigError:
        raise
    except InvalidInputError as e:
        raise ConfigError("configuration is invalid", [str(e)]) from e
    logger.debug("Run configuration loaded from %s", source_path or "<document>")
    return config


def load_run_config(path):
    """
    Read, validate and build a run configuration file.

    Args:
        path: YAML file

    Returns:
        RunConfig

    Raises:
        ConfigError: Unreadable file, YAML syntax error or schema violation
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read configuration {path}: {e.strerror}") from e
    return build_run_config(parse_yaml(text, str(path)), source_path=path)
