import json
from collections import Counter

import pytest

from file_exporters import export_model
from geometry import look_at
from scene_model import generate_scene_model


def labels(model):
    return Counter(part.label for part in model.children)


def test_every_part_is_labelled(panda_scene):
    counts = labels(generate_scene_model(panda_scene))
    assert set(counts) == {"material:metal", "material:joint", "material:keypoint", "material:camera"}
    assert counts["material:joint"] == panda_scene.robot.dof
    assert counts["material:keypoint"] == len(panda_scene.keypoints)
    assert counts["material:camera"] == 2


def test_estimate_is_drawn_as_a_second_camera(panda_scene):
    estimate = look_at((1.5, 0.7, 1.0), (0.0, 0.0, 0.4))
    counts = labels(generate_scene_model(panda_scene, estimate=estimate))
    assert counts["material:estimate"] == 2


@pytest.mark.slow
def test_gltf_nodes_carry_the_labels(panda_scene, tmp_path):
    path = export_model(generate_scene_model(panda_scene), str(tmp_path / "scene.gltf"), "coarse")
    with open(path, encoding="utf-8") as f:
        gltf = json.load(f)
    names = {node.get("name") for node in gltf["nodes"] if "mesh" in node}
    assert "material:camera" in names
    assert "material:keypoint" in names
