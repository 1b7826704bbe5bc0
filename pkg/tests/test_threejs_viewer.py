import base64
import json

from threejs_viewer import SCENE_MATERIALS, create_threejs_gltf_viewer, embed_gltf


def write_gltf(tmp_path):
    (tmp_path / "scene.bin").write_bytes(b"\x00\x01\x02\x03")
    gltf = {"asset": {"version": "2.0"}, "buffers": [{"uri": "scene.bin", "byteLength": 4}],
            "nodes": [{"mesh": 0, "name": "material:camera"}], "meshes": [{"name": "material:camera"}]}
    path = tmp_path / "scene.gltf"
    path.write_text(json.dumps(gltf), encoding="utf-8")
    return str(path)


def test_external_buffers_are_inlined(tmp_path):
    gltf = json.loads(base64.b64decode(embed_gltf(write_gltf(tmp_path))))
    uri = gltf["buffers"][0]["uri"]
    assert uri.startswith("data:application/octet-stream;base64,")
    assert base64.b64decode(uri.split(",", 1)[1]) == b"\x00\x01\x02\x03"


def test_viewer_page_carries_the_scene_materials(tmp_path):
    html = create_threejs_gltf_viewer(write_gltf(tmp_path), height=420)
    assert "420px" in html
    assert json.dumps(SCENE_MATERIALS) in html
    assert embed_gltf(write_gltf(tmp_path)) in html
