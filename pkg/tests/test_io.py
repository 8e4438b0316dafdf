import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bevdet import io
from bevdet.boxes import Box3D
from bevdet.checks import SMALL_SCENE, random_box
from bevdet.errors import SchemaError
from bevdet.scenegen import generate_scene


@pytest.mark.parametrize("dtype", [np.uint8, np.float32, np.float64, np.int64])
def test_array_roundtrip(dtype):
    a = (np.random.default_rng(0).random((3, 5, 2)) * 100).astype(dtype)
    b = io.decode_array(json.loads(json.dumps(io.encode_array(a))))
    assert b.dtype == a.dtype and np.array_equal(a, b)


def test_array_bad_encoding():
    d = io.encode_array(np.zeros(3))
    d["encoding"] = "hex"
    with pytest.raises(SchemaError):
        io.decode_array(d)


def test_array_truncated():
    d = io.encode_array(np.zeros(3))
    d["shape"] = [4]
    with pytest.raises(SchemaError):
        io.decode_array(d)


def test_scene_roundtrip(tmp_path):
    s = generate_scene(SMALL_SCENE, 5, sample_id="x1")
    path = io.save_scene(tmp_path / "s.json", s)
    t = io.load_scene(path)
    assert t.sample_id == "x1" and t.seed == 5 and t.boxes == s.boxes and t.visible_pixels == s.visible_pixels
    for a, b in zip(s.cameras, t.cameras):
        assert np.array_equal(a.image, b.image) and np.array_equal(a.depth, b.depth)
        assert np.array_equal(a.intrinsics.matrix, b.intrinsics.matrix)
        assert np.array_equal(a.pose.rotation, b.pose.rotation) and np.array_equal(a.pose.translation, b.pose.translation)
        assert a.camera.image_size == b.camera.image_size


def test_scene_layout(tmp_path):
    s = generate_scene(SMALL_SCENE, 5)
    doc = json.loads(io.save_scene(tmp_path / "s.json", s).read_text())
    cam = doc["cameras"][0]
    assert doc["format_version"] == io.FORMAT_VERSION and doc["kind"] == "scene"
    assert len(cam["intrinsics"]) == 9 and len(cam["rotation"]) == 9 and len(cam["translation"]) == 3
    assert cam["image"]["shape"] == [176, 320, 3] and cam["image"]["dtype"] == "|u1"


def test_version_mismatch(tmp_path):
    s = generate_scene(SMALL_SCENE, 5)
    doc = io.scene_to_dict(s)
    doc["format_version"] = 99
    io.write_json(tmp_path / "s.json", doc)
    with pytest.raises(SchemaError, match="format_version"):
        io.load_scene(tmp_path / "s.json")


def test_kind_mismatch(tmp_path):
    io.save_boxes(tmp_path / "d.json", {"a": []}, kind="detections")
    with pytest.raises(SchemaError, match="kind"):
        io.load_boxes(tmp_path / "d.json", kind="ground_truth")


def test_not_json(tmp_path):
    (tmp_path / "x.json").write_text("{nope")
    with pytest.raises(SchemaError):
        io.read_json(tmp_path / "x.json")


def test_unwritable_path_named(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    with pytest.raises(OSError, match="file"):
        io.write_json(blocker / "sub" / "x.json", {})


def test_missing_file_named(tmp_path):
    with pytest.raises(OSError, match="absent.json"):
        io.read_json(tmp_path / "absent.json")


@given(st.integers(0, 2**32 - 1))
def test_boxes_roundtrip_exact(seed):
    rng = np.random.default_rng(seed)
    res = {f"s{k}": [random_box(rng) for _ in range(int(rng.integers(0, 4)))] for k in range(3)}
    back = io.boxes_from_dict(json.loads(io.dumps(io.boxes_to_dict(res))))
    assert back == res


def test_manifest(tmp_path):
    f = tmp_path / "a.json"
    io.write_json(f, {"x": 1})
    m = io.make_manifest("abc", 3, [f], tmp_path, {"n_samples": 1})
    io.write_json(tmp_path / "manifest.json", m)
    loaded = io.load_manifest(tmp_path / "manifest.json")
    assert loaded["files"] == [{"path": "a.json", "sha256": io.file_sha256(f)}]
    assert io.manifest_hash(loaded) == io.manifest_hash(m)


def test_indicator_rows(tmp_path):
    io.write_json(tmp_path / "r.json", [{"name": "x", "mAP": 0.1, "mATE": 1, "mASE": 1, "mAOE": 1, "mAVE": 1, "mAAE": 1}])
    assert io.load_indicator_rows(tmp_path / "r.json")[0]["name"] == "x"
    io.write_json(tmp_path / "bad.json", {"rows": [{"mAP": 0.1}]})
    with pytest.raises(SchemaError, match="mATE"):
        io.load_indicator_rows(tmp_path / "bad.json")


def test_nan_refused():
    with pytest.raises(ValueError):
        io.dumps({"x": float("nan")})
