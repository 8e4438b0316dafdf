"""Versioned JSON files: scenes, detection/ground-truth sets, manifests, indicator rows."""

from __future__ import annotations

import base64
import hashlib
import json
import zlib
from pathlib import Path
from typing import Any, Mapping, Sequence, Union

import numpy as np

from .boxes import Box3D
from .errors import SchemaError
from .geometry import CameraIntrinsics, Pose3D
from .scenegen import Camera, SceneCamera, SceneSample

FORMAT_VERSION = 1
PathLike = Union[str, Path]


def encode_array(a: np.ndarray) -> dict[str, Any]:
    """Row-major array as zlib-compressed base64 with dtype and shape."""
    a = np.ascontiguousarray(a)
    return {
        "dtype": a.dtype.str,
        "shape": list(a.shape),
        "encoding": "base64",
        "compression": "zlib",
        "data": base64.b64encode(zlib.compress(a.tobytes(order="C"), 6)).decode("ascii"),
    }


def decode_array(d: Mapping[str, Any]) -> np.ndarray:
    try:
        if d["encoding"] != "base64":
            raise SchemaError(f"unsupported array encoding {d['encoding']!r}")
        raw = base64.b64decode(d["data"])
        if d.get("compression") == "zlib":
            raw = zlib.decompress(raw)
        elif d.get("compression") not in (None, "none"):
            raise SchemaError(f"unsupported array compression {d['compression']!r}")
        return np.frombuffer(raw, dtype=np.dtype(d["dtype"])).reshape(d["shape"]).copy()
    except (KeyError, ValueError, zlib.error) as e:
        if isinstance(e, SchemaError):
            raise
        raise SchemaError(f"malformed array record: {e}") from e


def dumps(obj: Any) -> str:
    # float repr is the shortest string that round-trips exactly
    return json.dumps(obj, sort_keys=True, indent=1, allow_nan=False)


def write_json(path: PathLike, obj: Any) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(dumps(obj) + "\n")
    except OSError as e:
        raise OSError(f"cannot write {path}: {e.strerror or e}") from e
    return path


def read_json(path: PathLike) -> Any:
    path = Path(path)
    try:
        return json.loads(path.read_text())
    except OSError as e:
        raise OSError(f"cannot read {path}: {e.strerror or e}") from e
    except json.JSONDecodeError as e:
        raise SchemaError(f"{path} is not valid JSON: {e}") from e


def _check_version(doc: Any, kind: str, where: str = "") -> None:
    if not isinstance(doc, Mapping):
        raise SchemaError(f"{where or kind}: expected a JSON object")
    v = doc.get("format_version")
    if v != FORMAT_VERSION:
        raise SchemaError(f"{where or kind}: format_version {v!r} is not supported (expected {FORMAT_VERSION})")
    if doc.get("kind") != kind:
        raise SchemaError(f"{where or kind}: expected kind {kind!r}, got {doc.get('kind')!r}")


# -- scenes -----------------------------------------------------------------


def scene_to_dict(scene: SceneSample) -> dict[str, Any]:
    cams = []
    for sc in scene.cameras:
        cams.append(
            {
                "intrinsics": sc.intrinsics.matrix.reshape(-1).tolist(),
                "rotation": sc.pose.rotation.reshape(-1).tolist(),
                "translation": sc.pose.translation.tolist(),
                "image_size": list(sc.camera.image_size),
                "image": encode_array(sc.image),
                "depth": encode_array(sc.depth),
            }
        )
    return {
        "format_version": FORMAT_VERSION,
        "kind": "scene",
        "sample_id": scene.sample_id,
        "seed": scene.seed,
        "cameras": cams,
        "boxes": [b.to_dict() for b in scene.boxes],
        "visible_pixels": list(scene.visible_pixels),
    }


def scene_from_dict(doc: Mapping[str, Any], where: str = "") -> SceneSample:
    _check_version(doc, "scene", where)
    try:
        cams = []
        for c in doc["cameras"]:
            K = CameraIntrinsics(np.asarray(c["intrinsics"], dtype=np.float64).reshape(3, 3))
            pose = Pose3D(np.asarray(c["rotation"], dtype=np.float64).reshape(3, 3), np.asarray(c["translation"], dtype=np.float64))
            cam = Camera(K, pose, tuple(c["image_size"]))
            cams.append(SceneCamera(cam, decode_array(c["image"]), decode_array(c["depth"])))
        boxes = [Box3D.from_dict(b) for b in doc["boxes"]]
        return SceneSample(cams, boxes, str(doc["sample_id"]), int(doc["seed"]), list(doc.get("visible_pixels", [])))
    except KeyError as e:
        raise SchemaError(f"{where or 'scene'}: missing field {e}") from e


def save_scene(path: PathLike, scene: SceneSample) -> Path:
    return write_json(path, scene_to_dict(scene))


def load_scene(path: PathLike) -> SceneSample:
    return scene_from_dict(read_json(path), str(path))


# -- detection / ground-truth sets ---------------------------------------------


def boxes_to_dict(results: Mapping[str, Sequence[Box3D]], kind: str = "detections") -> dict[str, Any]:
    return {
        "format_version": FORMAT_VERSION,
        "kind": kind,
        "results": {sid: [b.to_dict() for b in boxes] for sid, boxes in sorted(results.items())},
    }


def boxes_from_dict(doc: Mapping[str, Any], kind: str = "detections", where: str = "") -> dict[str, list[Box3D]]:
    _check_version(doc, kind, where)
    try:
        return {str(sid): [Box3D.from_dict(b) for b in boxes] for sid, boxes in doc["results"].items()}
    except (KeyError, TypeError) as e:
        raise SchemaError(f"{where or kind}: malformed results: {e}") from e


def save_boxes(path: PathLike, results: Mapping[str, Sequence[Box3D]], kind: str = "detections") -> Path:
    return write_json(path, boxes_to_dict(results, kind))


def load_boxes(path: PathLike, kind: str = "detections") -> dict[str, list[Box3D]]:
    return boxes_from_dict(read_json(path), kind, str(path))


# -- manifests --------------------------------------------------------------


def file_sha256(path: PathLike) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def make_manifest(config_hash: str, seed: int, files: Sequence[Path], root: Path, extra: Mapping[str, Any] = ()) -> dict[str, Any]:
    return {
        "format_version": FORMAT_VERSION,
        "kind": "manifest",
        "config_hash": config_hash,
        "seed": seed,
        "files": [{"path": str(Path(f).relative_to(root)), "sha256": file_sha256(f)} for f in files],
        **dict(extra),
    }


def manifest_hash(manifest: Mapping[str, Any]) -> str:
    return hashlib.sha256(dumps(manifest).encode()).hexdigest()


def load_manifest(path: PathLike) -> dict[str, Any]:
    doc = read_json(path)
    _check_version(doc, "manifest", str(path))
    return doc


# -- precomputed indicator rows ---------------------------------------------------

INDICATOR_KEYS = ("mAP", "mATE", "mASE", "mAOE", "mAVE", "mAAE")


def load_indicator_rows(path: PathLike) -> list[dict[str, Any]]:
    """Rows of {name, mAP, mATE, mASE, mAOE, mAVE, mAAE[, NDS]} from a JSON list or {"rows": [...]}."""
    doc = read_json(path)
    rows = doc.get("rows") if isinstance(doc, Mapping) else doc
    if not isinstance(rows, list):
        raise SchemaError(f"{path}: expected a list of indicator rows")
    for i, r in enumerate(rows):
        missing = [k for k in INDICATOR_KEYS if k not in r]
        if missing:
            raise SchemaError(f"{path}: row {i} lacks {', '.join(missing)}")
    return rows
