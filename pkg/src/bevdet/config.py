"""Pipeline configuration: YAML file <-> typed config objects.

Keys carry their units (``cell_m``, ``rot_range_deg``...). Unknown keys are
errors. All randomness derives from the root seed through named sub-streams.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Mapping, Optional, Union

import numpy as np
import yaml

from .augment import BdaConfig, IdaConfig
from .encoder import BevEncoderSpec, EncoderSpec
from .errors import ConfigError
from .metrics import MetricConfig
from .scenegen import ObjectClass, SceneConfig
from .view_transform import BevGrid, DepthBins

# View-transformer channel widths of the published architectures; they only set C.
PRESETS: dict[str, int] = {
    "BEVDet-STTiny": 64,
    "BEVDet-R50": 80,
    "BEVDet-R101": 64,
}

STREAMS = ("scenegen", "ida", "bda")


def substream(root_seed: int, name: str, *index: int) -> np.random.Generator:
    """Independent generator for stage `name`, keyed by e.g. (sample, camera)."""
    if name not in STREAMS:
        raise ConfigError(f"unknown seed stream {name!r}; expected one of {STREAMS}")
    return np.random.default_rng(np.random.SeedSequence([root_seed, STREAMS.index(name), *index]))


def substream_seed(root_seed: int, name: str, *index: int) -> int:
    return int(substream(root_seed, name, *index).integers(2**63 - 1))


@dataclass(frozen=True)
class HeadConfig:
    score_thresh: float = 0.1
    max_dets: int = 500
    gaussian_min_radius: int = 2
    nms_radius: tuple[float, ...] = (5.0, 1.0, 2.5, 1.0)  # meters, per class id; below the closest same-class spacing scenegen allows
    blob_sigma_cells: float = 1.0
    mass_scale: float = 4.0
    ray_spread: float = 0.5  # blur sigma per unit of worst-case point spacing within one object

    def __post_init__(self) -> None:
        if not 0 <= self.score_thresh < 1:
            raise ConfigError("score_thresh must be in [0, 1)")
        if self.max_dets < 1:
            raise ConfigError("max_dets must be >= 1")
        if any(r <= 0 for r in self.nms_radius):
            raise ConfigError("NMS radii must be positive")


@dataclass(frozen=True)
class PipelineConfig:
    preset: str = "BEVDet-R50"
    seed: int = 0
    grid: BevGrid = field(default_factory=BevGrid)
    depth: DepthBins = field(default_factory=DepthBins)
    encoder: EncoderSpec = field(default_factory=EncoderSpec)
    bev_encoder: BevEncoderSpec = field(default_factory=BevEncoderSpec)
    ida: IdaConfig = field(default_factory=IdaConfig)
    ida_test: IdaConfig = field(default_factory=IdaConfig.test_time)
    ida_enabled: bool = True
    bda: BdaConfig = field(default_factory=BdaConfig)
    bda_enabled: bool = False
    mode: str = "test"  # test: deterministic test-time IDA, no BDA; train: seeded replay of training augmentation
    head: HeadConfig = field(default_factory=HeadConfig)
    metrics: MetricConfig = field(default_factory=MetricConfig)
    scene: SceneConfig = field(default_factory=SceneConfig)
    kernel: str = "sorted"

    def __post_init__(self) -> None:
        if self.preset not in PRESETS:
            raise ConfigError(f"unknown preset {self.preset!r}; choose from {sorted(PRESETS)}")
        if self.mode not in ("test", "train"):
            raise ConfigError(f"mode must be 'test' or 'train', got {self.mode!r}")
        if self.kernel not in ("sorted", "naive"):
            raise ConfigError(f"unknown kernel {self.kernel!r}")
        if self.bda_enabled and self.bda.rot_range != (0.0, 0.0) and not self.grid.is_centered_square:
            raise ConfigError("BEV rotation augmentation needs a square grid centered on the ego origin")
        if tuple(self.ida.source_size) != tuple(self.scene.image_size) and self.ida_enabled:
            raise ConfigError(f"IDA source size {self.ida.source_size} differs from scene image size {self.scene.image_size}")
        if self.ida_enabled:
            for ida in (self.ida, self.ida_test):
                w, h = ida.crop_size
                if w % self.encoder.stride or h % self.encoder.stride:
                    raise ConfigError(f"crop size {ida.crop_size} is not divisible by stride {self.encoder.stride}")
        else:
            w, h = self.scene.image_size
            if w % self.encoder.stride or h % self.encoder.stride:
                raise ConfigError(f"without IDA the image size {self.scene.image_size} must be divisible by the stride")
        if len(self.head.nms_radius) < len(self.scene.classes):
            raise ConfigError("head.nms_radius_m needs one radius per class")

    @property
    def num_classes(self) -> int:
        return len(self.scene.classes)

    @property
    def class_names(self) -> dict[int, str]:
        return {i: c.name for i, c in enumerate(self.scene.classes)}

    def to_dict(self) -> dict[str, Any]:
        return _to_mapping(self)

    def hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def _deg_pair(v: Any, key: str) -> tuple[float, float]:
    pair = _pair(v, key)
    return (math.radians(pair[0]), math.radians(pair[1]))


def _pair(v: Any, key: str) -> tuple[float, float]:
    if not isinstance(v, (list, tuple)) or len(v) != 2:
        raise ConfigError(f"{key} must be a two-element list")
    return (float(v[0]), float(v[1]))


def _int_pair(v: Any, key: str) -> tuple[int, int]:
    a, b = _pair(v, key)
    if a != int(a) or b != int(b):
        raise ConfigError(f"{key} must hold integers")
    return (int(a), int(b))


def _take(section: Mapping[str, Any], allowed: set[str], where: str) -> dict[str, Any]:
    if not isinstance(section, Mapping):
        raise ConfigError(f"section {where!r} must be a mapping")
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(sorted(unknown))}")
    return dict(section)


def _grid(d: Mapping[str, Any]) -> BevGrid:
    d = _take(d, {"x_range_m", "y_range_m", "z_range_m", "cell_m"}, "grid")
    kw: dict[str, float] = {}
    if "x_range_m" in d:
        kw["x_min"], kw["x_max"] = _pair(d["x_range_m"], "grid.x_range_m")
    if "y_range_m" in d:
        kw["y_min"], kw["y_max"] = _pair(d["y_range_m"], "grid.y_range_m")
    if "z_range_m" in d:
        kw["z_min"], kw["z_max"] = _pair(d["z_range_m"], "grid.z_range_m")
    if "cell_m" in d:
        kw["cell"] = float(d["cell_m"])
    return BevGrid(**kw)


def _depth(d: Mapping[str, Any]) -> DepthBins:
    d = _take(d, {"min_m", "max_m", "step_m"}, "depth")
    kw = {"d_min": d.get("min_m", 1.0), "d_max": d.get("max_m", 60.0), "step": d.get("step_m", 1.0)}
    return DepthBins(**{k: float(v) for k, v in kw.items()})


def _ida(d: Mapping[str, Any], where: str, base: IdaConfig) -> IdaConfig:
    d = _take(
        d,
        {"flip_prob", "scale_range", "rot_range_deg", "crop_size_px", "source_size_px", "crop_vertical_mode", "crop_horizontal_mode"},
        where,
    )
    kw: dict[str, Any] = {}
    if "flip_prob" in d:
        kw["flip_prob"] = float(d["flip_prob"])
    if "scale_range" in d:
        kw["scale_range"] = _pair(d["scale_range"], f"{where}.scale_range")
    if "rot_range_deg" in d:
        kw["rot_range"] = _deg_pair(d["rot_range_deg"], f"{where}.rot_range_deg")
    if "crop_size_px" in d:
        kw["crop_size"] = _int_pair(d["crop_size_px"], f"{where}.crop_size_px")
    if "source_size_px" in d:
        kw["source_size"] = _int_pair(d["source_size_px"], f"{where}.source_size_px")
    for k in ("crop_vertical_mode", "crop_horizontal_mode"):
        if k in d:
            kw[k] = str(d[k])
    return replace(base, **kw)


def _bda(d: Mapping[str, Any]) -> BdaConfig:
    d = _take(d, {"flip_prob", "rot_range_deg", "scale_range"}, "bda")
    kw: dict[str, Any] = {}
    if "flip_prob" in d:
        kw["flip_prob"] = float(d["flip_prob"])
    if "rot_range_deg" in d:
        kw["rot_range"] = _deg_pair(d["rot_range_deg"], "bda.rot_range_deg")
    if "scale_range" in d:
        kw["scale_range"] = _pair(d["scale_range"], "bda.scale_range")
    return BdaConfig(**kw)


def _scene(d: Mapping[str, Any]) -> SceneConfig:
    d = _take(
        d,
        {
            "n_cameras", "fov_deg", "image_size_px", "n_boxes", "spawn_radius_m", "ground_z_m",
            "min_gap_m", "size_jitter", "min_visible_pixels", "min_visible_fraction", "visibility_view",
            "min_visible_cells", "max_retries", "classes",
        },
        "scene",
    )
    kw: dict[str, Any] = {}
    simple = {"n_cameras": int, "fov_deg": float, "ground_z_m": float, "min_gap_m": float,
              "size_jitter": float, "min_visible_pixels": int, "min_visible_fraction": float, "min_visible_cells": int, "max_retries": int}
    rename = {"ground_z_m": "ground_z", "min_gap_m": "min_gap"}
    for k, conv in simple.items():
        if k in d:
            kw[rename.get(k, k)] = conv(d[k])
    if "image_size_px" in d:
        kw["image_size"] = _int_pair(d["image_size_px"], "scene.image_size_px")
    if "n_boxes" in d:
        kw["n_boxes"] = _int_pair(d["n_boxes"], "scene.n_boxes")
    if "spawn_radius_m" in d:
        kw["spawn_radius"] = _pair(d["spawn_radius_m"], "scene.spawn_radius_m")
    if "visibility_view" in d:
        v = d["visibility_view"]
        if v is None:
            kw["visibility_view"] = None
        else:
            v = _take(v, {"scale", "crop_x_px", "crop_y_px", "stride_px"}, "scene.visibility_view")
            kw["visibility_view"] = (float(v["scale"]), float(v["crop_x_px"]), float(v["crop_y_px"]), int(v["stride_px"]))
    if "classes" in d:
        classes = []
        for i, c in enumerate(d["classes"]):
            c = _take(c, {"name", "dims_m", "max_speed_mps", "num_attributes"}, f"scene.classes[{i}]")
            dims = c.get("dims_m")
            if not isinstance(dims, (list, tuple)) or len(dims) != 3:
                raise ConfigError(f"scene.classes[{i}].dims_m must be [w, l, h]")
            classes.append(
                ObjectClass(str(c["name"]), tuple(float(v) for v in dims), float(c.get("max_speed_mps", 0.0)), int(c.get("num_attributes", 1)))
            )
        kw["classes"] = tuple(classes)
    return SceneConfig(**kw)


def _head(d: Mapping[str, Any]) -> HeadConfig:
    d = _take(d, {"score_thresh", "max_dets", "gaussian_min_radius_cells", "nms_radius_m", "blob_sigma_cells", "mass_scale", "ray_spread"}, "head")
    kw: dict[str, Any] = {}
    if "score_thresh" in d:
        kw["score_thresh"] = float(d["score_thresh"])
    if "max_dets" in d:
        kw["max_dets"] = int(d["max_dets"])
    if "gaussian_min_radius_cells" in d:
        kw["gaussian_min_radius"] = int(d["gaussian_min_radius_cells"])
    if "nms_radius_m" in d:
        kw["nms_radius"] = tuple(float(v) for v in d["nms_radius_m"])
    if "blob_sigma_cells" in d:
        kw["blob_sigma_cells"] = float(d["blob_sigma_cells"])
    if "mass_scale" in d:
        kw["mass_scale"] = float(d["mass_scale"])
    if "ray_spread" in d:
        kw["ray_spread"] = float(d["ray_spread"])
    return HeadConfig(**kw)


def _metrics(d: Mapping[str, Any]) -> MetricConfig:
    d = _take(
        d,
        {"dist_thresholds_m", "tp_threshold_m", "min_recall", "min_precision", "orientation_period_pi", "skip_velocity", "skip_attribute"},
        "metrics",
    )
    kw: dict[str, Any] = {}
    if "dist_thresholds_m" in d:
        kw["dist_thresholds"] = tuple(float(v) for v in d["dist_thresholds_m"])
    if "tp_threshold_m" in d:
        kw["tp_threshold"] = float(d["tp_threshold_m"])
    for k in ("min_recall", "min_precision"):
        if k in d:
            kw[k] = float(d[k])
    for k in ("orientation_period_pi", "skip_velocity", "skip_attribute"):
        if k in d:
            kw[k] = tuple(int(v) for v in d[k])
    return MetricConfig(**kw)


TOP_LEVEL = {
    "preset", "seed", "grid", "depth", "encoder", "bev_encoder", "ida", "ida_test", "ida_enabled",
    "bda", "bda_enabled", "mode", "head", "metrics", "scene", "kernel",
}


def config_from_dict(raw: Optional[Mapping[str, Any]]) -> PipelineConfig:
    raw = _take(raw or {}, TOP_LEVEL, "config")
    kw: dict[str, Any] = {}
    preset = str(raw.get("preset", "BEVDet-R50"))
    if preset not in PRESETS:
        raise ConfigError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
    kw["preset"] = preset
    if "seed" in raw:
        kw["seed"] = int(raw["seed"])
    if "grid" in raw:
        kw["grid"] = _grid(raw["grid"])
    if "depth" in raw:
        kw["depth"] = _depth(raw["depth"])
    enc = _take(raw.get("encoder", {}), {"kind", "channels", "stride", "seed"}, "encoder")
    kw["encoder"] = EncoderSpec(
        kind=str(enc.get("kind", "depth_oracle")),
        channels=int(enc.get("channels", PRESETS[preset])),
        stride=int(enc.get("stride", 16)),
        seed=int(enc.get("seed", 0)),
    )
    if "bev_encoder" in raw:
        be = _take(raw["bev_encoder"], {"mode", "seed", "layers", "bias"}, "bev_encoder")
        kw["bev_encoder"] = BevEncoderSpec(
            mode=str(be.get("mode", "identity")), seed=int(be.get("seed", 0)), layers=int(be.get("layers", 2)), bias=bool(be.get("bias", False))
        )
    if "scene" in raw:
        kw["scene"] = _scene(raw["scene"])
    scene = kw.get("scene", SceneConfig())
    ida_base = IdaConfig(source_size=scene.image_size)
    kw["ida"] = _ida(raw.get("ida", {}), "ida", ida_base)
    kw["ida_test"] = _ida(raw.get("ida_test", {}), "ida_test", IdaConfig.test_time(source_size=scene.image_size))
    for k in ("ida_enabled", "bda_enabled"):
        if k in raw:
            if not isinstance(raw[k], bool):
                raise ConfigError(f"{k} must be true or false")
            kw[k] = raw[k]
    if "bda" in raw:
        kw["bda"] = _bda(raw["bda"])
    if "mode" in raw:
        kw["mode"] = str(raw["mode"])
    if "head" in raw:
        kw["head"] = _head(raw["head"])
    if "metrics" in raw:
        kw["metrics"] = _metrics(raw["metrics"])
    if "kernel" in raw:
        kw["kernel"] = str(raw["kernel"])
    return PipelineConfig(**kw)


def load_config(path: Optional[Union[str, Path]]) -> PipelineConfig:
    if path is None:
        return PipelineConfig()
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config {path} is not valid YAML: {exc}") from exc
    return config_from_dict(raw)


def _to_mapping(obj: Any) -> Any:
    if hasattr(obj, "__dataclass_fields__"):
        return {f.name: _to_mapping(getattr(obj, f.name)) for f in fields(obj)}
    if isinstance(obj, (list, tuple)):
        return [_to_mapping(v) for v in obj]
    return obj


def config_to_yaml(cfg: PipelineConfig) -> str:
    """Render a config in the file format accepted by `load_config`."""
    s = cfg.scene
    doc = {
        "preset": cfg.preset,
        "seed": cfg.seed,
        "mode": cfg.mode,
        "kernel": cfg.kernel,
        "grid": {
            "x_range_m": [cfg.grid.x_min, cfg.grid.x_max],
            "y_range_m": [cfg.grid.y_min, cfg.grid.y_max],
            "z_range_m": [cfg.grid.z_min, cfg.grid.z_max],
            "cell_m": cfg.grid.cell,
        },
        "depth": {"min_m": cfg.depth.d_min, "max_m": cfg.depth.d_max, "step_m": cfg.depth.step},
        "encoder": {"kind": cfg.encoder.kind, "channels": cfg.encoder.channels, "stride": cfg.encoder.stride, "seed": cfg.encoder.seed},
        "bev_encoder": {"mode": cfg.bev_encoder.mode, "seed": cfg.bev_encoder.seed, "layers": cfg.bev_encoder.layers, "bias": cfg.bev_encoder.bias},
        "ida_enabled": cfg.ida_enabled,
        "ida": _ida_doc(cfg.ida),
        "ida_test": _ida_doc(cfg.ida_test),
        "bda_enabled": cfg.bda_enabled,
        "bda": {
            "flip_prob": cfg.bda.flip_prob,
            "rot_range_deg": [math.degrees(v) for v in cfg.bda.rot_range],
            "scale_range": list(cfg.bda.scale_range),
        },
        "head": {
            "score_thresh": cfg.head.score_thresh,
            "max_dets": cfg.head.max_dets,
            "gaussian_min_radius_cells": cfg.head.gaussian_min_radius,
            "nms_radius_m": list(cfg.head.nms_radius),
            "blob_sigma_cells": cfg.head.blob_sigma_cells,
            "mass_scale": cfg.head.mass_scale,
            "ray_spread": cfg.head.ray_spread,
        },
        "metrics": {
            "dist_thresholds_m": list(cfg.metrics.dist_thresholds),
            "tp_threshold_m": cfg.metrics.tp_threshold,
            "min_recall": cfg.metrics.min_recall,
            "min_precision": cfg.metrics.min_precision,
            "orientation_period_pi": list(cfg.metrics.orientation_period_pi),
            "skip_velocity": list(cfg.metrics.skip_velocity),
            "skip_attribute": list(cfg.metrics.skip_attribute),
        },
        "scene": {
            "n_cameras": s.n_cameras,
            "fov_deg": s.fov_deg,
            "image_size_px": list(s.image_size),
            "n_boxes": list(s.n_boxes),
            "spawn_radius_m": list(s.spawn_radius),
            "ground_z_m": s.ground_z,
            "min_gap_m": s.min_gap,
            "size_jitter": s.size_jitter,
            "min_visible_pixels": s.min_visible_pixels,
            "min_visible_fraction": s.min_visible_fraction,
            "visibility_view": _view_doc(s.visibility_view),
            "min_visible_cells": s.min_visible_cells,
            "max_retries": s.max_retries,
            "classes": [
                {"name": c.name, "dims_m": list(c.dims), "max_speed_mps": c.max_speed, "num_attributes": c.num_attributes}
                for c in s.classes
            ],
        },
    }
    return yaml.safe_dump(doc, sort_keys=False)


def _view_doc(view: Optional[tuple[float, float, float, int]]) -> Optional[dict[str, Any]]:
    if view is None:
        return None
    return {"scale": view[0], "crop_x_px": view[1], "crop_y_px": view[2], "stride_px": view[3]}


def _ida_doc(ida: IdaConfig) -> dict[str, Any]:
    return {
        "flip_prob": ida.flip_prob,
        "scale_range": list(ida.scale_range),
        "rot_range_deg": [math.degrees(v) for v in ida.rot_range],
        "crop_size_px": list(ida.crop_size),
        "source_size_px": list(ida.source_size),
        "crop_vertical_mode": ida.crop_vertical_mode,
        "crop_horizontal_mode": ida.crop_horizontal_mode,
    }
