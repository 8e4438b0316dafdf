"""Deterministic synthetic multi-camera scenes.

Cameras sit at the ego origin looking outward at evenly spaced yaws. Boxes
stand on a flat ground plane; each camera renders a flat-shaded silhouette
image (color keyed by class) and a z-depth raster holding the nearest box
surface per pixel (0 where no box is hit).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .boxes import Box3D
from .errors import ConfigError, GenerationError
from .geometry import CameraIntrinsics, Pose3D

_NEAR = 0.1


@dataclass(frozen=True)
class ObjectClass:
    name: str
    dims: tuple[float, float, float]  # mean (w, l, h)
    max_speed: float
    num_attributes: int


DEFAULT_CLASSES: tuple[ObjectClass, ...] = (
    ObjectClass("car", (1.9, 4.5, 1.7), 8.0, 3),
    ObjectClass("pedestrian", (0.7, 0.7, 1.8), 1.5, 3),
    ObjectClass("barrier", (2.5, 0.5, 1.0), 0.0, 1),
    ObjectClass("traffic_cone", (0.4, 0.4, 1.0), 0.0, 1),
)


def class_color(class_id: int) -> tuple[int, int, int]:
    """Flat shade for a class; background stays (0, 0, 0)."""
    if not 0 <= class_id < 7:
        raise ConfigError("shading palette supports at most 7 classes")
    k = class_id + 1
    return (32 * k, 255 - 32 * k, 128)


def decode_class_shading(rgb: np.ndarray) -> np.ndarray:
    """Inverse of `class_color` over (..., 3) arrays; -1 where no class matches."""
    rgb = np.asarray(rgb).astype(np.int64)
    k = rgb[..., 0] // 32
    ok = (rgb[..., 0] == 32 * k) & (rgb[..., 1] == 255 - 32 * k) & (rgb[..., 2] == 128) & (k >= 1) & (k <= 7)
    return np.where(ok, k - 1, -1)


@dataclass(frozen=True)
class Camera:
    intrinsics: CameraIntrinsics
    pose: Pose3D  # ego from camera
    image_size: tuple[int, int]  # (w, h)


@dataclass
class SceneCamera:
    camera: Camera
    image: np.ndarray  # H x W x 3 uint8
    depth: np.ndarray  # H x W float32, 0 = no surface

    @property
    def intrinsics(self) -> CameraIntrinsics:
        return self.camera.intrinsics

    @property
    def pose(self) -> Pose3D:
        return self.camera.pose


@dataclass
class SceneSample:
    cameras: list[SceneCamera]
    boxes: list[Box3D]
    sample_id: str
    seed: int
    visible_pixels: list[int] = field(default_factory=list)


@dataclass(frozen=True)
class SceneConfig:
    n_cameras: int = 6
    fov_deg: float = 70.0
    image_size: tuple[int, int] = (1600, 900)
    n_boxes: tuple[int, int] = (1, 8)
    spawn_radius: tuple[float, float] = (6.0, 45.0)
    ground_z: float = -1.5
    min_gap: float = 2.5  # keeps same-class neighbours resolvable at feature-cell resolution
    size_jitter: float = 0.1
    min_visible_pixels: int = 300
    min_visible_fraction: float = 0.5  # of the box's own unoccluded silhouette
    # (scale, crop_x, crop_y, stride) of the test-time view; each box must be
    # the nearest surface of at least min_visible_cells feature cells in it
    visibility_view: Optional[tuple[float, float, float, int]] = (0.48, 32.0, 176.0, 16)
    min_visible_cells: int = 1
    max_retries: int = 200
    classes: tuple[ObjectClass, ...] = DEFAULT_CLASSES

    def __post_init__(self) -> None:
        if self.n_cameras < 1:
            raise ConfigError("scene needs at least one camera")
        if not 0 <= self.min_visible_fraction <= 1:
            raise ConfigError("min_visible_fraction must be in [0, 1]")
        if self.visibility_view is not None and (self.visibility_view[0] <= 0 or int(self.visibility_view[3]) < 1):
            raise ConfigError(f"invalid visibility view {self.visibility_view}")
        if self.min_visible_cells < 0:
            raise ConfigError("min_visible_cells must be non-negative")
        lo, hi = self.n_boxes
        if lo < 0 or hi < lo:
            raise ConfigError(f"invalid box count range {self.n_boxes}")
        r0, r1 = self.spawn_radius
        if not 0 <= r0 < r1:
            raise ConfigError(f"invalid spawn radius range {self.spawn_radius}")
        if not 0 < self.fov_deg < 180:
            raise ConfigError("field of view must be in (0, 180) degrees")
        if not self.classes:
            raise ConfigError("scene needs at least one object class")


def camera_rotation(yaw: float) -> np.ndarray:
    """Ego-from-camera rotation for a level camera looking along ego yaw."""
    c, s = math.cos(yaw), math.sin(yaw)
    right = [s, -c, 0.0]
    down = [0.0, 0.0, -1.0]
    forward = [c, s, 0.0]
    return np.array([right, down, forward]).T


def make_rig(n_cameras: int, fov: float, image_size: tuple[int, int]) -> list[Camera]:
    """`n_cameras` level cameras at the ego origin, yaws 2*pi*k/n, horizontal FOV `fov` radians."""
    if n_cameras < 1:
        raise ConfigError("rig needs at least one camera")
    w, h = image_size
    f = (w / 2) / math.tan(fov / 2)
    K = CameraIntrinsics.from_params(f, f, w / 2, h / 2)
    return [Camera(K, Pose3D(camera_rotation(2 * math.pi * k / n_cameras), np.zeros(3)), (w, h)) for k in range(n_cameras)]


def _box_axes(box: Box3D) -> np.ndarray:
    c, s = math.cos(box.yaw), math.sin(box.yaw)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])  # columns: length, width, height axes


def _pixel_window(box: Box3D, cam: Camera) -> Optional[tuple[int, int, int, int]]:
    """Image rows/cols that can contain the box, from near-plane-clipped edges."""
    to_cam = cam.pose.inverse()
    pts = to_cam.apply(box.corners())
    edges = [(0, 1), (1, 2), (2, 3), (3, 0), (4, 5), (5, 6), (6, 7), (7, 4), (0, 4), (1, 5), (2, 6), (3, 7)]
    keep = []
    for a, b in edges:
        pa, pb = pts[a], pts[b]
        ina, inb = pa[2] > _NEAR, pb[2] > _NEAR
        if ina:
            keep.append(pa)
        if inb:
            keep.append(pb)
        if ina != inb:
            t = (_NEAR - pa[2]) / (pb[2] - pa[2])
            keep.append(pa + t * (pb - pa))
    if not keep:
        return None
    uv = cam.intrinsics.project(np.array(keep))
    w, h = cam.image_size
    c0 = max(0, int(math.floor(uv[:, 0].min())))
    c1 = min(w, int(math.ceil(uv[:, 0].max())) + 1)
    r0 = max(0, int(math.floor(uv[:, 1].min())))
    r1 = min(h, int(math.ceil(uv[:, 1].max())) + 1)
    if c0 >= c1 or r0 >= r1:
        return None
    return r0, r1, c0, c1


def _ray_box_depth(box: Box3D, cam: Camera, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    """z-depth of the first hit of each pixel ray with the box; inf on miss."""
    uv1 = np.stack([cols + 0.5, rows + 0.5, np.ones_like(cols, dtype=np.float64)], axis=-1)
    dirs_cam = uv1 @ cam.intrinsics.inverse.T  # z component 1, so ray parameter == z-depth
    axes = _box_axes(box)
    to_local = axes.T
    origin = to_local @ (cam.pose.translation - np.asarray(box.center))
    dirs = dirs_cam @ (to_local @ cam.pose.rotation).T
    half = np.array([box.dims[1], box.dims[0], box.dims[2]]) / 2
    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = (-half - origin) / dirs
        t2 = (half - origin) / dirs
    t_near = np.nanmax(np.minimum(t1, t2), axis=-1)
    t_far = np.nanmin(np.maximum(t1, t2), axis=-1)
    hit = (t_near <= t_far) & (t_near > _NEAR)
    return np.where(hit, t_near, np.inf)


@dataclass
class _ZBuffer:
    """Nearest-hit z-depth (inf on background) and instance index (-1) over the
    image region ``[r0, r0 + rows) x [c0, c0 + cols)`` that any box can reach."""

    r0: int
    c0: int
    zbuf: np.ndarray
    inst: np.ndarray
    own: np.ndarray  # per box, silhouette pixels ignoring occlusion


def _zbuffer(boxes: Sequence[Box3D], cam: Camera) -> _ZBuffer:
    wins = [(n, _pixel_window(box, cam)) for n, box in enumerate(boxes)]
    wins = [(n, w) for n, w in wins if w is not None]
    if not wins:
        return _ZBuffer(0, 0, np.full((0, 0), np.inf), np.full((0, 0), -1, dtype=np.int64), np.zeros(len(boxes), dtype=np.int64))
    R0 = min(w[0] for _, w in wins)
    R1 = max(w[1] for _, w in wins)
    C0 = min(w[2] for _, w in wins)
    C1 = max(w[3] for _, w in wins)
    zbuf = np.full((R1 - R0, C1 - C0), np.inf)
    inst = np.full((R1 - R0, C1 - C0), -1, dtype=np.int64)
    own = np.zeros(len(boxes), dtype=np.int64)
    for n, (r0, r1, c0, c1) in wins:
        rows, cols = np.meshgrid(np.arange(r0, r1, dtype=np.float64), np.arange(c0, c1, dtype=np.float64), indexing="ij")
        d = _ray_box_depth(boxes[n], cam, rows, cols)
        own[n] = np.count_nonzero(np.isfinite(d))
        view = zbuf[r0 - R0 : r1 - R0, c0 - C0 : c1 - C0]
        closer = d < view
        view[closer] = d[closer]
        inst[r0 - R0 : r1 - R0, c0 - C0 : c1 - C0][closer] = n
    return _ZBuffer(R0, C0, zbuf, inst, own)


def _shade(boxes: Sequence[Box3D], cam: Camera, zb: _ZBuffer) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    w, h = cam.image_size
    image = np.zeros((h, w, 3), dtype=np.uint8)
    depth = np.zeros((h, w), dtype=np.float32)
    inst = np.full((h, w), -1, dtype=np.int64)
    rows, cols = zb.inst.shape
    region = (slice(zb.r0, zb.r0 + rows), slice(zb.c0, zb.c0 + cols))
    # last palette row is the background, picked by inst == -1
    palette = np.array([class_color(b.class_id) for b in boxes] + [(0, 0, 0)], dtype=np.uint8)
    image[region] = palette[zb.inst]
    depth[region] = np.where(zb.inst >= 0, zb.zbuf, 0.0)
    inst[region] = zb.inst
    return image, depth, inst


def render_camera(boxes: Sequence[Box3D], cam: Camera) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Render (image, depth, instance) rasters; instance is -1 on background."""
    return _shade(boxes, cam, _zbuffer(boxes, cam))


def _sample_boxes(cfg: SceneConfig, rng: np.random.Generator, count: int) -> Optional[list[Box3D]]:
    boxes: list[Box3D] = []
    radii: list[float] = []
    r0, r1 = cfg.spawn_radius
    for _ in range(count):
        cls_id = int(rng.integers(len(cfg.classes)))
        oc = cfg.classes[cls_id]
        jitter = 1.0 + cfg.size_jitter * rng.uniform(-1.0, 1.0, size=3)
        w, l, h = (d * j for d, j in zip(oc.dims, jitter))
        reach = 0.5 * math.hypot(w, l)
        for _attempt in range(50):
            # uniform over the annulus area
            r = math.sqrt(rng.uniform(r0**2, r1**2))
            a = rng.uniform(-math.pi, math.pi)
            x, y = r * math.cos(a), r * math.sin(a)
            if math.hypot(x, y) - reach < r0 * 0.5:
                continue
            if all(math.hypot(x - b.center[0], y - b.center[1]) >= reach + rb + cfg.min_gap for b, rb in zip(boxes, radii)):
                break
        else:
            return None
        speed = rng.uniform(0.0, oc.max_speed)
        heading = rng.uniform(-math.pi, math.pi)
        yaw = rng.uniform(-math.pi, math.pi)
        boxes.append(
            Box3D(
                center=(x, y, cfg.ground_z + h / 2),
                dims=(w, l, h),
                yaw=yaw,
                velocity=(speed * math.cos(heading), speed * math.sin(heading)),
                class_id=cls_id,
                attribute_id=int(rng.integers(oc.num_attributes)),
            )
        )
        radii.append(reach)
    return boxes


def _lattice_owners(zb: _ZBuffer, view: tuple[float, float, float, int], n_boxes: int) -> np.ndarray:
    """Per box, the number of feature cells whose nearest sampled surface it is.

    `view` is (scale, crop_x, crop_y, stride): the image is resized by
    `scale`, cropped at (crop_x, crop_y) and read by nearest-pixel sampling,
    then pooled into stride x stride cells, as the pipeline does at test time.
    """
    rows, cols = zb.inst.shape
    if rows == 0 or n_boxes == 0:
        return np.zeros(n_boxes, dtype=np.int64)
    scale, cx, cy, stride = view

    def samples(start: int, size: int, crop: float) -> tuple[np.ndarray, np.ndarray]:
        # output pixels whose nearest source pixel falls inside [start, start + size)
        lo = max(0, math.floor(start * scale - crop) - 1)
        hi = math.ceil((start + size) * scale - crop) + 1
        out = np.arange(lo, hi)
        src = np.floor((out + 0.5 + crop) / scale).astype(np.int64)
        keep = (src >= start) & (src < start + size)
        return out[keep], src[keep] - start

    u, sc = samples(zb.c0, cols, cx)
    v, sr = samples(zb.r0, rows, cy)
    if u.size == 0 or v.size == 0:
        return np.zeros(n_boxes, dtype=np.int64)
    z = zb.zbuf[np.ix_(sr, sc)]
    ids = zb.inst[np.ix_(sr, sc)]
    cell = (v // stride)[:, None] * (u.max() // stride + 1) + (u // stride)[None, :]
    cell, z, ids = cell.ravel(), z.ravel(), ids.ravel()
    # nearest sample per cell: sort by (cell, depth) and take each cell's first entry
    order = np.lexsort((z, cell))
    first = np.r_[True, cell[order][1:] != cell[order][:-1]]
    owner = ids[order][first]
    return np.bincount(owner[owner >= 0], minlength=n_boxes)


def _visibility(
    boxes: Sequence[Box3D], rig: Sequence[Camera], view: Optional[tuple[float, float, float, int]] = None
) -> tuple[list[_ZBuffer], dict[str, np.ndarray]]:
    """Z-buffers plus per-box visible pixels, unoccluded pixels and owned feature cells over the rig."""
    buffers = []
    stats = {k: np.zeros(len(boxes), dtype=np.int64) for k in ("visible", "own", "cells")}
    for cam in rig:
        zb = _zbuffer(boxes, cam)
        buffers.append(zb)
        stats["visible"] += np.bincount(zb.inst[zb.inst >= 0], minlength=len(boxes))
        stats["own"] += zb.own
        if view is not None:
            stats["cells"] += _lattice_owners(zb, view, len(boxes))
    return buffers, stats


def render_scene(boxes: Sequence[Box3D], rig: Sequence[Camera]) -> tuple[list[SceneCamera], list[int]]:
    buffers, stats = _visibility(boxes, rig)
    cams = [SceneCamera(cam, *_shade(boxes, cam, zb)[:2]) for cam, zb in zip(rig, buffers)]
    return cams, stats["visible"].tolist()


def generate_scene(cfg: SceneConfig, seed: int, sample_id: Optional[str] = None) -> SceneSample:
    """Sample a non-overlapping box layout where every box is visible, then render it.

    A box counts as visible when at least ``min_visible_pixels`` of it show,
    occluders hide no more than ``1 - min_visible_fraction`` of its silhouette
    and, when ``visibility_view`` is set, it is the nearest surface in at least
    ``min_visible_cells`` feature cells of that view.
    """
    rng = np.random.default_rng(seed)
    rig = make_rig(cfg.n_cameras, math.radians(cfg.fov_deg), cfg.image_size)
    count = int(rng.integers(cfg.n_boxes[0], cfg.n_boxes[1] + 1))
    sid = sample_id if sample_id is not None else f"sample-{seed}"
    for _ in range(cfg.max_retries):
        boxes = _sample_boxes(cfg, rng, count)
        if boxes is None:
            continue
        buffers, st = _visibility(boxes, rig, cfg.visibility_view)
        ok = (
            (st["visible"] >= cfg.min_visible_pixels)
            & (st["visible"] >= cfg.min_visible_fraction * st["own"])
            & ((st["cells"] >= cfg.min_visible_cells) | (cfg.visibility_view is None))
        )
        if ok.all():
            cams = [SceneCamera(cam, *_shade(boxes, cam, zb)[:2]) for cam, zb in zip(rig, buffers)]
            return SceneSample(cams, boxes, sid, seed, st["visible"].tolist())
    raise GenerationError(f"could not place {count} visible, non-overlapping boxes after {cfg.max_retries} attempts (seed {seed})")
