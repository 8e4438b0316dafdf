"""Four-stage composition: image encoder -> view transformer -> BEV encoder -> head.

No stage is learned. The head turns the depth-oracle BEV occupancy into a
`HeadRaster` analytically (smoothed class mass as heatmap, local mass
centroid pushed outward as box center, class priors for size and height),
then runs the regular decoder and NMS.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.ndimage import gaussian_filter

from .augment import BdaTransform, apply_bda_boxes, apply_bda_feature, apply_ida_image, sample_bda, sample_ida
from .boxes import Box3D
from .config import PipelineConfig, substream
from .encoder import encode_bev, encode_image
from .geometry import AugTransform2D
from .head import DetectionSet, HeadRaster, decode, nms_distance
from .scenegen import SceneSample
from .view_transform import BevFeature, CameraInput, view_transform


@dataclass
class InferenceTrace:
    """Intermediate products of one sample, for inspection and tests."""

    augs: list[AugTransform2D]
    bda: Optional[BdaTransform]
    bev: BevFeature
    raster: HeadRaster
    detections: DetectionSet


def camera_augs(cfg: PipelineConfig, n_cameras: int, index: int) -> list[AugTransform2D]:
    if not cfg.ida_enabled:
        return [AugTransform2D.identity() for _ in range(n_cameras)]
    ida = cfg.ida if cfg.mode == "train" else cfg.ida_test
    return [sample_ida(ida, substream(cfg.seed, "ida", index, k)) for k in range(n_cameras)]


def prepare_cameras(scene: SceneSample, cfg: PipelineConfig, augs: Sequence[AugTransform2D]) -> list[CameraInput]:
    """Warp each image/depth pair by its IDA transform and encode it."""
    inputs = []
    for cam, A in zip(scene.cameras, augs):
        if cfg.ida_enabled:
            ida = cfg.ida if cfg.mode == "train" else cfg.ida_test
            img = apply_ida_image(cam.image, A, ida.crop_size)
            depth = apply_ida_image(cam.depth, A, ida.crop_size)
        else:
            img, depth = cam.image, cam.depth
        fm, logits = encode_image(img, cfg.encoder, cfg.depth, depth if cfg.encoder.kind == "depth_oracle" else None)
        inputs.append(CameraInput(fm, logits, cam.intrinsics, cam.pose, A))
    return inputs


def ray_pitch(inputs: Sequence[CameraInput]) -> float:
    """Largest angle (rad) between neighbouring feature-cell rays over all cameras."""
    return max(c.features.stride / (c.intrinsics.matrix[0, 0] * c.aug.scale) for c in inputs)


def _range_blur(mass: np.ndarray, sigma_floor: float, sigma_at: np.ndarray) -> np.ndarray:
    """Gaussian blur whose width follows `sigma_at` (cells, per cell), by picking
    from a ladder of fixed-width blurs in quarter-cell steps. Each blur is
    scaled to unit peak, so an isolated impulse keeps its height at any range."""
    sig = np.maximum(sigma_at, sigma_floor)
    levels = np.arange(sigma_floor, sig.max() + 0.25, 0.25)
    pick = np.clip(np.rint((sig - sigma_floor) / 0.25).astype(int), 0, len(levels) - 1)
    out = np.zeros_like(mass)
    for n, sigma in enumerate(levels):
        sel = pick == n
        if sel.any():
            out[sel] = 2 * math.pi * sigma**2 * gaussian_filter(mass, sigma, mode="constant")[sel]
    return out


def analytic_head(bev: BevFeature, cfg: PipelineConfig, pitch: float = 0.0) -> HeadRaster:
    """Occupancy-to-target conversion standing in for a trained head.

    Expects channels 1..K to hold per-class surface mass, as produced by the
    depth-oracle encoder. The visible surface sits on the camera side of an
    object, so its centroid is pushed away from the ego origin by the class's
    mean half-extent. `pitch` is the angle between neighbouring feature rays;
    one object lifts to points up to a ray gap and a depth bin apart, so the
    blur widens with range to keep one peak per object.
    """
    grid = cfg.grid
    k = cfg.num_classes
    raster = HeadRaster.zeros(k, grid.shape)
    data = bev.data
    if data.shape[0] < k + 1:
        return raster
    xs, ys = grid.cell_centers()
    # worst spacing between points lifted from one object: lateral ray gap and
    # depth bin, plus a cell diagonal of quantization
    spread = cfg.head.ray_spread * (np.hypot(pitch * np.hypot(xs, ys), cfg.depth.step) + math.sqrt(2) * grid.cell) / grid.cell
    cx_c = np.empty((k,) + grid.shape)
    cy_c = np.empty((k,) + grid.shape)
    for c, oc in enumerate(cfg.scene.classes):
        mass = np.maximum(data[c + 1], 0.0)
        # one blob per object: blur across the class's longest half-extent at least
        floor = max(cfg.head.blob_sigma_cells, max(oc.dims[:2]) / (2 * grid.cell))
        smooth = _range_blur(mass, floor, spread)
        raster.heatmap[c] = 1.0 - np.exp(-smooth / cfg.head.mass_scale)
        # surface centroid under the same blur, so every cell of a blob agrees
        safe = smooth > 1e-12
        denom = np.where(safe, smooth, 1.0)
        cx_c[c] = np.where(safe, _range_blur(mass * xs, floor, spread) / denom, xs)
        cy_c[c] = np.where(safe, _range_blur(mass * ys, floor, spread) / denom, ys)
    best = raster.heatmap.argmax(axis=0)
    cx = np.take_along_axis(cx_c, best[None], axis=0)[0]
    cy = np.take_along_axis(cy_c, best[None], axis=0)[0]
    w = np.array([oc.dims[0] for oc in cfg.scene.classes])[best]
    l = np.array([oc.dims[1] for oc in cfg.scene.classes])[best]
    h = np.array([oc.dims[2] for oc in cfg.scene.classes])[best]
    r = np.hypot(cx, cy)
    push = (w + l) / 4.0
    scale = np.where(r > 1e-9, (r + push) / np.maximum(r, 1e-9), 1.0)
    px, py = cx * scale, cy * scale
    ix = np.arange(grid.nx)[:, None]
    iy = np.arange(grid.ny)[None, :]
    raster.offset[0] = (px - grid.x_min) / grid.cell - ix
    raster.offset[1] = (py - grid.y_min) / grid.cell - iy
    raster.z[:] = cfg.scene.ground_z + h / 2
    raster.dims[:] = np.log(np.stack([w, l, h]))
    raster.rot[0] = 0.0
    raster.rot[1] = 1.0
    return raster


def infer_sample(scene: SceneSample, cfg: PipelineConfig, index: int = 0) -> InferenceTrace:
    augs = camera_augs(cfg, len(scene.cameras), index)
    inputs = prepare_cameras(scene, cfg, augs)
    bev = view_transform(inputs, cfg.grid, cfg.depth, kernel=cfg.kernel, expected_cameras=len(scene.cameras))
    bda = None
    if cfg.mode == "train" and cfg.bda_enabled:
        bda = sample_bda(cfg.bda, substream(cfg.seed, "bda", index))
        bev = apply_bda_feature(bev, bda, cfg.grid)
    bev = encode_bev(bev, cfg.bev_encoder)
    raster = analytic_head(bev, cfg, ray_pitch(inputs))
    dets = decode(raster, cfg.grid, cfg.head.max_dets, cfg.head.score_thresh)
    dets = nms_distance(dets, dict(enumerate(cfg.head.nms_radius)))
    if bda is not None:
        # report in the un-augmented ego frame
        dets = apply_bda_boxes(dets, bda.inverse())
    dets = sorted(dets, key=lambda b: -b.score)
    return InferenceTrace(augs, bda, bev, raster, dets)


def infer(scene: SceneSample, cfg: PipelineConfig, index: int = 0) -> DetectionSet:
    return infer_sample(scene, cfg, index).detections


def ego_distance(b: Box3D) -> float:
    return math.hypot(b.center[0], b.center[1])
