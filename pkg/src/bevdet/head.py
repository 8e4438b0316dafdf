"""Center-based detection codec over the BEV grid.

Layout per cell (CenterPoint convention): class heatmap, sub-cell center
offset, center height, log dims, (sin, cos) of yaw, ground velocity and the
attribute id. Regression rasters are only meaningful at heatmap peaks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence, Union

import numpy as np
from scipy.ndimage import maximum_filter

from .boxes import Box3D, wrap_angle
from .errors import InvalidParameterError
from .view_transform import BevGrid

DetectionSet = list[Box3D]


@dataclass
class HeadRaster:
    heatmap: np.ndarray  # K x nx x ny, in [0, 1]
    offset: np.ndarray  # 2 x nx x ny, center position inside the cell, in cells
    z: np.ndarray  # nx x ny, meters
    dims: np.ndarray  # 3 x nx x ny, log meters
    rot: np.ndarray  # 2 x nx x ny, (sin yaw, cos yaw)
    vel: np.ndarray  # 2 x nx x ny, m/s
    attr: np.ndarray  # nx x ny, int
    skipped: int = 0  # boxes that fell outside the grid while encoding

    @classmethod
    def zeros(cls, num_classes: int, shape: tuple[int, int]) -> "HeadRaster":
        nx, ny = shape
        return cls(
            heatmap=np.zeros((num_classes, nx, ny)),
            offset=np.zeros((2, nx, ny)),
            z=np.zeros((nx, ny)),
            dims=np.zeros((3, nx, ny)),
            rot=np.zeros((2, nx, ny)),
            vel=np.zeros((2, nx, ny)),
            attr=np.zeros((nx, ny), dtype=np.int64),
        )

    @property
    def num_classes(self) -> int:
        return self.heatmap.shape[0]


def gaussian_radius(length: float, width: float, min_overlap: float = 0.1) -> float:
    """Largest center shift keeping IoU >= min_overlap with the original box (CenterNet rule)."""
    b1 = length + width
    c1 = width * length * (1 - min_overlap) / (1 + min_overlap)
    r1 = (b1 + math.sqrt(b1**2 - 4 * c1)) / 2
    b2 = 2 * (length + width)
    c2 = (1 - min_overlap) * width * length
    r2 = (b2 + math.sqrt(b2**2 - 16 * c2)) / 2
    a3 = 4 * min_overlap
    b3 = -2 * min_overlap * (length + width)
    c3 = (min_overlap - 1) * width * length
    r3 = (b3 + math.sqrt(b3**2 - 4 * a3 * c3)) / 2
    return min(r1, r2, r3)


def draw_gaussian(heat: np.ndarray, ix: int, iy: int, radius: int) -> None:
    """Max-merge a peak-1 Gaussian of the given cell radius into `heat` (nx x ny)."""
    sigma = (2 * radius + 1) / 6.0
    d = np.arange(-radius, radius + 1)
    g = np.exp(-(d[:, None] ** 2 + d[None, :] ** 2) / (2 * sigma * sigma))
    g[g < np.finfo(np.float64).eps * g.max()] = 0.0
    nx, ny = heat.shape
    x0, x1 = max(0, ix - radius), min(nx, ix + radius + 1)
    y0, y1 = max(0, iy - radius), min(ny, iy + radius + 1)
    patch = g[x0 - ix + radius : x1 - ix + radius, y0 - iy + radius : y1 - iy + radius]
    np.maximum(heat[x0:x1, y0:y1], patch, out=heat[x0:x1, y0:y1])


def _box_key(b: Box3D) -> tuple:
    return (b.class_id, b.center, b.dims, b.yaw, b.velocity, b.attribute_id, -b.score)


def encode_targets(
    boxes: Iterable[Box3D],
    grid: BevGrid,
    num_classes: int,
    gaussian_min_radius: int = 2,
    min_overlap: float = 0.1,
) -> HeadRaster:
    """Rasterize ground-truth boxes into heatmap and regression targets.

    Boxes are written in a canonical order so the result does not depend on
    the input order. Boxes whose center falls outside the grid are skipped and
    counted in ``HeadRaster.skipped``.
    """
    raster = HeadRaster.zeros(num_classes, grid.shape)
    for b in sorted(boxes, key=_box_key):
        if not 0 <= b.class_id < num_classes:
            raise InvalidParameterError(f"class id {b.class_id} outside [0, {num_classes})")
        fx = (b.center[0] - grid.x_min) / grid.cell
        fy = (b.center[1] - grid.y_min) / grid.cell
        ix, iy = math.floor(fx), math.floor(fy)
        if not (0 <= ix < grid.nx and 0 <= iy < grid.ny):
            raster.skipped += 1
            continue
        w, l, _ = b.dims
        radius = max(gaussian_min_radius, int(gaussian_radius(l / grid.cell, w / grid.cell, min_overlap)))
        draw_gaussian(raster.heatmap[b.class_id], ix, iy, radius)
        raster.offset[:, ix, iy] = (fx - ix, fy - iy)
        raster.z[ix, iy] = b.center[2]
        raster.dims[:, ix, iy] = np.log(b.dims)
        raster.rot[:, ix, iy] = (math.sin(b.yaw), math.cos(b.yaw))
        raster.vel[:, ix, iy] = b.velocity
        raster.attr[ix, iy] = b.attribute_id
    return raster


def decode(
    raster: HeadRaster,
    grid: BevGrid,
    max_dets: int = 500,
    score_thresh: float = 0.1,
) -> DetectionSet:
    """Turn 3x3 local heatmap maxima into boxes, best `max_dets` by score."""
    heat = raster.heatmap
    peaks = (heat == maximum_filter(heat, size=(1, 3, 3), mode="constant", cval=-np.inf)) & (heat > score_thresh)
    k, ix, iy = np.nonzero(peaks)
    if k.size == 0:
        return []
    scores = heat[k, ix, iy]
    # np.nonzero yields (class, ix, iy) lexicographic order; stable sort keeps it for ties
    order = np.argsort(-scores, kind="stable")[:max_dets]
    dets = []
    for n in order:
        c, i, j = int(k[n]), int(ix[n]), int(iy[n])
        sin_y, cos_y = raster.rot[:, i, j]
        dets.append(
            Box3D(
                center=(
                    grid.x_min + (i + raster.offset[0, i, j]) * grid.cell,
                    grid.y_min + (j + raster.offset[1, i, j]) * grid.cell,
                    raster.z[i, j],
                ),
                dims=tuple(np.exp(raster.dims[:, i, j])),
                yaw=wrap_angle(math.atan2(sin_y, cos_y)),
                velocity=tuple(raster.vel[:, i, j]),
                class_id=c,
                attribute_id=int(raster.attr[i, j]),
                score=float(min(1.0, max(0.0, scores[n]))),
            )
        )
    return dets


def nms_distance(dets: Sequence[Box3D], radius: Union[float, Mapping[int, float]]) -> DetectionSet:
    """Greedy same-class suppression by ground-plane center distance."""
    def radius_for(c: int) -> float:
        r = radius.get(c) if isinstance(radius, Mapping) else radius
        if r is None:
            raise InvalidParameterError(f"no NMS radius for class {c}")
        if r <= 0:
            raise InvalidParameterError(f"NMS radius must be positive, got {r}")
        return float(r)

    kept: list[Box3D] = []
    for d in sorted(dets, key=lambda b: (-b.score,) + _box_key(b)):
        r = radius_for(d.class_id)
        if all(
            k.class_id != d.class_id or math.hypot(k.center[0] - d.center[0], k.center[1] - d.center[1]) >= r
            for k in kept
        ):
            kept.append(d)
    return kept
