"""Lift-splat view transformer.

Image features are lifted along each pixel ray with a categorical depth
distribution, rendered as an ego-frame point cloud and sum-pooled into
vertical pillars of a BEV grid. Two pooling kernels are provided:
`splat_naive` (per-point loop, the reference) and `splat_sorted` (stable sort
by cell id followed by a segmented sum over contiguous runs).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigError, InvalidInputError, InvalidParameterError
from .geometry import AugTransform2D, CameraIntrinsics, Pose3D, camera_to_ego, unproject_augmented


@dataclass(frozen=True)
class DepthBins:
    d_min: float = 1.0
    d_max: float = 60.0
    step: float = 1.0

    def __post_init__(self) -> None:
        if not (self.d_min > 0 and self.step > 0 and self.d_max > self.d_min):
            raise InvalidParameterError(f"invalid depth bins {self}")
        if self.count < 1:
            raise InvalidParameterError("depth bins must contain at least one bin")

    @property
    def count(self) -> int:
        return int(round((self.d_max - self.d_min) / self.step))

    def centers(self) -> np.ndarray:
        return self.d_min + (np.arange(self.count) + 0.5) * self.step

    def index(self, depth: np.ndarray | float) -> np.ndarray:
        """Bin index containing each depth; -1 where the depth falls outside."""
        k = np.floor((np.asarray(depth, dtype=np.float64) - self.d_min) / self.step).astype(np.int64)
        return np.where((k >= 0) & (k < self.count), k, -1)


@dataclass(frozen=True)
class BevGrid:
    """Ground-plane ROI, half-open cells ``[edge, edge + cell)``."""

    x_min: float = -51.2
    x_max: float = 51.2
    y_min: float = -51.2
    y_max: float = 51.2
    cell: float = 0.8
    z_min: float = -5.0
    z_max: float = 3.0

    def __post_init__(self) -> None:
        if self.cell <= 0 or self.x_max <= self.x_min or self.y_max <= self.y_min or self.z_max < self.z_min:
            raise ConfigError(f"invalid BEV grid {self}")
        for span in (self.x_max - self.x_min, self.y_max - self.y_min):
            n = span / self.cell
            if abs(n - round(n)) > 1e-6:
                raise ConfigError(f"grid span {span} is not a whole number of {self.cell} m cells")

    @property
    def nx(self) -> int:
        return int(round((self.x_max - self.x_min) / self.cell))

    @property
    def ny(self) -> int:
        return int(round((self.y_max - self.y_min) / self.cell))

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nx, self.ny)

    @property
    def is_centered_square(self) -> bool:
        return self.nx == self.ny and math.isclose(self.x_min, -self.x_max) and math.isclose(self.y_min, -self.y_max)

    def cell_index(self, xy: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        xy = np.asarray(xy, dtype=np.float64)
        ix = np.floor((xy[..., 0] - self.x_min) / self.cell).astype(np.int64)
        iy = np.floor((xy[..., 1] - self.y_min) / self.cell).astype(np.int64)
        return ix, iy

    def cell_centers(self) -> tuple[np.ndarray, np.ndarray]:
        """Ground-plane (x, y) of every cell center, each of shape (nx, ny)."""
        xs = self.x_min + (np.arange(self.nx) + 0.5) * self.cell
        ys = self.y_min + (np.arange(self.ny) + 0.5) * self.cell
        return np.meshgrid(xs, ys, indexing="ij")

    def in_range(self, positions: np.ndarray) -> np.ndarray:
        """Mask of points that land in a cell and inside the vertical window."""
        ix, iy = self.cell_index(positions)
        z = positions[:, 2]
        return (ix >= 0) & (ix < self.nx) & (iy >= 0) & (iy < self.ny) & (z >= self.z_min) & (z <= self.z_max)


@dataclass(frozen=True)
class FeatureMap:
    data: np.ndarray  # C x H x W
    stride: int = 16

    def __post_init__(self) -> None:
        if self.data.ndim != 3 or self.data.shape[1] < 1 or self.data.shape[2] < 1:
            raise InvalidInputError(f"feature map must be C x H x W, got {self.data.shape}")
        if self.stride < 1:
            raise InvalidInputError("stride must be >= 1")

    @property
    def hw(self) -> tuple[int, int]:
        return self.data.shape[1], self.data.shape[2]


@dataclass(frozen=True)
class DepthLogits:
    data: np.ndarray  # D x H x W


@dataclass(frozen=True)
class LiftedFeatures:
    """Per-pixel context features paired with their depth distributions."""

    context: np.ndarray  # C x H x W
    weights: np.ndarray  # D x H x W, sums to 1 over D

    @property
    def lifted(self) -> np.ndarray:
        """Outer product D x C x H x W."""
        return self.weights[:, None] * self.context[None]


@dataclass(frozen=True)
class PointFeatureCloud:
    positions: np.ndarray  # N x 3, ego frame
    features: np.ndarray  # N x C
    weights: np.ndarray  # N

    @property
    def size(self) -> int:
        return self.positions.shape[0]

    @property
    def channels(self) -> int:
        return self.features.shape[1]

    @classmethod
    def empty(cls, channels: int) -> "PointFeatureCloud":
        return cls(np.zeros((0, 3)), np.zeros((0, channels)), np.zeros(0))

    @classmethod
    def concatenate(cls, clouds: Sequence["PointFeatureCloud"]) -> "PointFeatureCloud":
        return cls(
            np.concatenate([c.positions for c in clouds]),
            np.concatenate([c.features for c in clouds]),
            np.concatenate([c.weights for c in clouds]),
        )

    def subset(self, mask: np.ndarray) -> "PointFeatureCloud":
        return PointFeatureCloud(self.positions[mask], self.features[mask], self.weights[mask])


@dataclass(frozen=True)
class BevFeature:
    data: np.ndarray  # C x nx x ny


@dataclass(frozen=True)
class CameraInput:
    """One camera's contribution to the view transform."""

    features: FeatureMap
    logits: DepthLogits
    intrinsics: CameraIntrinsics
    pose: Pose3D
    aug: AugTransform2D = field(default_factory=AugTransform2D.identity)


def build_frustum(bins: DepthBins, fm_shape: tuple[int, int], stride: int) -> np.ndarray:
    """D x H x W x 3 lattice of (x_pixel, y_pixel, depth) at feature-cell centers."""
    if stride < 1:
        raise InvalidParameterError("stride must be >= 1")
    h, w = fm_shape
    depth = bins.centers()
    ys = (np.arange(h) + 0.5) * stride
    xs = (np.arange(w) + 0.5) * stride
    lattice = np.empty((bins.count, h, w, 3))
    lattice[..., 0] = xs[None, None, :]
    lattice[..., 1] = ys[None, :, None]
    lattice[..., 2] = depth[:, None, None]
    return lattice


def softmax_depth(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=0, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=0, keepdims=True)


def lift(fm: FeatureMap, logits: DepthLogits) -> LiftedFeatures:
    if logits.data.ndim != 3 or logits.data.shape[1:] != fm.data.shape[1:]:
        raise InvalidInputError(f"depth logits {logits.data.shape} do not match features {fm.data.shape}")
    if not np.all(np.isfinite(logits.data)):
        raise InvalidInputError("depth logits contain non-finite values")
    if not np.all(np.isfinite(fm.data)):
        raise InvalidInputError("features contain non-finite values")
    return LiftedFeatures(np.asarray(fm.data, dtype=np.float64), softmax_depth(np.asarray(logits.data, dtype=np.float64)))


def render_points(
    lifted: LiftedFeatures,
    frustum: np.ndarray,
    K: CameraIntrinsics,
    pose: Pose3D,
    A: AugTransform2D,
) -> PointFeatureCloud:
    """Place every (depth bin, feature cell) sample in the ego frame.

    Point order is depth-major, matching the frustum's D x H x W layout.
    """
    d, h, w, _ = frustum.shape
    if lifted.weights.shape != (d, h, w):
        raise InvalidInputError(f"weights {lifted.weights.shape} do not match frustum {frustum.shape[:3]}")
    flat = frustum.reshape(-1, 3)
    cam = unproject_augmented(flat[:, :2], flat[:, 2], K, A)
    ego = camera_to_ego(cam, pose)
    c = lifted.context.shape[0]
    ctx = lifted.context.reshape(c, h * w).T  # (H*W) x C
    features = np.broadcast_to(ctx[None], (d, h * w, c)).reshape(-1, c)
    return PointFeatureCloud(ego, features, lifted.weights.reshape(-1))


def splat_naive(cloud: PointFeatureCloud, grid: BevGrid) -> BevFeature:
    """Reference kernel: one point at a time into its pillar."""
    c = cloud.channels
    out = np.zeros((c, grid.nx, grid.ny))
    x_min, y_min, cell = grid.x_min, grid.y_min, grid.cell
    nx, ny, z_min, z_max = grid.nx, grid.ny, grid.z_min, grid.z_max
    pos = cloud.positions.tolist()
    feats = cloud.features
    weights = cloud.weights.tolist()
    for n, (x, y, z) in enumerate(pos):
        if not (z_min <= z <= z_max):
            continue
        ix = math.floor((x - x_min) / cell)
        iy = math.floor((y - y_min) / cell)
        if 0 <= ix < nx and 0 <= iy < ny:
            out[:, ix, iy] += weights[n] * feats[n]
    return BevFeature(out)


def splat_sorted(cloud: PointFeatureCloud, grid: BevGrid) -> BevFeature:
    """Sort-based kernel: stable sort by linear cell id, then segment sums."""
    c = cloud.channels
    nx, ny = grid.nx, grid.ny
    out = np.zeros((c, nx * ny))
    if cloud.size == 0:
        return BevFeature(out.reshape(c, nx, ny))
    keep = np.flatnonzero(grid.in_range(cloud.positions))
    if keep.size == 0:
        return BevFeature(out.reshape(c, nx, ny))
    ix, iy = grid.cell_index(cloud.positions[keep])
    ids = ix * ny + iy
    # stable sort on ids == sort on (cell id, original index)
    order = np.argsort(ids, kind="stable")
    ids = ids[order]
    src = keep[order]
    contrib = cloud.features[src] * cloud.weights[src, None]
    starts = np.flatnonzero(np.r_[True, ids[1:] != ids[:-1]])
    sums = np.add.reduceat(contrib, starts, axis=0)
    out[:, ids[starts]] = sums.T
    return BevFeature(out.reshape(c, nx, ny))


KERNELS = {"naive": splat_naive, "sorted": splat_sorted}


def camera_cloud(cam: CameraInput, bins: DepthBins) -> PointFeatureCloud:
    lifted = lift(cam.features, cam.logits)
    frustum = build_frustum(bins, cam.features.hw, cam.features.stride)
    return render_points(lifted, frustum, cam.intrinsics, cam.pose, cam.aug)


def view_transform(
    cameras: Sequence[CameraInput],
    grid: BevGrid,
    bins: DepthBins,
    kernel: str = "sorted",
    expected_cameras: Optional[int] = None,
) -> BevFeature:
    """Lift every camera, take the union of the clouds and splat once."""
    if not cameras:
        raise ConfigError("view transform needs at least one camera")
    if expected_cameras is not None and len(cameras) != expected_cameras:
        raise ConfigError(f"got {len(cameras)} camera inputs for a {expected_cameras}-camera rig")
    if kernel not in KERNELS:
        raise ConfigError(f"unknown splat kernel {kernel!r}; choose from {sorted(KERNELS)}")
    clouds = []
    for cam in cameras:
        cloud = camera_cloud(cam, bins)
        clouds.append(cloud.subset(grid.in_range(cloud.positions)))
    return KERNELS[kernel](PointFeatureCloud.concatenate(clouds), grid)
