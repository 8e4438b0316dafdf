"""Image-view (IDA) and BEV-space (BDA) data augmentation.

IDA warps camera images; the view transformer undoes it during unprojection,
so boxes are never touched by IDA. BDA acts on the BEV feature and on the box
targets with the same ground-plane similarity ``M = scale * R(rotation) * F``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Iterable, Literal, Optional, Union

import numpy as np

from .boxes import Box3D, wrap_angle
from .errors import ConfigError, InvalidParameterError
from .geometry import AugTransform2D, Crop, Flip, Rotate, Scale, compose_aug
from .view_transform import BevFeature, BevGrid

SeedLike = Union[int, np.random.Generator, np.random.SeedSequence, None]
ResampleMode = Literal["nearest", "bilinear"]


def as_generator(seed: SeedLike) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def _ordered(pair: Iterable[float], name: str) -> tuple[float, float]:
    lo, hi = (float(v) for v in pair)
    if not (math.isfinite(lo) and math.isfinite(hi)) or lo > hi:
        raise ConfigError(f"{name} must be an ordered pair of finite values, got ({lo}, {hi})")
    return lo, hi


@dataclass(frozen=True)
class IdaConfig:
    flip_prob: float = 0.5
    scale_range: tuple[float, float] = (0.386, 0.55)
    rot_range: tuple[float, float] = (math.radians(-5.4), math.radians(5.4))
    crop_size: tuple[int, int] = (704, 256)  # (w, h)
    source_size: tuple[int, int] = (1600, 900)  # (w, h)
    # fixed: y1 = max(0, s*H - h); fixed_unguarded: y1 = s*H - h; random: uniform over the valid rows
    crop_vertical_mode: str = "fixed"
    # random: uniform over the valid columns; center: centered window
    crop_horizontal_mode: str = "random"

    def __post_init__(self) -> None:
        if not 0.0 <= self.flip_prob <= 1.0:
            raise ConfigError(f"flip_prob must be in [0, 1], got {self.flip_prob}")
        lo, hi = _ordered(self.scale_range, "scale_range")
        if lo <= 0:
            raise ConfigError("scales must be positive")
        _ordered(self.rot_range, "rot_range")
        if min(self.crop_size) < 1 or min(self.source_size) < 1:
            raise ConfigError("image sizes must be positive")
        if self.crop_vertical_mode not in ("fixed", "fixed_unguarded", "random"):
            raise ConfigError(f"unknown crop_vertical_mode {self.crop_vertical_mode!r}")
        if self.crop_horizontal_mode not in ("random", "center"):
            raise ConfigError(f"unknown crop_horizontal_mode {self.crop_horizontal_mode!r}")
        # Horizontal overflow is allowed (zero padded): the default scale floor
        # 0.386 gives a 617.6 px wide image for a 704 px crop.
        if self.crop_vertical_mode == "fixed_unguarded" and lo * self.source_size[1] < self.crop_size[1]:
            raise ConfigError("unguarded vertical crop starts above the image for the smallest scale")

    @classmethod
    def test_time(cls, scale: float = 0.48, **kw) -> "IdaConfig":
        """Deterministic evaluation transform: fixed scale, no flip/rotation, centered crop."""
        kw.setdefault("crop_horizontal_mode", "center")
        return cls(flip_prob=0.0, scale_range=(scale, scale), rot_range=(0.0, 0.0), **kw)


def sample_ida(cfg: IdaConfig, seed: SeedLike) -> AugTransform2D:
    """Draw flip -> scale -> rotate -> crop for one image."""
    rng = as_generator(seed)
    flip = rng.random() < cfg.flip_prob
    s = float(rng.uniform(*cfg.scale_range))
    r = float(rng.uniform(*cfg.rot_range))
    src_w, src_h = cfg.source_size
    crop_w, crop_h = cfg.crop_size
    slack_x = s * src_w - crop_w
    slack_y = s * src_h - crop_h
    u = rng.random()
    if cfg.crop_horizontal_mode == "center":
        x1 = _pixel(slack_x / 2)
    else:
        x1 = _pixel(u * max(0.0, math.floor(slack_x + 1e-6) + 1))
    v = rng.random()
    if cfg.crop_vertical_mode == "fixed":
        y1 = _pixel(max(0.0, slack_y))
    elif cfg.crop_vertical_mode == "fixed_unguarded":
        y1 = _pixel(slack_y)
    else:
        y1 = _pixel(v * max(0.0, math.floor(slack_y + 1e-6) + 1))
    ops = []
    if flip:
        ops.append(Flip(src_w))
    ops.append(Scale(s))
    ops.append(Rotate(r, (x1 + crop_w / 2, y1 + crop_h / 2)))
    ops.append(Crop(x1, y1))
    return compose_aug(ops)


def _pixel(v: float) -> int:
    return int(math.floor(v + 1e-6))


def _resample(stack: np.ndarray, u: np.ndarray, v: np.ndarray, mode: ResampleMode) -> np.ndarray:
    """Sample a (C, R, S) stack at continuous index coords; cell k spans [k, k+1).

    Reads outside the raster contribute zero.
    """
    c, rows, cols = stack.shape
    if mode == "nearest":
        iu = np.floor(u).astype(np.int64)
        iv = np.floor(v).astype(np.int64)
        ok = (iu >= 0) & (iu < rows) & (iv >= 0) & (iv < cols)
        out = np.zeros((c,) + u.shape, dtype=stack.dtype)
        out[:, ok] = stack[:, iu[ok], iv[ok]]
        return out
    if mode != "bilinear":
        raise ConfigError(f"unknown resampling mode {mode!r}")
    fu, fv = u - 0.5, v - 0.5
    u0, v0 = np.floor(fu).astype(np.int64), np.floor(fv).astype(np.int64)
    au, av = fu - u0, fv - v0
    out = np.zeros((c,) + u.shape, dtype=np.float64)
    for du, wu in ((0, 1.0 - au), (1, au)):
        for dv, wv in ((0, 1.0 - av), (1, av)):
            iu, iv = u0 + du, v0 + dv
            ok = (iu >= 0) & (iu < rows) & (iv >= 0) & (iv < cols)
            w = (wu * wv)[ok]
            out[:, ok] += stack[:, iu[ok], iv[ok]] * w
    return out


def apply_ida_image(
    img: np.ndarray,
    A: AugTransform2D,
    out_size: tuple[int, int],
    stride: int = 1,
    mode: ResampleMode = "nearest",
) -> np.ndarray:
    """Warp an H x W (x C) raster: ``out(p) = img(A^-1 p)``.

    ``stride`` is the pixel footprint of one raster cell, so the same call
    warps stride-16 feature maps consistently with their source images.
    ``out_size`` is (w, h) in raster cells.
    """
    squeeze = img.ndim == 2
    stack = img[None] if squeeze else np.moveaxis(img, -1, 0)
    out_w, out_h = out_size
    ys, xs = np.meshgrid((np.arange(out_h) + 0.5) * stride, (np.arange(out_w) + 0.5) * stride, indexing="ij")
    src = A.apply_inverse(np.stack([xs, ys], axis=-1))
    out = _resample(stack, src[..., 1] / stride, src[..., 0] / stride, mode)
    if mode == "nearest":
        out = out.astype(img.dtype, copy=False)
    return out[0] if squeeze else np.moveaxis(out, 0, -1)


@dataclass(frozen=True)
class BdaConfig:
    flip_prob: float = 0.5
    rot_range: tuple[float, float] = (math.radians(-22.5), math.radians(22.5))
    scale_range: tuple[float, float] = (0.95, 1.05)

    def __post_init__(self) -> None:
        if not 0.0 <= self.flip_prob <= 1.0:
            raise ConfigError(f"flip_prob must be in [0, 1], got {self.flip_prob}")
        _ordered(self.rot_range, "rot_range")
        lo, _ = _ordered(self.scale_range, "scale_range")
        if lo <= 0:
            raise ConfigError("scales must be positive")


@dataclass(frozen=True)
class BdaTransform:
    flip_x: bool = False  # x -> -x
    flip_y: bool = False  # y -> -y
    rotation: float = 0.0
    scale: float = 1.0

    def __post_init__(self) -> None:
        if not (math.isfinite(self.scale) and self.scale > 0):
            raise InvalidParameterError(f"BDA scale must be positive, got {self.scale}")

    @property
    def matrix(self) -> np.ndarray:
        """2x2 ground-plane matrix scale * R(rotation) * F."""
        c, s = math.cos(self.rotation), math.sin(self.rotation)
        rot = np.array([[c, -s], [s, c]])
        flip = np.diag([-1.0 if self.flip_x else 1.0, -1.0 if self.flip_y else 1.0])
        return self.scale * rot @ flip

    def inverse(self) -> "BdaTransform":
        # F R(-t) = R(t) F for a single-axis flip; a double flip is R(pi) and commutes.
        one_flip = self.flip_x != self.flip_y
        return BdaTransform(self.flip_x, self.flip_y, self.rotation if one_flip else -self.rotation, 1.0 / self.scale)

    def transform_yaw(self, yaw: float) -> float:
        if self.flip_x:
            yaw = math.pi - yaw
        if self.flip_y:
            yaw = -yaw
        return wrap_angle(wrap_angle(yaw) + self.rotation)


def sample_bda(cfg: BdaConfig, seed: SeedLike) -> BdaTransform:
    rng = as_generator(seed)
    rot = float(rng.uniform(*cfg.rot_range))
    scale = float(rng.uniform(*cfg.scale_range))
    flip_x = bool(rng.random() < cfg.flip_prob)
    flip_y = bool(rng.random() < cfg.flip_prob)
    return BdaTransform(flip_x, flip_y, rot, scale)


def apply_bda_feature(
    f: BevFeature,
    t: BdaTransform,
    grid: BevGrid,
    mode: ResampleMode = "nearest",
) -> BevFeature:
    """Resample the BEV raster so content at ground point p moves to M p."""
    if t.rotation != 0.0 and not grid.is_centered_square:
        raise ConfigError("BEV rotation needs a square grid centered on the ego origin")
    if f.data.shape[1:] != grid.shape:
        raise ConfigError(f"feature shape {f.data.shape[1:]} does not match grid {grid.shape}")
    qx, qy = grid.cell_centers()
    m_inv = np.linalg.inv(t.matrix)
    px = m_inv[0, 0] * qx + m_inv[0, 1] * qy
    py = m_inv[1, 0] * qx + m_inv[1, 1] * qy
    u = (px - grid.x_min) / grid.cell
    v = (py - grid.y_min) / grid.cell
    return BevFeature(_resample(f.data, u, v, mode))


def apply_bda_boxes(boxes: Iterable[Box3D], t: BdaTransform) -> list[Box3D]:
    m = t.matrix
    out = []
    for b in boxes:
        xy = m @ np.asarray(b.center[:2])
        vel = m @ np.asarray(b.velocity)
        out.append(
            replace(
                b,
                center=(float(xy[0]), float(xy[1]), t.scale * b.center[2]),
                dims=tuple(t.scale * d for d in b.dims),
                yaw=t.transform_yaw(b.yaw),
                velocity=(float(vel[0]), float(vel[1])),
            )
        )
    return out


def bda_identity(t: Optional[BdaTransform]) -> bool:
    return t is None or (not t.flip_x and not t.flip_y and t.rotation == 0.0 and t.scale == 1.0)
