"""Stand-in image-view and BEV encoders.

Nothing here is trained: convolution weights are expanded from a seed. The
depth-oracle encoder reads ground-truth depth rasters instead of predicting
depth, which makes end-to-end runs checkable against known geometry.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConfigError, InvalidInputError
from .scenegen import decode_class_shading
from .view_transform import BevFeature, DepthBins, DepthLogits, FeatureMap

ORACLE_LOGIT = 40.0
TOY_HIDDEN = 16


@dataclass(frozen=True)
class EncoderSpec:
    kind: str = "depth_oracle"  # toy_conv | depth_oracle
    channels: int = 64
    stride: int = 16
    seed: int = 0

    def __post_init__(self) -> None:
        if self.kind not in ("toy_conv", "depth_oracle"):
            raise ConfigError(f"unknown encoder kind {self.kind!r}")
        if self.channels < 1:
            raise ConfigError("encoder needs at least one channel")
        if self.stride not in (8, 16, 32):
            raise ConfigError(f"stride must be 8, 16 or 32, got {self.stride}")


@dataclass(frozen=True)
class BevEncoderSpec:
    mode: str = "identity"  # identity | toy
    seed: int = 0
    layers: int = 2
    bias: bool = False

    def __post_init__(self) -> None:
        if self.mode not in ("identity", "toy"):
            raise ConfigError(f"unknown BEV encoder mode {self.mode!r}")
        if self.layers < 1:
            raise ConfigError("BEV encoder needs at least one layer")


def _blocks(x: np.ndarray, k: int) -> np.ndarray:
    """(H, W, C) -> (H/k, W/k, k*k*C) non-overlapping patches."""
    h, w, c = x.shape
    return x.reshape(h // k, k, w // k, k, c).transpose(0, 2, 1, 3, 4).reshape(h // k, w // k, k * k * c)


def _toy_weights(spec: EncoderSpec, in_channels: int, depth_bins: int) -> tuple[np.ndarray, ...]:
    rng = np.random.default_rng(spec.seed)
    k1 = 4
    k2 = spec.stride // k1
    fan1 = k1 * k1 * in_channels
    fan2 = k2 * k2 * TOY_HIDDEN
    w1 = rng.standard_normal((fan1, TOY_HIDDEN)) / np.sqrt(fan1)
    b1 = 0.1 * rng.standard_normal(TOY_HIDDEN)
    w2 = rng.standard_normal((fan2, spec.channels + depth_bins)) / np.sqrt(fan2)
    b2 = 0.1 * rng.standard_normal(spec.channels + depth_bins)
    return w1, b1, w2, b2


def _toy_conv(img: np.ndarray, spec: EncoderSpec, bins: DepthBins) -> tuple[FeatureMap, DepthLogits]:
    x = img.astype(np.float64)
    if img.dtype == np.uint8:
        x /= 255.0
    if x.ndim == 2:
        x = x[..., None]
    w1, b1, w2, b2 = _toy_weights(spec, x.shape[2], bins.count)
    hidden = np.maximum(_blocks(x, 4) @ w1 + b1, 0.0)
    out = _blocks(hidden, spec.stride // 4) @ w2 + b2  # H/s x W/s x (C + D)
    out = np.moveaxis(out, -1, 0)
    return FeatureMap(out[: spec.channels].copy(), spec.stride), DepthLogits(out[spec.channels :].copy())


def _depth_oracle(img: np.ndarray, depth: np.ndarray, spec: EncoderSpec, bins: DepthBins) -> tuple[FeatureMap, DepthLogits]:
    s = spec.stride
    h, w = depth.shape
    hf, wf = h // s, w // s
    # nearest visible surface inside each feature cell
    blocks = depth.reshape(hf, s, wf, s).transpose(0, 2, 1, 3).reshape(hf, wf, s * s)
    masked = np.where(blocks > 0, blocks, np.inf)
    arg = masked.argmin(axis=-1)
    cell_depth = np.take_along_axis(masked, arg[..., None], axis=-1)[..., 0]
    k = bins.index(np.where(np.isfinite(cell_depth), cell_depth, -1.0))
    hit = k >= 0

    logits = np.full((bins.count, hf, wf), -ORACLE_LOGIT)
    ii, jj = np.nonzero(hit)
    logits[k[ii, jj], ii, jj] = ORACLE_LOGIT

    features = np.zeros((spec.channels, hf, wf))
    features[0][hit] = 1.0
    if img is not None and spec.channels > 1:
        shade = img.reshape(hf, s, wf, s, -1).transpose(0, 2, 1, 3, 4).reshape(hf, wf, s * s, -1)
        rgb = np.take_along_axis(shade, arg[..., None, None], axis=2)[:, :, 0]
        cls = decode_class_shading(rgb)
        ok = hit & (cls >= 0) & (cls + 1 < spec.channels)
        ii, jj = np.nonzero(ok)
        features[cls[ii, jj] + 1, ii, jj] = 1.0
    return FeatureMap(features, s), DepthLogits(logits)


def encode_image(
    img: np.ndarray,
    spec: EncoderSpec,
    bins: DepthBins,
    depth: Optional[np.ndarray] = None,
) -> tuple[FeatureMap, DepthLogits]:
    """Encode one H x W x 3 image into stride-`spec.stride` features and depth logits.

    ``depth_oracle`` puts +40 on the bin holding the nearest true depth in
    each feature cell (-40 elsewhere). Its feature channel 0 marks cells with
    a visible surface and channels 1..K one-hot the surface class read from
    the image shading. Cells without surface get zero features.
    """
    h, w = img.shape[:2]
    if h % spec.stride or w % spec.stride:
        raise InvalidInputError(f"image {w}x{h} is not divisible by stride {spec.stride}")
    if spec.kind == "toy_conv":
        return _toy_conv(img, spec, bins)
    if depth is None:
        raise InvalidInputError("depth_oracle encoder needs a ground-truth depth raster")
    if depth.shape != (h, w):
        raise InvalidInputError(f"depth raster {depth.shape} does not match image {(h, w)}")
    return _depth_oracle(img, depth, spec, bins)


def _conv3x3(x: np.ndarray, weight: np.ndarray, bias: Optional[np.ndarray]) -> np.ndarray:
    c, nx, ny = x.shape
    padded = np.pad(x, ((0, 0), (1, 1), (1, 1)))
    cols = np.stack([padded[:, dx : dx + nx, dy : dy + ny] for dx in range(3) for dy in range(3)], axis=1)
    out = np.tensordot(weight, cols.reshape(c * 9, nx * ny), axes=([1], [0])).reshape(-1, nx, ny)
    if bias is not None:
        out += bias[:, None, None]
    return out


def encode_bev(f: BevFeature, spec: BevEncoderSpec) -> BevFeature:
    """Identity, or a seeded stack of shape-preserving 3x3 convolutions with ReLU between layers."""
    if spec.mode == "identity":
        return f
    x = np.asarray(f.data, dtype=np.float64)
    c = x.shape[0]
    rng = np.random.default_rng(spec.seed)
    for layer in range(spec.layers):
        weight = rng.standard_normal((c, c * 9)) / np.sqrt(c * 9)
        bias = 0.1 * rng.standard_normal(c) if spec.bias else None
        x = _conv3x3(x, weight, bias)
        if layer < spec.layers - 1:
            x = np.maximum(x, 0.0)
    return BevFeature(x)
