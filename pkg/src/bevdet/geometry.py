"""Camera projection, pose composition and image-augmentation algebra.

Pixel coordinates are continuous: pixel ``(i, j)`` covers ``[j, j+1) x [i, i+1)``
and its center sits at ``(j + 0.5, i + 0.5)``. Under this convention a
horizontal flip of a ``W``-wide image is ``x -> W - x``, which maps every pixel
center onto a pixel center and every stride-aligned feature-cell center onto a
feature-cell center.

Camera frame: x right, y down, z forward. Depths are z-depths.
"""

from __future__ import annotations

import contextlib
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterator, Sequence, Union

import numpy as np

from .errors import InvalidDepthError, InvalidParameterError

ArrayLike = Union[np.ndarray, Sequence[float], float]

_ORTHO_TOL = 1e-9
_DET_TOL = 1e-12

# Mutation hook for the invariant suite: when set, the augmented unprojection
# applies A instead of its inverse. Never set outside of `corrupted_inverse()`.
_CORRUPT_INVERSE = False


@contextlib.contextmanager
def corrupted_inverse() -> Iterator[None]:
    """Temporarily break `unproject_augmented` (test hook for mutation checks)."""
    global _CORRUPT_INVERSE
    previous = _CORRUPT_INVERSE
    _CORRUPT_INVERSE = True
    try:
        yield
    finally:
        _CORRUPT_INVERSE = previous


def _affine_inverse(m: np.ndarray) -> np.ndarray:
    lin = np.linalg.inv(m[:2, :2])
    out = np.zeros((3, 3))
    out[:2, :2] = lin
    out[:2, 2] = -lin @ m[:2, 2]
    out[2, 2] = 1.0
    return out


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole intrinsics in pixel units."""

    matrix: np.ndarray

    def __post_init__(self) -> None:
        m = np.array(self.matrix, dtype=np.float64)
        if m.shape != (3, 3) or not np.all(np.isfinite(m)):
            raise InvalidParameterError(f"intrinsics must be a finite 3x3 matrix, got shape {m.shape}")
        if not (m[2, 0] == 0.0 and m[2, 1] == 0.0 and m[2, 2] == 1.0):
            raise InvalidParameterError(f"intrinsics bottom row must be (0, 0, 1), got {m[2].tolist()}")
        if m[0, 0] <= 0 or m[1, 1] <= 0:
            raise InvalidParameterError("focal lengths must be positive")
        if abs(np.linalg.det(m)) < _DET_TOL:
            raise InvalidParameterError("intrinsics are singular")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @classmethod
    def from_params(cls, fx: float, fy: float, cx: float, cy: float, skew: float = 0.0) -> "CameraIntrinsics":
        return cls(np.array([[fx, skew, cx], [0.0, fy, cy], [0.0, 0.0, 1.0]]))

    @property
    def fx(self) -> float:
        return float(self.matrix[0, 0])

    @property
    def fy(self) -> float:
        return float(self.matrix[1, 1])

    @property
    def cx(self) -> float:
        return float(self.matrix[0, 2])

    @property
    def cy(self) -> float:
        return float(self.matrix[1, 2])

    @cached_property
    def inverse(self) -> np.ndarray:
        # The inverse of a matrix with bottom row (0,0,1) has the same bottom row;
        # pin it so unprojected z equals the input depth bit-for-bit.
        inv = np.linalg.inv(self.matrix)
        inv[2] = (0.0, 0.0, 1.0)
        inv.setflags(write=False)
        return inv

    def project(self, points: ArrayLike) -> np.ndarray:
        """Perspective projection of camera-frame points (..., 3) to pixels (..., 2)."""
        pts = np.asarray(points, dtype=np.float64)
        uvw = pts @ self.matrix.T
        return uvw[..., :2] / uvw[..., 2:3]


@dataclass(frozen=True)
class Pose3D:
    """Rigid transform mapping points from a source frame into a target frame."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self) -> None:
        r = np.array(self.rotation, dtype=np.float64)
        t = np.array(self.translation, dtype=np.float64).reshape(-1)
        if r.shape != (3, 3) or t.shape != (3,):
            raise InvalidParameterError("pose needs a 3x3 rotation and a 3-vector translation")
        if not (np.all(np.isfinite(r)) and np.all(np.isfinite(t))):
            raise InvalidParameterError("pose entries must be finite")
        if np.max(np.abs(r @ r.T - np.eye(3))) > _ORTHO_TOL or abs(np.linalg.det(r) - 1.0) > _ORTHO_TOL:
            raise InvalidParameterError("rotation must be orthonormal with determinant +1")
        r.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "Pose3D":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_yaw(cls, yaw: float, translation: ArrayLike = (0.0, 0.0, 0.0)) -> "Pose3D":
        """Rotation about +z by `yaw` radians."""
        c, s = math.cos(yaw), math.sin(yaw)
        return cls(np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]), np.asarray(translation, dtype=np.float64))

    def inverse(self) -> "Pose3D":
        rt = self.rotation.T
        return Pose3D(rt, -rt @ self.translation)

    def compose(self, other: "Pose3D") -> "Pose3D":
        """self ∘ other: apply `other` first."""
        return Pose3D(self.rotation @ other.rotation, self.rotation @ other.translation + self.translation)

    def apply(self, points: ArrayLike) -> np.ndarray:
        pts = np.asarray(points, dtype=np.float64)
        return pts @ self.rotation.T + self.translation


# Elementary image-plane operations. Each maps pre-op pixel coordinates to
# post-op pixel coordinates.


@dataclass(frozen=True)
class Flip:
    """Horizontal mirror of a `width`-pixel-wide image: x -> width - x."""

    width: float

    def matrix(self) -> np.ndarray:
        return np.array([[-1.0, 0.0, float(self.width)], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])


@dataclass(frozen=True)
class Scale:
    factor: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.factor) and self.factor > 0):
            raise InvalidParameterError(f"scale must be positive, got {self.factor}")

    def matrix(self) -> np.ndarray:
        s = float(self.factor)
        return np.diag([s, s, 1.0])


@dataclass(frozen=True)
class Rotate:
    """In-plane rotation by `angle` radians about `center` (pixels)."""

    angle: float
    center: tuple[float, float] = (0.0, 0.0)

    def matrix(self) -> np.ndarray:
        c, s = math.cos(self.angle), math.sin(self.angle)
        cx, cy = self.center
        return np.array(
            [
                [c, -s, cx - c * cx + s * cy],
                [s, c, cy - s * cx - c * cy],
                [0.0, 0.0, 1.0],
            ]
        )


@dataclass(frozen=True)
class Crop:
    """Crop whose top-left corner sits at (x, y): translation by (-x, -y)."""

    x: float
    y: float

    def matrix(self) -> np.ndarray:
        return np.array([[1.0, 0.0, -float(self.x)], [0.0, 1.0, -float(self.y)], [0.0, 0.0, 1.0]])


AugOp = Union[Flip, Scale, Rotate, Crop]


@dataclass(frozen=True)
class AugTransform2D:
    """Homogeneous image-plane augmentation ``p_aug = matrix @ p``.

    ``ops`` records the elementary operations that produced ``matrix`` (empty
    for transforms built directly from a matrix).
    """

    matrix: np.ndarray
    ops: tuple[AugOp, ...] = field(default=())

    def __post_init__(self) -> None:
        m = np.array(self.matrix, dtype=np.float64)
        if m.shape != (3, 3) or not np.all(np.isfinite(m)):
            raise InvalidParameterError("augmentation must be a finite 3x3 matrix")
        if not (m[2, 0] == 0.0 and m[2, 1] == 0.0 and m[2, 2] == 1.0):
            raise InvalidParameterError("augmentation must be affine (bottom row 0, 0, 1)")
        if abs(np.linalg.det(m[:2, :2])) < _DET_TOL:
            raise InvalidParameterError("augmentation is singular")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "ops", tuple(self.ops))

    @classmethod
    def identity(cls) -> "AugTransform2D":
        return cls(np.eye(3))

    @cached_property
    def inverse(self) -> np.ndarray:
        inv = _affine_inverse(self.matrix)
        inv.setflags(write=False)
        return inv

    @property
    def flip(self) -> bool:
        return sum(isinstance(op, Flip) for op in self.ops) % 2 == 1

    @property
    def scale(self) -> float:
        return math.prod(op.factor for op in self.ops if isinstance(op, Scale))

    @property
    def rotation(self) -> float:
        return sum(op.angle for op in self.ops if isinstance(op, Rotate))

    @property
    def crop(self) -> tuple[float, float]:
        x = sum(op.x for op in self.ops if isinstance(op, Crop))
        y = sum(op.y for op in self.ops if isinstance(op, Crop))
        return (x, y)

    def apply(self, points: ArrayLike) -> np.ndarray:
        """Map pixel points (..., 2) forward through the augmentation."""
        return _apply_affine(self.matrix, points)

    def apply_inverse(self, points: ArrayLike) -> np.ndarray:
        return _apply_affine(self.inverse, points)


def _apply_affine(m: np.ndarray, points: ArrayLike) -> np.ndarray:
    pts = np.asarray(points, dtype=np.float64)
    return pts @ m[:2, :2].T + m[:2, 2]


def compose_aug(ops: Sequence[AugOp]) -> AugTransform2D:
    """Compose elementary operations applied in list order.

    The first op acts first on the pixel, so the matrix is
    ``M_n @ ... @ M_2 @ M_1``. Augmentation samplers emit the order
    flip, scale, rotate, crop.
    """
    m = np.eye(3)
    for op in ops:
        if not isinstance(op, (Flip, Scale, Rotate, Crop)):
            raise InvalidParameterError(f"unknown augmentation op {op!r}")
        m = op.matrix() @ m
    return AugTransform2D(m, tuple(ops))


def _check_depth(d: np.ndarray) -> None:
    if not np.all(np.isfinite(d)) or np.any(d <= 0):
        raise InvalidDepthError("depth must be finite and strictly positive")


def pixel_to_camera(p: ArrayLike, d: ArrayLike, K: CameraIntrinsics) -> np.ndarray:
    """Unproject pixel(s) at z-depth(s) ``d`` into the camera frame.

    ``p`` has shape (..., 2), ``d`` broadcasts against ``p[..., 0]``.
    Returns (..., 3) with the z component equal to ``d``.
    """
    pts = np.asarray(p, dtype=np.float64)
    depth = np.asarray(d, dtype=np.float64)
    _check_depth(depth)
    x, y = pts[..., 0], pts[..., 1]
    x, y, depth = np.broadcast_arrays(x, y, depth)
    homog = np.stack([x * depth, y * depth, depth], axis=-1)
    return homog @ K.inverse.T


def unproject_augmented(p_aug: ArrayLike, d: ArrayLike, K: CameraIntrinsics, A: AugTransform2D) -> np.ndarray:
    """Unproject pixels of an augmented image, undoing ``A`` first."""
    undo = A.matrix if _CORRUPT_INVERSE else A.inverse
    return pixel_to_camera(_apply_affine(undo, p_aug), d, K)


def camera_to_ego(p: ArrayLike, pose: Pose3D) -> np.ndarray:
    return pose.apply(p)
