"""Ground-plane oriented 3D boxes and angle helpers."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Any, Mapping

import numpy as np

from .errors import InvalidParameterError


def wrap_angle(a: float) -> float:
    """Wrap to (-pi, pi]."""
    if -math.pi < a <= math.pi:
        return a
    w = math.pi - math.fmod(math.pi - a, 2.0 * math.pi)
    if w <= -math.pi:
        w += 2.0 * math.pi
    elif w > math.pi:
        w -= 2.0 * math.pi
    return w


def wrap_angles(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    w = np.pi - np.mod(np.pi - a, 2.0 * np.pi)
    w = np.where(w <= -np.pi, w + 2.0 * np.pi, w)
    return np.where((a > -np.pi) & (a <= np.pi), a, w)


@dataclass(frozen=True)
class Box3D:
    """3D box in the ego frame.

    ``dims`` is (width, length, height); length runs along the heading ``yaw``
    (radians, counter-clockwise from +x). Velocity is the ground-plane (vx, vy).
    """

    center: tuple[float, float, float]
    dims: tuple[float, float, float]
    yaw: float = 0.0
    velocity: tuple[float, float] = (0.0, 0.0)
    class_id: int = 0
    attribute_id: int = 0
    score: float = 1.0

    def __post_init__(self) -> None:
        center = tuple(float(v) for v in self.center)
        dims = tuple(float(v) for v in self.dims)
        velocity = tuple(float(v) for v in self.velocity)
        if len(center) != 3 or len(dims) != 3 or len(velocity) != 2:
            raise InvalidParameterError("box needs a 3-vector center, 3 dims and a 2-vector velocity")
        if not all(math.isfinite(v) for v in center + dims + velocity + (self.yaw, self.score)):
            raise InvalidParameterError("box fields must be finite")
        if min(dims) <= 0:
            raise InvalidParameterError(f"box dims must be positive, got {dims}")
        if not 0.0 <= self.score <= 1.0:
            raise InvalidParameterError(f"score must be in [0, 1], got {self.score}")
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "velocity", velocity)
        object.__setattr__(self, "yaw", wrap_angle(float(self.yaw)))
        object.__setattr__(self, "class_id", int(self.class_id))
        object.__setattr__(self, "attribute_id", int(self.attribute_id))
        object.__setattr__(self, "score", float(self.score))

    @property
    def xy(self) -> np.ndarray:
        return np.array(self.center[:2])

    def with_score(self, score: float) -> "Box3D":
        return replace(self, score=score)

    def footprint(self) -> np.ndarray:
        """Ground-plane corners (4 x 2), counter-clockwise."""
        w, l, _ = self.dims
        c, s = math.cos(self.yaw), math.sin(self.yaw)
        fwd = np.array([c, s]) * (l / 2)
        side = np.array([-s, c]) * (w / 2)
        ctr = self.xy
        return np.array([ctr + fwd - side, ctr + fwd + side, ctr - fwd + side, ctr - fwd - side])

    def corners(self) -> np.ndarray:
        """All eight corners (8 x 3): bottom ring then top ring."""
        fp = self.footprint()
        z0 = self.center[2] - self.dims[2] / 2
        z1 = self.center[2] + self.dims[2] / 2
        return np.vstack([np.c_[fp, np.full(4, z0)], np.c_[fp, np.full(4, z1)]])

    def to_dict(self) -> dict[str, Any]:
        return {
            "center": list(self.center),
            "dims": list(self.dims),
            "yaw": self.yaw,
            "velocity": list(self.velocity),
            "class_id": self.class_id,
            "attribute_id": self.attribute_id,
            "score": self.score,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "Box3D":
        return cls(
            center=tuple(d["center"]),
            dims=tuple(d["dims"]),
            yaw=d.get("yaw", 0.0),
            velocity=tuple(d.get("velocity", (0.0, 0.0))),
            class_id=d.get("class_id", 0),
            attribute_id=d.get("attribute_id", 0),
            score=d.get("score", 1.0),
        )
