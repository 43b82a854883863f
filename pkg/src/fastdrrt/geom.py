"""Planar serial-chain arms built from capsule links, plus exact collision tests.

Everything here is a pure function of its inputs.  Batched variants
(``link_segments_batch``, ``segment_distance``) carry the heavy lifting for
voxelization and the exact sweep oracle; the scalar helpers wrap them.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np


class GeometryError(ValueError):
    """Invalid robot, configuration or obstacle definition."""


@dataclass(frozen=True)
class RobotModel:
    base_position: np.ndarray
    link_lengths: tuple
    link_radius: float
    joint_limits: np.ndarray  # (n_joints, 2)

    def __post_init__(self):
        base = np.asarray(self.base_position, dtype=float).reshape(2)
        lengths = tuple(float(x) for x in self.link_lengths)
        limits = np.asarray(self.joint_limits, dtype=float).reshape(len(lengths), 2)
        if not lengths or any(L <= 0 for L in lengths):
            raise GeometryError("link_lengths must be non-empty and positive")
        if not self.link_radius > 0:
            raise GeometryError("link_radius must be positive")
        if np.any(limits[:, 0] >= limits[:, 1]):
            raise GeometryError("joint_limits need lower < upper per joint")
        base.setflags(write=False)
        limits.setflags(write=False)
        object.__setattr__(self, "base_position", base)
        object.__setattr__(self, "link_lengths", lengths)
        object.__setattr__(self, "link_radius", float(self.link_radius))
        object.__setattr__(self, "joint_limits", limits)

    @property
    def dof(self) -> int:
        return len(self.link_lengths)

    @property
    def reach(self) -> float:
        return float(sum(self.link_lengths))

    def distal_lengths(self) -> np.ndarray:
        """Chain length from each joint to the tip (largest lever arm of that joint)."""
        return np.cumsum(np.asarray(self.link_lengths)[::-1])[::-1]

    def within_limits(self, q, tol: float = 1e-12) -> bool:
        q = np.asarray(q, dtype=float)
        return bool(np.all(q >= self.joint_limits[:, 0] - tol) and np.all(q <= self.joint_limits[:, 1] + tol))

    def to_dict(self) -> dict:
        return {
            "base_position": [float(x) for x in self.base_position],
            "link_lengths": list(self.link_lengths),
            "link_radius": self.link_radius,
            "joint_limits": [[float(a), float(b)] for a, b in self.joint_limits],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RobotModel":
        return cls(d["base_position"], tuple(d["link_lengths"]), d["link_radius"], d["joint_limits"])

    def __eq__(self, other):
        if not isinstance(other, RobotModel):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    def __hash__(self):
        return hash((tuple(self.base_position), self.link_lengths, self.link_radius))


@dataclass(frozen=True)
class Capsule:
    endpoint_a: np.ndarray
    endpoint_b: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "endpoint_a", np.asarray(self.endpoint_a, dtype=float).reshape(2))
        object.__setattr__(self, "endpoint_b", np.asarray(self.endpoint_b, dtype=float).reshape(2))
        if self.radius < 0:
            raise GeometryError("capsule radius must be >= 0")


@dataclass(frozen=True)
class Disc:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float).reshape(2))
        if not self.radius > 0:
            raise GeometryError("disc radius must be positive")

    def to_dict(self) -> dict:
        return {"type": "disc", "center": [float(x) for x in self.center], "radius": float(self.radius)}


@dataclass(frozen=True)
class Rect:
    min_corner: np.ndarray
    max_corner: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.min_corner, dtype=float).reshape(2)
        hi = np.asarray(self.max_corner, dtype=float).reshape(2)
        if np.any(lo >= hi):
            raise GeometryError("rectangle needs min_corner < max_corner componentwise")
        object.__setattr__(self, "min_corner", lo)
        object.__setattr__(self, "max_corner", hi)

    def to_dict(self) -> dict:
        return {
            "type": "rect",
            "min_corner": [float(x) for x in self.min_corner],
            "max_corner": [float(x) for x in self.max_corner],
        }


Obstacle = Union[Disc, Rect]


def obstacle_from_dict(d: dict) -> Obstacle:
    kind = d.get("type")
    if kind == "disc":
        return Disc(d["center"], d["radius"])
    if kind == "rect":
        return Rect(d["min_corner"], d["max_corner"])
    raise GeometryError(f"unknown obstacle type {kind!r}")


# ---------------------------------------------------------------------------
# kinematics


def _check_dim(robot: RobotModel, q: np.ndarray):
    if q.shape[-1] != robot.dof:
        raise GeometryError(f"configuration has {q.shape[-1]} angles, robot has {robot.dof} joints")


def joint_positions_batch(robot: RobotModel, Q) -> np.ndarray:
    """Joint positions (base, joint 1, ..., tip) for a batch of configurations, shape (S, dof+1, 2)."""
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    _check_dim(robot, Q)
    theta = np.cumsum(Q, axis=1)
    lengths = np.asarray(robot.link_lengths)
    steps = np.stack([lengths * np.cos(theta), lengths * np.sin(theta)], axis=-1)
    pts = np.empty((Q.shape[0], robot.dof + 1, 2))
    pts[:, 0] = robot.base_position
    pts[:, 1:] = robot.base_position + np.cumsum(steps, axis=1)
    return pts


def link_segments_batch(robot: RobotModel, Q):
    """Link axis segments ``(A, B)``, each of shape (S, dof, 2)."""
    pts = joint_positions_batch(robot, Q)
    return pts[:, :-1], pts[:, 1:]


def forward_kinematics(robot: RobotModel, q) -> list:
    """One capsule per link; link j runs from joint j to joint j+1."""
    q = np.asarray(q, dtype=float)
    if q.ndim != 1:
        raise GeometryError("forward_kinematics expects a single configuration")
    pts = joint_positions_batch(robot, q[None])[0]
    return [Capsule(pts[j], pts[j + 1], robot.link_radius) for j in range(robot.dof)]


def interpolate(q_a, q_b, step: float) -> np.ndarray:
    """Configurations along the straight segment q_a -> q_b, endpoints included.

    The segment is split into a power-of-two number of pieces no longer than
    ``step``, so refining ``step`` always yields a superset of samples.
    """
    if not step > 0:
        raise GeometryError("interpolation step must be positive")
    q_a = np.asarray(q_a, dtype=float)
    q_b = np.asarray(q_b, dtype=float)
    length = float(np.linalg.norm(q_b - q_a))
    n = 1
    while length / n > step:
        n *= 2
    t = np.arange(n + 1) / n
    out = q_a[None, :] + t[:, None] * (q_b - q_a)[None, :]
    out[-1] = q_b  # exact endpoint, so edge volumes contain the node volumes bit-for-bit
    return out


# ---------------------------------------------------------------------------
# distances


def _cross(u, v):
    return u[..., 0] * v[..., 1] - u[..., 1] * v[..., 0]


def point_segment_distance(p, a, b) -> np.ndarray:
    p, a, b = (np.asarray(x, dtype=float) for x in (p, a, b))
    ab = b - a
    denom = np.sum(ab * ab, axis=-1)
    t = np.sum((p - a) * ab, axis=-1) / np.where(denom > 0, denom, 1.0)
    t = np.clip(np.where(denom > 0, t, 0.0), 0.0, 1.0)
    closest = a + t[..., None] * ab
    return np.sqrt(np.sum((p - closest) ** 2, axis=-1))


def segment_distance(a1, b1, a2, b2) -> np.ndarray:
    """Minimum distance between segments [a1,b1] and [a2,b2] (broadcasting over leading axes)."""
    a1, b1, a2, b2 = (np.asarray(x, dtype=float) for x in (a1, b1, a2, b2))
    d1 = _cross(b2 - a2, a1 - a2)
    d2 = _cross(b2 - a2, b1 - a2)
    d3 = _cross(b1 - a1, a2 - a1)
    d4 = _cross(b1 - a1, b2 - a1)
    crossing = (d1 * d2 < 0) & (d3 * d4 < 0)
    dist = np.minimum(
        np.minimum(point_segment_distance(a1, a2, b2), point_segment_distance(b1, a2, b2)),
        np.minimum(point_segment_distance(a2, a1, b1), point_segment_distance(b2, a1, b1)),
    )
    return np.where(crossing, 0.0, dist)


def capsule_capsule_collide(a: Capsule, b: Capsule) -> bool:
    d = segment_distance(a.endpoint_a, a.endpoint_b, b.endpoint_a, b.endpoint_b)
    return bool(d <= a.radius + b.radius)


def _rect_edges(rect: Rect):
    (x0, y0), (x1, y1) = rect.min_corner, rect.max_corner
    corners = np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]])
    return corners, np.roll(corners, -1, axis=0)


def segment_rect_distance(a, b, rect: Rect) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    ea, eb = _rect_edges(rect)
    d = segment_distance(a[..., None, :], b[..., None, :], ea, eb).min(axis=-1)
    inside = np.all((a >= rect.min_corner) & (a <= rect.max_corner), axis=-1)
    return np.where(inside, 0.0, d)


def _segments_hit_obstacles(A, B, radius: float, obstacles) -> np.ndarray:
    """Boolean per segment: does the capsule (A, B, radius) touch any obstacle."""
    hit = np.zeros(A.shape[:-1], dtype=bool)
    for obs in obstacles:
        if isinstance(obs, Disc):
            hit |= point_segment_distance(obs.center, A, B) <= radius + obs.radius
        else:
            hit |= segment_rect_distance(A, B, obs) <= radius
    return hit


def _self_collision_batch(robot: RobotModel, A, B) -> np.ndarray:
    """Non-adjacent link pairs only; adjacent links always touch at their shared joint."""
    hit = np.zeros(A.shape[0], dtype=bool)
    r2 = 2 * robot.link_radius
    for i in range(robot.dof):
        for j in range(i + 2, robot.dof):
            hit |= segment_distance(A[:, i], B[:, i], A[:, j], B[:, j]) <= r2
    return hit


def configs_collide(robot: RobotModel, Q, obstacles) -> np.ndarray:
    """Vectorized ``config_collides`` over a batch of configurations."""
    A, B = link_segments_batch(robot, Q)
    hit = _segments_hit_obstacles(A, B, robot.link_radius, obstacles).any(axis=1)
    return hit | _self_collision_batch(robot, A, B)


def config_collides(robot: RobotModel, q, obstacles) -> bool:
    return bool(configs_collide(robot, np.asarray(q, dtype=float)[None], obstacles)[0])


def motion_collides(robot: RobotModel, q_a, q_b, obstacles, step: float) -> bool:
    return bool(configs_collide(robot, interpolate(q_a, q_b, step), obstacles).any())


def config_distance(q_a, q_b) -> float:
    return float(np.linalg.norm(np.asarray(q_b, dtype=float) - np.asarray(q_a, dtype=float)))


def clamp_to_limits(robot: RobotModel, q) -> np.ndarray:
    return np.clip(np.asarray(q, dtype=float), robot.joint_limits[:, 0], robot.joint_limits[:, 1])


__all__ = [
    "GeometryError", "RobotModel", "Capsule", "Disc", "Rect", "Obstacle", "obstacle_from_dict",
    "forward_kinematics", "joint_positions_batch", "link_segments_batch", "interpolate",
    "point_segment_distance", "segment_distance", "segment_rect_distance", "capsule_capsule_collide",
    "config_collides", "configs_collide", "motion_collides", "config_distance", "clamp_to_limits",
]
