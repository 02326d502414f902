"""Footprint modeling and point-in-time collision predicates.

The rectangular vehicle footprint is covered by one circle (near-square
footprints, l/w < 1.3) or three overlapped circles along the body axis
(l/w >= 1.3).  Both covers contain the full rectangle, so the predicates are
conservative.  All checks are pure functions over immutable snapshots.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import CurveParams, Pose, local_curve_samples


def disc_radius(l: float, w: float) -> float:
    """Covering-circle radius for a rectangle of length l and width w."""
    if l <= 0.0 or w <= 0.0:
        raise ValueError("footprint dimensions must be positive")
    if l / w < 1.3:
        return math.sqrt((l * l + w * w) / 4.0)
    return math.sqrt((l * l + 9.0 * w * w) / 36.0)


@dataclass(frozen=True)
class FootprintSpec:
    """Rectangular footprint plus its circle-cover parameters."""

    length: float
    width: float
    mode: str  # "one-circle" | "three-circle"
    radius: float
    center_offsets: tuple[float, ...]

    @classmethod
    def from_dimensions(cls, length: float, width: float, single_circle: bool = False) -> "FootprintSpec":
        """Build the spec per the aspect-ratio rule; ``single_circle`` forces
        the one-circle cover (pedestrians)."""
        radius = disc_radius(length, width)
        if single_circle or length / width < 1.3:
            if single_circle:
                radius = math.sqrt(length**2 + width**2) / 2.0
            return cls(length, width, "one-circle", radius, (0.0,))
        return cls(length, width, "three-circle", radius, (-length / 3.0, 0.0, length / 3.0))


def default_robot_footprint() -> FootprintSpec:
    """Default car-sized footprint (4.6 m x 1.9 m, three-circle cover)."""
    return FootprintSpec.from_dimensions(4.6, 1.9)


def footprint_circles(spec: FootprintSpec, pose: Pose) -> np.ndarray:
    """Circle centers of the cover at ``pose``; shape (k, 2), common radius spec.radius."""
    c, s = math.cos(pose.theta), math.sin(pose.theta)
    offs = np.asarray(spec.center_offsets)
    return np.stack([pose.x + c * offs, pose.y + s * offs], axis=-1)


def footprint_circles_batch(spec: FootprintSpec, poses: np.ndarray) -> np.ndarray:
    """Circle centers for an (N, 3) pose array; shape (N, k, 2)."""
    c = np.cos(poses[:, 2])[:, None]
    s = np.sin(poses[:, 2])[:, None]
    offs = np.asarray(spec.center_offsets)[None, :]
    return np.stack([poses[:, 0:1] + c * offs, poses[:, 1:2] + s * offs], axis=-1)


@dataclass(frozen=True)
class ObstacleShape:
    """A static obstacle: disk, simple polygon, or a footprint at a fixed pose."""

    kind: str  # "disk" | "polygon" | "footprint"
    center: tuple[float, float] = (0.0, 0.0)
    radius: float = 0.0
    vertices: tuple[tuple[float, float], ...] = ()
    footprint: FootprintSpec | None = None
    pose: Pose | None = None

    @classmethod
    def disk(cls, x: float, y: float, radius: float) -> "ObstacleShape":
        if radius <= 0.0:
            raise ValueError("disk radius must be positive")
        return cls(kind="disk", center=(x, y), radius=radius)

    @classmethod
    def polygon(cls, vertices) -> "ObstacleShape":
        verts = tuple((float(x), float(y)) for x, y in vertices)
        if len(verts) < 3:
            raise ValueError("polygon needs at least 3 vertices")
        return cls(kind="polygon", vertices=verts)

    @classmethod
    def footprint_at(cls, spec: FootprintSpec, pose: Pose) -> "ObstacleShape":
        return cls(kind="footprint", footprint=spec, pose=pose)


def _point_in_polygon(px, py, verts: np.ndarray) -> np.ndarray:
    """Even-odd rule; px/py broadcastable arrays."""
    inside = np.zeros(np.broadcast(px, py).shape, dtype=bool)
    n = len(verts)
    for i in range(n):
        x1, y1 = verts[i]
        x2, y2 = verts[(i + 1) % n]
        cond = (y1 > py) != (y2 > py)
        with np.errstate(divide="ignore", invalid="ignore"):
            xint = x1 + (py - y1) * (x2 - x1) / (y2 - y1)
        inside ^= cond & (px < xint)
    return inside


def _dist_to_polygon(px, py, verts: np.ndarray) -> np.ndarray:
    """Distance from points to the polygon boundary (0 if on it)."""
    n = len(verts)
    best = np.full(np.broadcast(px, py).shape, np.inf)
    for i in range(n):
        a = verts[i]
        b = verts[(i + 1) % n]
        ab = b - a
        denom = float(ab @ ab)
        t = ((px - a[0]) * ab[0] + (py - a[1]) * ab[1]) / max(denom, 1e-12)
        t = np.clip(t, 0.0, 1.0)
        dx = a[0] + t * ab[0] - px
        dy = a[1] + t * ab[1] - py
        best = np.minimum(best, np.hypot(dx, dy))
    return best


def circles_hit_obstacle(centers: np.ndarray, radius: float, obstacle: ObstacleShape,
                         margin: float = 0.0) -> np.ndarray:
    """Whether each of the leading-axis circle sets intersects the obstacle.

    ``centers`` has shape (..., k, 2); the result collapses the k axis with any().
    """
    if obstacle.kind == "disk":
        d = np.hypot(centers[..., 0] - obstacle.center[0], centers[..., 1] - obstacle.center[1])
        return np.any(d <= radius + obstacle.radius + margin, axis=-1)
    if obstacle.kind == "polygon":
        verts = np.asarray(obstacle.vertices)
        px, py = centers[..., 0], centers[..., 1]
        hit = _point_in_polygon(px, py, verts) | (_dist_to_polygon(px, py, verts) <= radius + margin)
        return np.any(hit, axis=-1)
    if obstacle.kind == "footprint":
        oc = footprint_circles(obstacle.footprint, obstacle.pose)  # (m, 2)
        d = np.linalg.norm(centers[..., :, None, :] - oc[None, :, :], axis=-1)
        return np.any(d <= radius + obstacle.footprint.radius + margin, axis=(-2, -1))
    raise ValueError(f"unknown obstacle kind {obstacle.kind!r}")


def clearance_to_obstacle(centers: np.ndarray, radius: float, obstacle: ObstacleShape) -> float:
    """Minimum gap between any cover circle and the obstacle (negative when overlapping)."""
    if obstacle.kind == "disk":
        d = np.hypot(centers[..., 0] - obstacle.center[0], centers[..., 1] - obstacle.center[1])
        return float(np.min(d) - radius - obstacle.radius)
    if obstacle.kind == "polygon":
        verts = np.asarray(obstacle.vertices)
        px, py = centers[..., 0], centers[..., 1]
        d = _dist_to_polygon(px, py, verts)
        d = np.where(_point_in_polygon(px, py, verts), -d, d)
        return float(np.min(d) - radius)
    if obstacle.kind == "footprint":
        oc = footprint_circles(obstacle.footprint, obstacle.pose)
        d = np.linalg.norm(centers[..., :, None, :] - oc[None, :, :], axis=-1)
        return float(np.min(d) - radius - obstacle.footprint.radius)
    raise ValueError(f"unknown obstacle kind {obstacle.kind!r}")


def pose_in_collision(spec: FootprintSpec, pose: Pose, obstacles, margin: float = 0.0) -> bool:
    """True iff any footprint circle intersects any obstacle in the snapshot."""
    centers = footprint_circles(spec, pose)[None, :, :]
    for obs in obstacles:
        if bool(circles_hit_obstacle(centers, spec.radius, obs, margin)[0]):
            return True
    return False


def poses_in_collision(spec: FootprintSpec, poses: np.ndarray, obstacles,
                       margin: float = 0.0) -> np.ndarray:
    """Vectorized pose_in_collision for an (N, 3) pose array; returns (N,) bools."""
    poses = np.asarray(poses, dtype=float)
    centers = footprint_circles_batch(spec, poses)
    hit = np.zeros(len(poses), dtype=bool)
    for obs in obstacles:
        hit |= circles_hit_obstacle(centers, spec.radius, obs, margin)
    return hit


def curve_in_collision(spec: FootprintSpec, params: CurveParams, base: Pose, obstacles,
                       ds: float, margin: float = 0.0) -> bool:
    """True iff any sampled pose along the curve collides with the obstacle set."""
    if ds > spec.radius:
        raise ValueError("ds must not exceed the footprint circle radius")
    offsets = np.asarray(local_curve_samples(params, ds))
    c, s = math.cos(base.theta), math.sin(base.theta)
    poses = np.empty_like(offsets)
    poses[:, 0] = base.x + c * offsets[:, 0] - s * offsets[:, 1]
    poses[:, 1] = base.y + s * offsets[:, 0] + c * offsets[:, 1]
    poses[:, 2] = base.theta + offsets[:, 2]
    return bool(np.any(poses_in_collision(spec, poses, obstacles, margin)))
