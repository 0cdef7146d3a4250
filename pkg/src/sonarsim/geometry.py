"""Coordinate frames, rigid poses and plane mirroring.

Angle conventions used throughout the package: azimuth ``theta`` is measured
in the sonar x-y plane from +x toward +y, elevation ``phi`` from the x-y plane
toward +z. The sonar looks along +x.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np


class DegenerateInputError(ValueError):
    """Raised when an input has no well-defined result (e.g. a zero vector)."""


class SphericalPoint(NamedTuple):
    r: float
    theta: float
    phi: float


class CartesianPoint(NamedTuple):
    x: float
    y: float
    z: float


class PlanePoint(NamedTuple):
    x: float
    y: float


def spherical_to_cartesian(p: SphericalPoint) -> CartesianPoint:
    r, theta, phi = p
    if r < 0:
        raise ValueError(f"range must be non-negative, got {r}")
    cp = math.cos(phi)
    return CartesianPoint(r * cp * math.cos(theta), r * cp * math.sin(theta), r * math.sin(phi))


def cartesian_to_spherical(p: CartesianPoint) -> SphericalPoint:
    """Inverse of :func:`spherical_to_cartesian`.

    At the pole (x = y = 0) the azimuth is defined as 0.
    """
    x, y, z = (float(c) for c in p)
    r = math.sqrt(x * x + y * y + z * z)
    if r == 0.0:
        raise DegenerateInputError("cannot convert the zero vector to spherical coordinates")
    rho = math.hypot(x, y)
    theta = math.atan2(y, x) if rho > 0.0 else 0.0
    if theta == -math.pi:
        theta = math.pi
    return SphericalPoint(r, theta, math.atan2(z, rho))


def polar_to_plane(r: float, theta: float) -> PlanePoint:
    if r < 0:
        raise ValueError(f"range must be non-negative, got {r}")
    return PlanePoint(r * math.cos(theta), r * math.sin(theta))


def spherical_directions(theta: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """Unit vectors for broadcastable azimuth/elevation arrays, shape ``(..., 3)``."""
    theta, phi = np.broadcast_arrays(np.asarray(theta, float), np.asarray(phi, float))
    cp = np.cos(phi)
    return np.stack([cp * np.cos(theta), cp * np.sin(theta), np.sin(phi)], axis=-1)


def azimuth_elevation(v: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorised ``(r, theta, phi)`` of points ``v`` with shape ``(..., 3)``."""
    v = np.asarray(v, float)
    x, y, z = v[..., 0], v[..., 1], v[..., 2]
    rho = np.hypot(x, y)
    r = np.sqrt(x * x + y * y + z * z)
    return r, np.arctan2(y, x), np.arctan2(z, rho)


@dataclass(frozen=True)
class RigidPose:
    """Sonar-to-world transform ``x_world = rotation @ x_sonar + translation``."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        rot = np.array(self.rotation, dtype=float).reshape(3, 3)
        trans = np.array(self.translation, dtype=float).reshape(3)
        if not np.allclose(rot @ rot.T, np.eye(3), atol=1e-9, rtol=0):
            raise ValueError("rotation is not orthonormal")
        if abs(np.linalg.det(rot) - 1.0) > 1e-9:
            raise ValueError("rotation must have determinant +1")
        if not np.all(np.isfinite(trans)):
            raise ValueError("translation must be finite")
        rot.setflags(write=False)
        trans.setflags(write=False)
        object.__setattr__(self, "rotation", rot)
        object.__setattr__(self, "translation", trans)

    @classmethod
    def identity(cls) -> RigidPose:
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_euler(cls, roll: float = 0.0, pitch: float = 0.0, yaw: float = 0.0,
                   position=(0.0, 0.0, 0.0)) -> RigidPose:
        """Pose from roll/pitch/yaw in radians (applied as ``Rz(yaw) Ry(pitch) Rx(roll)``).

        Positive pitch tilts the sonar's +x axis downward (toward -z).
        """
        cr, sr = math.cos(roll), math.sin(roll)
        cp, sp = math.cos(pitch), math.sin(pitch)
        cy, sy = math.cos(yaw), math.sin(yaw)
        rx = np.array([[1, 0, 0], [0, cr, -sr], [0, sr, cr]])
        ry = np.array([[cp, 0, sp], [0, 1, 0], [-sp, 0, cp]])
        rz = np.array([[cy, -sy, 0], [sy, cy, 0], [0, 0, 1]])
        return cls(rz @ ry @ rx, np.asarray(position, float))

    @property
    def origin(self) -> np.ndarray:
        return self.translation

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Map sonar-frame points ``(..., 3)`` to the world frame."""
        return np.asarray(points, float) @ self.rotation.T + self.translation

    def rotate(self, vectors: np.ndarray) -> np.ndarray:
        return np.asarray(vectors, float) @ self.rotation.T

    def to_local(self, points: np.ndarray) -> np.ndarray:
        """Map world-frame points ``(..., 3)`` into the sonar frame."""
        return (np.asarray(points, float) - self.translation) @ self.rotation


@dataclass(frozen=True)
class Plane:
    """Plane ``{x : normal . x = offset}``; ``offset`` is the signed distance to the origin."""

    normal: tuple[float, float, float]
    offset: float

    def __post_init__(self):
        n = tuple(float(c) for c in self.normal)
        if len(n) != 3 or abs(math.sqrt(sum(c * c for c in n)) - 1.0) > 1e-12:
            raise ValueError(f"plane normal must be a unit 3-vector, got {self.normal}")
        object.__setattr__(self, "normal", n)
        object.__setattr__(self, "offset", float(self.offset))

    @classmethod
    def from_normal(cls, normal, offset: float) -> Plane:
        """Build a plane from a not-necessarily-normalised normal; ``offset`` is in metres."""
        n = np.asarray(normal, float)
        norm = np.linalg.norm(n)
        if norm == 0:
            raise DegenerateInputError("plane normal must be non-zero")
        return cls(tuple(n / norm), offset)

    @classmethod
    def horizontal(cls, height: float = 0.0) -> Plane:
        return cls((0.0, 0.0, 1.0), height)

    def signed_distance(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(points, float) @ np.asarray(self.normal) - self.offset


def mirror_points(points: np.ndarray, plane: Plane) -> np.ndarray:
    """Reflect an array of points ``(..., 3)`` across ``plane``."""
    pts = np.asarray(points, float)
    n = np.asarray(plane.normal)
    dist = pts @ n - plane.offset
    return pts - 2.0 * dist[..., None] * n


def mirror_vectors(vectors: np.ndarray, plane: Plane) -> np.ndarray:
    """Reflect free vectors (directions, normals) across the plane orientation."""
    v = np.asarray(vectors, float)
    n = np.asarray(plane.normal)
    return v - 2.0 * (v @ n)[..., None] * n


def mirror_across_plane(p: CartesianPoint, g: Plane) -> CartesianPoint:
    return CartesianPoint(*(float(c) for c in mirror_points(np.asarray(p, float), g)))
