"""Ray grid generation, closest-hit queries and Lambertian shading.

The sonar frustum is sampled by an ``M x L`` grid of rays at the bin centres
of uniform azimuth (one row per beam) and elevation grids. Each ray's hit
distance goes to the distance map and its backscatter to the intensity map.
Rows are traced in parallel with numba. Every row writes its own slice, so
the output does not depend on the thread count.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, replace
from typing import NamedTuple

import numba
import numpy as np
from numba import njit, prange

from .geometry import RigidPose, spherical_directions
from .scene import Material, Scene

if "NUMBA_THREADING_LAYER" not in os.environ:
    try:  # the bundled TBB is often too old and only produces a warning
        from numba.np.ufunc import omppool  # noqa: F401

        numba.config.THREADING_LAYER = "omp"
    except ImportError:
        pass

NO_HIT = np.inf  # distance-map sentinel, never binned
HIT_EPSILON = 1e-9  # metres; rejects grazing self-intersections
_PARALLEL_EPS = 1e-14
_LEAF_SIZE = 16
_BOX_PAD = 1e-7


@dataclass(frozen=True)
class SonarIntrinsics:
    """Sensor layout. Angles are full fields of view in radians, ranges in metres."""

    n_beams: int = 128
    n_elev_samples: int = 256
    azimuth_fov: float = math.radians(30.0)
    elevation_fov: float = math.radians(14.0)
    r_min: float = 1.0
    r_max: float = 1.0 + 1288 / 256
    r_res: float = 1 / 256
    tvg_enabled: bool = True

    def __post_init__(self):
        if self.n_beams < 1 or self.n_elev_samples < 1:
            raise ValueError("n_beams and n_elev_samples must be >= 1")
        if not self.r_min < self.r_max:
            raise ValueError("r_min must be smaller than r_max")
        if not self.r_res > 0:
            raise ValueError("r_res must be positive")
        if self.r_min < 0:
            raise ValueError("r_min must be non-negative")
        for name in ("azimuth_fov", "elevation_fov"):
            if not 0.0 < getattr(self, name) < math.pi:
                raise ValueError(f"{name} must lie in (0, pi)")

    @property
    def n_range_bins(self) -> int:
        # the small slack keeps e.g. 5.03125/0.00390625 from rounding up to an extra bin
        return max(1, math.ceil((self.r_max - self.r_min) / self.r_res - 1e-9))

    @property
    def shape(self) -> tuple[int, int]:
        return self.n_beams, self.n_range_bins

    def beam_angles(self) -> np.ndarray:
        """Azimuth of each beam centre."""
        step = self.azimuth_fov / self.n_beams
        return -0.5 * self.azimuth_fov + (np.arange(self.n_beams) + 0.5) * step

    def elevation_angles(self) -> np.ndarray:
        step = self.elevation_fov / self.n_elev_samples
        return -0.5 * self.elevation_fov + (np.arange(self.n_elev_samples) + 0.5) * step

    def with_overrides(self, **kwargs) -> SonarIntrinsics:
        return replace(self, **kwargs)

    @classmethod
    def from_bins(cls, r_min: float, r_res: float, n_range_bins: int, **kwargs) -> SonarIntrinsics:
        return cls(r_min=r_min, r_res=r_res, r_max=r_min + n_range_bins * r_res, **kwargs)


def aris3000_like(**overrides) -> SonarIntrinsics:
    """Default profile: 128 beams x 1288 range bins.

    The 30 deg azimuth and 14 deg elevation apertures are nominal values,
    not device specifications.
    """
    return SonarIntrinsics(**overrides)


class RayGrid(NamedTuple):
    origins: np.ndarray  # (M, L, 3)
    directions: np.ndarray  # (M, L, 3), unit length


@dataclass(frozen=True, eq=False)
class RayBuffers:
    distances: np.ndarray  # (M, L), NO_HIT where nothing was hit
    intensities: np.ndarray  # (M, L), >= 0

    def __post_init__(self):
        if self.distances.shape != self.intensities.shape:
            raise ValueError("distance and intensity maps differ in shape")

    @property
    def shape(self) -> tuple[int, int]:
        return self.distances.shape

    def hit_mask(self) -> np.ndarray:
        return np.isfinite(self.distances)


@dataclass(frozen=True)
class Hit:
    distance: float
    point: np.ndarray
    normal: np.ndarray
    material: Material


def generate_rays(intr: SonarIntrinsics, pose: RigidPose) -> RayGrid:
    theta = intr.beam_angles()[:, None]
    phi = intr.elevation_angles()[None, :]
    dirs = pose.rotate(spherical_directions(theta, phi))
    origins = np.broadcast_to(pose.origin, dirs.shape).copy()
    return RayGrid(origins, dirs)


def attenuation(r: float, tvg: bool) -> float:
    """Transmission loss: 1 with time-variant gain, inverse-square without."""
    return 1.0 if tvg else 1.0 / (r * r)


def shade(hit: Hit, direction, tvg: bool = True) -> float:
    """Backscattered intensity ``C * l(r) * albedo * cos(incidence)``; zero for back faces."""
    cos_a = -float(np.dot(direction, hit.normal))
    if cos_a < 0.0:
        return 0.0
    return hit.material.source_strength * attenuation(hit.distance, tvg) * hit.material.albedo * cos_a


# --- packed scene ------------------------------------------------------------


class PackedScene(NamedTuple):
    v0: np.ndarray
    e1: np.ndarray
    e2: np.ndarray
    normals: np.ndarray
    albedo: np.ndarray
    strength: np.ndarray
    leaf_start: np.ndarray
    leaf_end: np.ndarray
    leaf_lo: np.ndarray
    leaf_hi: np.ndarray
    meshes: tuple
    material_index: np.ndarray


def pack_scene(scene: Scene) -> PackedScene:
    """Flatten a scene into triangle arrays plus per-leaf bounding boxes.

    Leaves are runs of at most ``_LEAF_SIZE`` consecutive triangles of one mesh.
    """
    corners, normals, albedo, strength, mat_idx = [], [], [], [], []
    starts, ends = [], []
    offset = 0
    meshes = scene.meshes()
    for k, mesh in enumerate(meshes):
        c = mesh.corners()
        corners.append(c)
        normals.append(mesh.normals())
        albedo.append(np.full(len(c), mesh.material.albedo))
        strength.append(np.full(len(c), mesh.material.source_strength))
        mat_idx.append(np.full(len(c), k))
        for s in range(0, len(c), _LEAF_SIZE):
            starts.append(offset + s)
            ends.append(offset + min(s + _LEAF_SIZE, len(c)))
        offset += len(c)
    if offset == 0:
        z3 = np.zeros((0, 3))
        zi = np.zeros(0, np.int64)
        return PackedScene(z3, z3, z3, z3, np.zeros(0), np.zeros(0), zi, zi, z3, z3, meshes, zi)
    c = np.concatenate(corners)
    lo = np.array([c[s:e].reshape(-1, 3).min(axis=0) for s, e in zip(starts, ends)]) - _BOX_PAD
    hi = np.array([c[s:e].reshape(-1, 3).max(axis=0) for s, e in zip(starts, ends)]) + _BOX_PAD
    return PackedScene(
        np.ascontiguousarray(c[:, 0]),
        np.ascontiguousarray(c[:, 1] - c[:, 0]),
        np.ascontiguousarray(c[:, 2] - c[:, 0]),
        np.concatenate(normals),
        np.concatenate(albedo),
        np.concatenate(strength),
        np.array(starts, np.int64),
        np.array(ends, np.int64),
        lo,
        hi,
        meshes,
        np.concatenate(mat_idx),
    )


def intersect_triangles(origin, direction, v0, e1, e2) -> np.ndarray:
    """Möller-Trumbore distances from one ray to many triangles (``inf`` on a miss)."""
    d = np.asarray(direction, float)
    pvec = np.cross(d, e2)
    det = np.einsum("ij,ij->i", e1, pvec)
    ok = np.abs(det) >= _PARALLEL_EPS
    inv = np.where(ok, 1.0 / np.where(ok, det, 1.0), 0.0)
    tvec = np.asarray(origin, float) - v0
    u = np.einsum("ij,ij->i", tvec, pvec) * inv
    qvec = np.cross(tvec, e1)
    v = (qvec @ d) * inv
    t = np.einsum("ij,ij->i", e2, qvec) * inv
    ok &= (u >= 0.0) & (u <= 1.0) & (v >= 0.0) & (u + v <= 1.0) & (t > HIT_EPSILON)
    return np.where(ok, t, np.inf)


def closest_hit(origin, direction, scene: Scene | PackedScene) -> Hit | None:
    packed = scene if isinstance(scene, PackedScene) else pack_scene(scene)
    if len(packed.v0) == 0:
        return None
    t = intersect_triangles(origin, direction, packed.v0, packed.e1, packed.e2)
    k = int(np.argmin(t))  # first index wins ties, like the kernel
    if not np.isfinite(t[k]):
        return None
    point = np.asarray(origin, float) + t[k] * np.asarray(direction, float)
    material = packed.meshes[packed.material_index[k]].material
    return Hit(float(t[k]), point, packed.normals[k].copy(), material)


# --- kernel ------------------------------------------------------------------


@njit(cache=True)
def _slab_entry(o, d, lo, hi, t_far):
    t0 = 0.0
    t1 = t_far
    for a in range(3):
        if d[a] == 0.0:
            if o[a] < lo[a] or o[a] > hi[a]:
                return False
        else:
            inv = 1.0 / d[a]
            ta = (lo[a] - o[a]) * inv
            tb = (hi[a] - o[a]) * inv
            if ta > tb:
                ta, tb = tb, ta
            if ta > t0:
                t0 = ta
            if tb < t1:
                t1 = tb
            if t0 > t1:
                return False
    return True


@njit(cache=True)
def _trace_one(o, d, v0, e1, e2, leaf_start, leaf_end, leaf_lo, leaf_hi):
    best_t = np.inf
    best = -1
    for leaf in range(leaf_start.shape[0]):
        if not _slab_entry(o, d, leaf_lo[leaf], leaf_hi[leaf], best_t):
            continue
        for k in range(leaf_start[leaf], leaf_end[leaf]):
            ax, ay, az = e1[k, 0], e1[k, 1], e1[k, 2]
            bx, by, bz = e2[k, 0], e2[k, 1], e2[k, 2]
            # pvec = d x e2
            px = d[1] * bz - d[2] * by
            py = d[2] * bx - d[0] * bz
            pz = d[0] * by - d[1] * bx
            det = ax * px + ay * py + az * pz
            if abs(det) < _PARALLEL_EPS:
                continue
            inv = 1.0 / det
            tx = o[0] - v0[k, 0]
            ty = o[1] - v0[k, 1]
            tz = o[2] - v0[k, 2]
            u = (tx * px + ty * py + tz * pz) * inv
            if u < 0.0 or u > 1.0:
                continue
            # qvec = tvec x e1
            qx = ty * az - tz * ay
            qy = tz * ax - tx * az
            qz = tx * ay - ty * ax
            v = (qx * d[0] + qy * d[1] + qz * d[2]) * inv
            if v < 0.0 or u + v > 1.0:
                continue
            t = (bx * qx + by * qy + bz * qz) * inv
            if t > HIT_EPSILON and t < best_t:
                best_t = t
                best = k
    return best_t, best


@njit(parallel=True, cache=True)
def _render_kernel(origins, dirs, v0, e1, e2, normals, albedo, strength,
                   leaf_start, leaf_end, leaf_lo, leaf_hi, tvg):
    m, n = dirs.shape[0], dirs.shape[1]
    dist = np.full((m, n), np.inf)
    inten = np.zeros((m, n))
    for p in prange(m):
        for q in range(n):
            o = origins[p, q]
            d = dirs[p, q]
            t, k = _trace_one(o, d, v0, e1, e2, leaf_start, leaf_end, leaf_lo, leaf_hi)
            if k < 0:
                continue
            dist[p, q] = t
            cos_a = -(d[0] * normals[k, 0] + d[1] * normals[k, 1] + d[2] * normals[k, 2])
            if cos_a < 0.0:
                continue
            loss = 1.0 if tvg else 1.0 / (t * t)
            inten[p, q] = strength[k] * loss * albedo[k] * cos_a / n
    return dist, inten


def trace_grid(rays: RayGrid, packed: PackedScene, tvg: bool) -> RayBuffers:
    m, n = rays.directions.shape[:2]
    if len(packed.v0) == 0:
        return RayBuffers(np.full((m, n), NO_HIT), np.zeros((m, n)))
    dist, inten = _render_kernel(
        np.ascontiguousarray(rays.origins), np.ascontiguousarray(rays.directions),
        packed.v0, packed.e1, packed.e2, packed.normals, packed.albedo, packed.strength,
        packed.leaf_start, packed.leaf_end, packed.leaf_lo, packed.leaf_hi, bool(tvg),
    )
    return RayBuffers(dist, inten)


def set_threads(n: int) -> int:
    """Set the render thread count (0 = all available); returns the count in effect."""
    limit = numba.config.NUMBA_NUM_THREADS
    numba.set_num_threads(limit if n <= 0 else min(n, limit))
    return numba.get_num_threads()


def render_buffers(scene: Scene, pose: RigidPose, intr: SonarIntrinsics) -> RayBuffers:
    """Distance and intensity maps of ``scene``; each ray is weighted by 1/L."""
    return trace_grid(generate_rays(intr, pose), pack_scene(scene), intr.tvg_enabled)
