"""Brute-force multi-bounce reference tracer.

Slow on purpose: one Python iteration per ray, no acceleration structure,
its own ray-triangle test. It follows each ray explicitly through a
specular reflection at the analytic ground plane, so it can check the
mirrored-scene construction in :mod:`sonarsim.echo` independently.

Objects are pure diffuse endpoints; only the ground reflects specularly.
A path contributes the Lambertian return of its object hit, evaluated for
the leg the ray arrived on and at the distance travelled to reach it. The
contribution is recorded at half the total round-trip length.

* 1 bounce: direct returns from objects and from the finite ground mesh.
* 2 bounces: O->G->A->O (``case2``) and its reciprocal O->A->G->O
  (``case3``). Each reciprocal pair is one physical path population, so the
  combined image is their mean.
* 3 bounces: O->G->A->G->O, which retraces itself.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import RigidPose
from .imaging import PolarImage
from .raytracer import SonarIntrinsics
from .scene import Mesh, Scene

EPS = 1e-9
VISIBILITY_TOL = 1e-6
PATH_SYMMETRY_TOL = 1e-9


@dataclass(frozen=True)
class BounceBudget:
    max_bounces: int = 3

    def __post_init__(self):
        if self.max_bounces not in (1, 2, 3):
            raise ValueError(f"max_bounces must be 1, 2 or 3, got {self.max_bounces}")


@dataclass(frozen=True, eq=False)
class OracleImages:
    single: PolarImage
    double: PolarImage
    triple: PolarImage
    case2: PolarImage
    case3: PolarImage

    def total(self) -> PolarImage:
        return self.single + self.double + self.triple


class _Soup:
    """Triangle columns for a list of meshes (kept separate from the render kernel)."""

    def __init__(self, meshes: tuple[Mesh, ...]):
        if meshes:
            c = np.concatenate([m.corners() for m in meshes]) if meshes else np.zeros((0, 3, 3))
            self.albedo = np.concatenate([np.full(len(m), m.material.albedo) for m in meshes])
            self.strength = np.concatenate([np.full(len(m), m.material.source_strength) for m in meshes])
        else:
            c = np.zeros((0, 3, 3))
            self.albedo = self.strength = np.zeros(0)
        self.v0 = c[:, 0]
        self.e1 = c[:, 1] - c[:, 0]
        self.e2 = c[:, 2] - c[:, 0]
        n = np.cross(self.e1, self.e2)
        self.normal = n / np.linalg.norm(n, axis=1, keepdims=True) if len(n) else n

    def __len__(self):
        return len(self.v0)

    def closest(self, o, d):
        """Nearest hit ``(t, index)`` along ``o + t d``; ``(inf, -1)`` on a miss."""
        if not len(self):
            return math.inf, -1
        ax, ay, az = self.e1[:, 0], self.e1[:, 1], self.e1[:, 2]
        bx, by, bz = self.e2[:, 0], self.e2[:, 1], self.e2[:, 2]
        px = d[1] * bz - d[2] * by
        py = d[2] * bx - d[0] * bz
        pz = d[0] * by - d[1] * bx
        det = ax * px + ay * py + az * pz
        with np.errstate(divide="ignore", invalid="ignore"):
            inv = 1.0 / det
            tx = o[0] - self.v0[:, 0]
            ty = o[1] - self.v0[:, 1]
            tz = o[2] - self.v0[:, 2]
            u = (tx * px + ty * py + tz * pz) * inv
            qx = ty * az - tz * ay
            qy = tz * ax - tx * az
            qz = tx * ay - ty * ax
            v = (qx * d[0] + qy * d[1] + qz * d[2]) * inv
            t = (bx * qx + by * qy + bz * qz) * inv
            ok = (np.abs(det) >= 1e-14) & (u >= 0) & (u <= 1) & (v >= 0) & (u + v <= 1) & (t > EPS)
        if not ok.any():
            return math.inf, -1
        t = np.where(ok, t, np.inf)
        k = int(np.argmin(t))
        return float(t[k]), k

    def lambert(self, k, d, travelled, tvg, n_elev):
        cos_a = -float(self.normal[k] @ d)
        if cos_a < 0.0:
            return 0.0
        loss = 1.0 if tvg else 1.0 / (travelled * travelled)
        return self.strength[k] * loss * self.albedo[k] * cos_a / n_elev


def _bin(r, intr: SonarIntrinsics):
    d = math.floor((r - intr.r_min) / intr.r_res)
    return d if 0 <= d < intr.n_range_bins else None


def _sees(o, target, soup: _Soup) -> bool:
    """True when nothing blocks the segment from ``o`` to ``target``."""
    seg = target - o
    length = math.sqrt(float(seg @ seg))
    t, _ = soup.closest(o, seg / length)
    return t >= length - VISIBILITY_TOL


def _in_scope(point, pose: RigidPose, intr: SonarIntrinsics) -> bool:
    x, y, z = pose.rotation.T @ (point - pose.translation)
    r = math.sqrt(x * x + y * y + z * z)
    theta = math.atan2(y, x)
    phi = math.atan2(z, math.hypot(x, y))
    return (abs(theta) <= 0.5 * intr.azimuth_fov and abs(phi) <= 0.5 * intr.elevation_fov
            and intr.r_min <= r <= intr.r_max)


def trace_multibounce(scene: Scene, pose: RigidPose, intr: SonarIntrinsics,
                      budget: BounceBudget | int = 3) -> OracleImages:
    """Trace every sonar ray through up to ``budget`` bounces and bin each population separately."""
    if isinstance(budget, int):
        budget = BounceBudget(budget)
    m, n_elev = intr.n_beams, intr.n_elev_samples
    shape = intr.shape
    single, triple, case2, case3 = (np.zeros(shape) for _ in range(4))

    objects = _Soup(scene.objects)
    ground_mesh = _Soup((scene.ground.mesh,) if scene.ground is not None else ())
    tvg = intr.tvg_enabled
    origin = np.array(pose.translation, float)
    if scene.ground is not None:
        g_normal = np.array(scene.ground.plane.normal)
        g_offset = scene.ground.plane.offset
        kappa = scene.ground.specular
        origin_image = origin - 2.0 * (origin @ g_normal - g_offset) * g_normal

    for p in range(m):
        theta = -0.5 * intr.azimuth_fov + (p + 0.5) * intr.azimuth_fov / m
        for q in range(n_elev):
            phi = -0.5 * intr.elevation_fov + (q + 0.5) * intr.elevation_fov / n_elev
            local = np.array([math.cos(phi) * math.cos(theta), math.cos(phi) * math.sin(theta), math.sin(phi)])
            d = pose.rotation @ local

            t_obj, k_obj = objects.closest(origin, d)
            t_gnd, k_gnd = ground_mesh.closest(origin, d)
            if k_obj >= 0 and t_obj <= t_gnd:
                b = _bin(t_obj, intr)
                if b is not None:
                    single[p, b] += objects.lambert(k_obj, d, t_obj, tvg, n_elev)
            elif k_gnd >= 0:
                b = _bin(t_gnd, intr)
                if b is not None:
                    single[p, b] += ground_mesh.lambert(k_gnd, d, t_gnd, tvg, n_elev)

            if budget.max_bounces < 2 or scene.ground is None:
                continue
            approach = float(d @ g_normal)
            if approach >= 0.0:
                continue
            t_plane = (g_offset - float(origin @ g_normal)) / approach
            if t_plane <= EPS or t_obj < t_plane:
                continue
            g_point = origin + t_plane * d
            d_refl = d - 2.0 * approach * g_normal
            t_a, k_a = objects.closest(g_point, d_refl)
            if k_a < 0:
                continue
            a_point = g_point + t_a * d_refl
            outbound = t_plane + t_a
            unfolded = float(np.linalg.norm(a_point - origin_image))
            if abs(unfolded - outbound) > PATH_SYMMETRY_TOL * max(1.0, outbound):
                raise RuntimeError(f"specular path length mismatch on ray ({p}, {q}): {outbound} vs {unfolded}")
            w = objects.lambert(k_a, d_refl, outbound, tvg, n_elev)
            if w <= 0.0:
                continue

            if budget.max_bounces >= 3:
                b = _bin(outbound, intr)
                if b is not None:
                    triple[p, b] += w * kappa * kappa

            direct = float(np.linalg.norm(a_point - origin))
            b = _bin(0.5 * (outbound + direct), intr)
            if b is None or not _in_scope(a_point, pose, intr):
                continue
            # ground first, then straight back from A to the receiver
            if _sees(a_point, origin, objects):
                case2[p, b] += w * kappa
            # reciprocal: emitted straight at A, received back via the ground along this ray
            if _sees(origin, a_point, objects):
                case3[p, b] += w * kappa

    c2, c3 = PolarImage(case2, intr), PolarImage(case3, intr)
    return OracleImages(
        single=PolarImage(single, intr),
        double=PolarImage(0.5 * (case2 + case3), intr),
        triple=PolarImage(triple, intr),
        case2=c2,
        case3=c3,
    )
