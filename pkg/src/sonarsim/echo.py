"""Ground-echo synthesis from single-bounce renders of mirrored scenes.

Three scenes are rendered with the ordinary single-bounce tracer:

* ``s1``: objects and ground, giving ``i_og``
* ``s2``: objects only, giving ``i_o``
* ``s3``: objects plus their mirror images across the ground plane, giving ``i_oo``

The ground return is ``i_og - i_o``. The triple bounce (ground, object,
ground) equals the direct return of the mirrored object, ``i_oo - i_o``. The
double bounce (ground then object, or object then ground) reuses the
mirrored-object rays: the hit point is mirrored back onto the real object and
its energy is binned at the mean of the direct and mirrored path lengths.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .geometry import Plane, RigidPose, azimuth_elevation, mirror_points
from .imaging import DimensionMismatchError, PolarImage, accumulate, form_acoustic_image
from .raytracer import RayBuffers, SonarIntrinsics, generate_rays, render_buffers
from .scene import MissingGroundError, Scene, build_scene_variants

NEGATIVE_RESIDUE_TOL = 1e-9


class NegativeResidueError(ValueError):
    """A render difference went clearly negative: the renders are not nested scenes."""


class BounceMode(str, enum.Enum):
    SINGLE = "single"
    SINGLE_TRIPLE = "single+triple"
    FULL = "full"

    @classmethod
    def parse(cls, value) -> BounceMode:
        if isinstance(value, cls):
            return value
        aliases = {"triple": cls.SINGLE_TRIPLE}
        return aliases.get(value) or cls(value)


@dataclass(frozen=True, eq=False)
class EchoComponents:
    i_og: PolarImage  # objects + ground
    i_o: PolarImage  # objects only
    i_g: PolarImage  # direct ground return
    i_oo: PolarImage  # objects + mirrored objects
    i_mirror: PolarImage  # triple bounce
    i_c23: PolarImage  # double bounce
    composed: PolarImage
    mode: BounceMode

    def compose(self, mode) -> PolarImage:
        """Composed image for any mode, from the stored components."""
        mode = BounceMode.parse(mode)
        if mode is BounceMode.SINGLE:
            return self.i_og
        if mode is BounceMode.SINGLE_TRIPLE:
            return self.i_og + self.i_mirror
        return self.i_og + self.i_c23 + self.i_mirror

    def items(self):
        return [("og", self.i_og), ("o", self.i_o), ("g", self.i_g), ("oo", self.i_oo),
                ("mirror", self.i_mirror), ("c23", self.i_c23), ("composed", self.composed)]


def _residue(minuend: PolarImage, subtrahend: PolarImage, what: str) -> PolarImage:
    if minuend.shape != subtrahend.shape:
        raise DimensionMismatchError(f"{what}: shape mismatch {minuend.shape} vs {subtrahend.shape}")
    diff = minuend.values - subtrahend.values
    worst = float(diff.min()) if diff.size else 0.0
    if worst < -NEGATIVE_RESIDUE_TOL:
        raise NegativeResidueError(f"{what}: difference reaches {worst:.3g}; renders are inconsistent")
    return PolarImage(np.maximum(diff, 0.0), minuend.intrinsics)


def ground_component(i_og: PolarImage, i_o: PolarImage) -> PolarImage:
    return _residue(i_og, i_o, "ground component")


def case4_component(i_oo: PolarImage, i_o: PolarImage) -> PolarImage:
    """Triple-bounce image; its energy sits at the range of the mirrored hit point."""
    return _residue(i_oo, i_o, "triple-bounce component")


def in_sensor_scope(points: np.ndarray, pose: RigidPose, intr: SonarIntrinsics):
    """Range of world ``points`` from the sonar and whether each lies in the frustum."""
    r, theta, phi = azimuth_elevation(pose.to_local(points))
    inside = ((np.abs(theta) <= 0.5 * intr.azimuth_fov) & (np.abs(phi) <= 0.5 * intr.elevation_fov)
              & (r >= intr.r_min) & (r <= intr.r_max))
    return r, inside


def case23_component(buffers_oo: RayBuffers, buffers_o: RayBuffers, pose: RigidPose, ground: Plane,
                     intr: SonarIntrinsics, specular: float = 1.0) -> PolarImage:
    """Double-bounce image accumulated from the mirrored-object rays.

    For each ray (p, q) whose intensity comes from a mirrored object, the hit
    ``A'`` is mirrored back to the real surface point ``A``. When ``A`` is
    inside the frustum, the ray's intensity goes to beam ``p`` at range
    ``(|OA| + |OA'|) / 2``. The path is counted once for the reciprocal
    pair (ground first, or object first).
    """
    if buffers_oo.shape != buffers_o.shape:
        raise DimensionMismatchError(f"buffer shapes differ: {buffers_oo.shape} vs {buffers_o.shape}")
    if buffers_oo.shape != (intr.n_beams, intr.n_elev_samples):
        raise DimensionMismatchError(f"buffers are {buffers_oo.shape}, intrinsics expect "
                                     f"{(intr.n_beams, intr.n_elev_samples)}")
    mirror_intensity = buffers_oo.intensities - buffers_o.intensities
    mask = mirror_intensity > 0.0
    if not mask.any():
        return PolarImage.zeros(intr)
    rays = generate_rays(intr, pose)
    d_mirror = buffers_oo.distances[mask]
    a_mirror = rays.origins[mask] + d_mirror[:, None] * rays.directions[mask]
    a_real = mirror_points(a_mirror, ground)
    d_direct, inside = in_sensor_scope(a_real, pose, intr)
    rows = np.broadcast_to(np.arange(intr.n_beams)[:, None], mask.shape)[mask]
    recorded = 0.5 * (d_direct + d_mirror)
    weights = mirror_intensity[mask] * specular
    return PolarImage(accumulate(rows[inside], recorded[inside], weights[inside], intr), intr)


def compose_ground_echo(scene: Scene, pose: RigidPose, intr: SonarIntrinsics, mode="full") -> EchoComponents:
    """Render the three scene variants and assemble every echo component.

    ``ground.specular`` scales the double bounce once and the triple bounce
    twice. A scene without ground yields all-zero echo components.
    """
    mode = BounceMode.parse(mode)
    if scene.ground is None:
        i_o = form_acoustic_image(render_buffers(scene, pose, intr), intr)
        zero = PolarImage.zeros(intr)
        parts = EchoComponents(i_o, i_o, zero, i_o, zero, zero, i_o, mode)
    else:
        variants = build_scene_variants(scene)
        b_og = render_buffers(variants.s1, pose, intr)
        b_o = render_buffers(variants.s2, pose, intr)
        b_oo = render_buffers(variants.s3, pose, intr)
        i_og = form_acoustic_image(b_og, intr)
        i_o = form_acoustic_image(b_o, intr)
        i_oo = form_acoustic_image(b_oo, intr)
        kappa = scene.ground.specular
        i_mirror = case4_component(i_oo, i_o)
        if kappa != 1.0:
            i_mirror = i_mirror.scaled(kappa * kappa)
        i_c23 = case23_component(b_oo, b_o, pose, scene.ground.plane, intr, kappa)
        parts = EchoComponents(i_og, i_o, ground_component(i_og, i_o), i_oo, i_mirror, i_c23, i_og, mode)
    return EchoComponents(parts.i_og, parts.i_o, parts.i_g, parts.i_oo, parts.i_mirror, parts.i_c23,
                          parts.compose(mode), mode)


def require_ground(scene: Scene, mode) -> None:
    """Raise :class:`MissingGroundError` when an echo mode is requested without ground."""
    if BounceMode.parse(mode) is not BounceMode.SINGLE and scene.ground is None:
        raise MissingGroundError(f"bounce mode {BounceMode.parse(mode).value!r} needs a ground plane in the scene")
