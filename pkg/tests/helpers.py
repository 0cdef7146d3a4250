"""Small scenes shared by the test modules."""

import math

import numpy as np

from sonarsim import shapes
from sonarsim.geometry import Plane, RigidPose
from sonarsim.raytracer import SonarIntrinsics
from sonarsim.scene import Ground, Material, Scene

GROUND = Plane.horizontal(0.0)


def tank_ground(specular=1.0):
    return Ground.rectangle(GROUND, (16.0, 16.0), center=(4.0, 0.0, 0.0), specular=specular)


def echo_intrinsics(tvg=False, n_beams=64, n_elev=128):
    return SonarIntrinsics(
        n_beams=n_beams, n_elev_samples=n_elev,
        azimuth_fov=math.radians(40.0), elevation_fov=math.radians(40.0),
        r_min=1.0, r_max=9.0, r_res=0.01, tvg_enabled=tvg,
    )


def tank_pose():
    # slightly off-grid so no ray lands exactly on a mesh edge or bin boundary
    return RigidPose.from_euler(0.0, math.radians(12.0), math.radians(1.3), (0.031, 0.017, 1.0))


def quad_scene(ground=True):
    plate = shapes.quad([[4.0, 1.0, 0.2], [4.0, -0.9, 0.25], [4.1, -0.9, 1.3], [4.1, 1.0, 1.2]],
                        Material(0.4))
    return Scene((plate,), tank_ground() if ground else None)


def box_scene(ground=True):
    b = shapes.box((3.6, -0.55, 0.0), (4.3, 0.45, 0.8), Material(0.4))
    return Scene((b,), tank_ground() if ground else None)


def two_box_scene(ground=True):
    a = shapes.box((3.4, -1.3, 0.0), (3.9, -0.6, 0.6), Material(0.4))
    b = shapes.box((4.2, 0.5, 0.0), (4.8, 1.2, 0.9), Material(0.6))
    return Scene((a, b), tank_ground() if ground else None)


ACCEPTANCE_SCENES = {"quad": quad_scene, "box": box_scene, "two_boxes": two_box_scene}


def rel_l1(a, b):
    a = np.asarray(getattr(a, "values", a))
    b = np.asarray(getattr(b, "values", b))
    denom = np.abs(b).sum()
    return np.abs(a - b).sum() / denom if denom > 0 else np.abs(a).sum()


def tessellated_box_scene(ground=True):
    b = shapes.box((3.7, -0.7, 0.0), (4.4, 0.6, 0.7), Material(0.5), divisions=6)
    return Scene((b,), tank_ground() if ground else None)


ACCEPTANCE_SCENES["tessellated_box"] = tessellated_box_scene
