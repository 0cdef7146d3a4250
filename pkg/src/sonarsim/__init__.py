"""Forward-looking sonar image simulation with ground-echo multipath."""

from .echo import BounceMode, EchoComponents, compose_ground_echo
from .geometry import Plane, RigidPose
from .imaging import DisplayImage, PolarImage, form_acoustic_image, normalize_image, to_fanshape
from .raytracer import RayBuffers, SonarIntrinsics, aris3000_like, render_buffers
from .scene import Ground, Material, Mesh, Scene, build_scene_variants, load_mesh, load_scene_file, mirror_mesh

__all__ = [
    "BounceMode", "DisplayImage", "EchoComponents", "Ground", "Material", "Mesh", "Plane",
    "PolarImage", "RayBuffers", "RigidPose", "Scene", "SonarIntrinsics", "aris3000_like",
    "build_scene_variants", "compose_ground_echo", "form_acoustic_image", "load_mesh", "load_scene_file",
    "mirror_mesh", "normalize_image", "render_buffers", "to_fanshape",
]

__version__ = "0.1.0"
