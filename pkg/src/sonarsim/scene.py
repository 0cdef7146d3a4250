"""Meshes, materials, the ground plane and the mirrored render variants.

A :class:`Scene` holds world-frame triangle meshes plus an optional flat
ground. The ground is kept twice: as an analytic :class:`~sonarsim.geometry.Plane`
(used for mirroring and for specular reflection) and as a finite rectangular
mesh that is rendered for its diffuse return. Echoes are therefore modelled as
if the ground were infinite.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .geometry import Plane, RigidPose, mirror_points

DEFAULT_OBJECT_ALBEDO = 0.4  # smooth plastic
DEFAULT_GROUND_ALBEDO = 0.8  # coarse concrete
MIN_TRIANGLE_AREA = 1e-12
COPLANAR_TOL = 1e-9


class MeshParseError(ValueError):
    def __init__(self, path, lineno: int, message: str):
        super().__init__(f"{path}:{lineno}: {message}")
        self.path = path
        self.lineno = lineno


class DegenerateTriangleError(ValueError):
    def __init__(self, faces):
        self.faces = list(faces)
        super().__init__(f"degenerate triangles (area <= {MIN_TRIANGLE_AREA:g} m^2) at faces {self.faces}")


class MissingGroundError(ValueError):
    """Ground echo modelling needs a ground plane in the scene."""


class SceneConfigError(ValueError):
    """Invalid scene description; ``key`` names the offending entry."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


@dataclass(frozen=True)
class Material:
    albedo: float = DEFAULT_OBJECT_ALBEDO
    source_strength: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.albedo <= 1.0:
            raise ValueError(f"albedo must lie in [0, 1], got {self.albedo}")
        if not self.source_strength > 0.0:
            raise ValueError(f"source_strength must be positive, got {self.source_strength}")


def triangle_areas(vertices: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    tri = vertices[triangles]
    return 0.5 * np.linalg.norm(np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0]), axis=1)


@dataclass(frozen=True, eq=False)
class Mesh:
    """Triangle mesh in world coordinates. Normals follow the counter-clockwise winding."""

    vertices: np.ndarray
    triangles: np.ndarray
    material: Material = field(default_factory=Material)

    def __post_init__(self):
        verts = np.array(self.vertices, dtype=float).reshape(-1, 3)
        tris = np.array(self.triangles, dtype=np.int64).reshape(-1, 3)
        if not np.all(np.isfinite(verts)):
            raise ValueError("mesh vertices must be finite")
        if tris.size and (tris.min() < 0 or tris.max() >= len(verts)):
            raise ValueError("triangle vertex index out of range")
        bad = np.flatnonzero(triangle_areas(verts, tris) <= MIN_TRIANGLE_AREA)
        if bad.size:
            raise DegenerateTriangleError(bad.tolist())
        verts.setflags(write=False)
        tris.setflags(write=False)
        object.__setattr__(self, "vertices", verts)
        object.__setattr__(self, "triangles", tris)

    def __len__(self) -> int:
        return len(self.triangles)

    def corners(self) -> np.ndarray:
        """Per-triangle vertex positions, shape ``(T, 3, 3)``."""
        return self.vertices[self.triangles]

    def normals(self) -> np.ndarray:
        c = self.corners()
        n = np.cross(c[:, 1] - c[:, 0], c[:, 2] - c[:, 0])
        return n / np.linalg.norm(n, axis=1, keepdims=True)

    def transformed(self, pose: RigidPose, scale: float = 1.0) -> Mesh:
        return Mesh(pose.apply(self.vertices * scale), self.triangles, self.material)

    def with_material(self, material: Material) -> Mesh:
        return Mesh(self.vertices, self.triangles, material)


@dataclass(frozen=True)
class Ground:
    plane: Plane
    mesh: Mesh
    specular: float = 1.0  # specular reflectance applied once per ground bounce

    def __post_init__(self):
        dist = np.abs(self.plane.signed_distance(self.mesh.vertices))
        if dist.size and dist.max() >= COPLANAR_TOL:
            raise ValueError(f"ground mesh is not in the ground plane (max distance {dist.max():.3g} m)")
        if not 0.0 <= self.specular <= 1.0:
            raise ValueError(f"specular reflectance must lie in [0, 1], got {self.specular}")

    @classmethod
    def rectangle(cls, plane: Plane, extent=(20.0, 20.0), center=None,
                  albedo: float = DEFAULT_GROUND_ALBEDO, specular: float = 1.0) -> Ground:
        """Rectangular ground patch of ``extent`` metres facing along the plane normal."""
        n = np.asarray(plane.normal)
        c = n * plane.offset if center is None else np.asarray(center, float)
        c = c - plane.signed_distance(c) * n
        a = np.array([1.0, 0.0, 0.0]) if abs(n[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
        u = a - (a @ n) * n
        u /= np.linalg.norm(u)
        v = np.cross(n, u)
        hu, hv = 0.5 * extent[0] * u, 0.5 * extent[1] * v
        verts = np.array([c - hu - hv, c + hu - hv, c + hu + hv, c - hu + hv])
        # project again so rounding in the corner sums cannot push vertices off the plane
        verts -= plane.signed_distance(verts)[:, None] * n
        mesh = Mesh(verts, [[0, 1, 2], [0, 2, 3]], Material(albedo))
        return cls(plane, mesh, specular)


@dataclass(frozen=True)
class Scene:
    objects: tuple[Mesh, ...] = ()
    ground: Ground | None = None

    def __post_init__(self):
        object.__setattr__(self, "objects", tuple(self.objects))

    def meshes(self) -> tuple[Mesh, ...]:
        """Every mesh that gets rendered, objects first, ground last."""
        if self.ground is None:
            return self.objects
        return self.objects + (self.ground.mesh,)

    @property
    def n_triangles(self) -> int:
        return sum(len(m) for m in self.meshes())


@dataclass(frozen=True)
class SceneVariants:
    s1: Scene  # objects + ground
    s2: Scene  # objects only
    s3: Scene  # objects + mirrored objects, no ground


def mirror_mesh(m: Mesh, g: Plane) -> Mesh:
    """Reflect a mesh across ``g``. Winding is reversed so normals stay outward."""
    return Mesh(mirror_points(m.vertices, g), m.triangles[:, [0, 2, 1]], m.material)


def build_scene_variants(scene: Scene) -> SceneVariants:
    if scene.ground is None:
        raise MissingGroundError("scene has no ground; ground echo variants are undefined")
    plane = scene.ground.plane
    return SceneVariants(
        s1=scene,
        s2=Scene(scene.objects),
        s3=Scene(scene.objects + tuple(mirror_mesh(m, plane) for m in scene.objects)),
    )


_IGNORED_OBJ_RECORDS = {"vt", "vn", "vp", "o", "g", "s", "usemtl", "mtllib", "l"}


def _obj_index(token: str, n_vertices: int, path, lineno: int) -> int:
    try:
        idx = int(token.split("/")[0])
    except ValueError:
        raise MeshParseError(path, lineno, f"bad face index {token!r}") from None
    if idx == 0:
        raise MeshParseError(path, lineno, "face index 0 is invalid (OBJ indices are 1-based)")
    resolved = idx - 1 if idx > 0 else n_vertices + idx
    if not 0 <= resolved < n_vertices:
        raise MeshParseError(path, lineno, f"face index {idx} refers to an undefined vertex")
    return resolved


def load_mesh(path, material: Material | None = None) -> Mesh:
    """Read the ``v``/``f`` subset of a Wavefront OBJ file.

    Polygons are fan-triangulated around their first vertex. Texture and
    normal records are ignored; normals come from the winding.
    """
    vertices: list[list[float]] = []
    triangles: list[list[int]] = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            tag, *rest = line.split()
            if tag == "v":
                if len(rest) < 3:
                    raise MeshParseError(path, lineno, "vertex needs 3 coordinates")
                try:
                    vertices.append([float(c) for c in rest[:3]])
                except ValueError:
                    raise MeshParseError(path, lineno, f"bad vertex {line!r}") from None
            elif tag == "f":
                if len(rest) < 3:
                    raise MeshParseError(path, lineno, "face needs at least 3 vertices")
                idx = [_obj_index(t, len(vertices), path, lineno) for t in rest]
                triangles.extend([idx[0], idx[k], idx[k + 1]] for k in range(1, len(idx) - 1))
            elif tag not in _IGNORED_OBJ_RECORDS:
                raise MeshParseError(path, lineno, f"unsupported record {tag!r}")
    return Mesh(np.array(vertices, float).reshape(-1, 3), np.array(triangles, np.int64).reshape(-1, 3),
                material or Material())


def save_mesh(mesh: Mesh, path) -> None:
    with open(path, "w") as fh:
        for v in mesh.vertices:
            fh.write("v {!r} {!r} {!r}\n".format(*map(float, v)))
        for t in mesh.triangles:
            fh.write("f {} {} {}\n".format(*(int(i) + 1 for i in t)))


# --- JSON scene description -------------------------------------------------


@dataclass
class SceneDescription:
    scene: Scene
    pose: RigidPose
    intrinsics: dict[str, Any]
    scene_id: str


def _get(d: dict, key: str, where: str, default=..., kind=None):
    full = f"{where}.{key}" if where else key
    if key not in d:
        if default is ...:
            raise SceneConfigError(full, "missing required key")
        return default
    value = d[key]
    if kind == "vec3":
        if not (isinstance(value, list) and len(value) == 3 and all(isinstance(c, (int, float)) for c in value)):
            raise SceneConfigError(full, "expected a list of 3 numbers")
        return [float(c) for c in value]
    if kind == "number" and (isinstance(value, bool) or not isinstance(value, (int, float))):
        raise SceneConfigError(full, "expected a number")
    return value


def _pose_from(d: dict, where: str) -> RigidPose:
    position = _get(d, "position", where, [0.0, 0.0, 0.0], "vec3")
    roll, pitch, yaw = (math.radians(a) for a in _get(d, "rpy_deg", where, [0.0, 0.0, 0.0], "vec3"))
    return RigidPose.from_euler(roll, pitch, yaw, position)


def _primitive(prim: dict, where: str) -> Mesh:
    from . import shapes

    kind = _get(prim, "type", where)
    try:
        if kind == "box":
            return shapes.box(_get(prim, "min", where, kind="vec3"), _get(prim, "max", where, kind="vec3"),
                              bottom=bool(prim.get("bottom", True)))
        if kind == "sphere":
            return shapes.icosphere(_get(prim, "center", where, [0.0, 0.0, 0.0], "vec3"),
                                    _get(prim, "radius", where, kind="number"),
                                    int(prim.get("subdivisions", 2)))
        if kind == "plate":
            return shapes.plate(_get(prim, "center", where, kind="vec3"),
                                _get(prim, "normal", where, kind="vec3"),
                                _get(prim, "size", where), int(prim.get("divisions", 1)))
    except (TypeError, ValueError) as exc:
        if isinstance(exc, SceneConfigError):
            raise
        raise SceneConfigError(where, str(exc)) from exc
    raise SceneConfigError(f"{where}.type", f"unknown primitive {kind!r}")


def parse_scene(doc: dict, base_dir=".", scene_id: str = "scene") -> SceneDescription:
    """Build a scene from a parsed JSON document (see README for the schema)."""
    if not isinstance(doc, dict):
        raise SceneConfigError("<root>", "scene description must be a JSON object")
    base_dir = Path(base_dir)
    pose = _pose_from(_get(doc, "sonar", ""), "sonar")

    objects = []
    for i, obj in enumerate(_get(doc, "objects", "", [])):
        where = f"objects[{i}]"
        try:
            material = Material(_get(obj, "albedo", where, DEFAULT_OBJECT_ALBEDO, "number"),
                                _get(obj, "source_strength", where, 1.0, "number"))
        except ValueError as exc:
            if isinstance(exc, SceneConfigError):
                raise
            raise SceneConfigError(where, str(exc)) from exc
        if "mesh" in obj:
            mesh_path = base_dir / _get(obj, "mesh", where)
            if not mesh_path.exists():
                raise SceneConfigError(f"{where}.mesh", f"file not found: {mesh_path}")
            mesh = load_mesh(mesh_path, material)
        elif "primitive" in obj:
            mesh = _primitive(obj["primitive"], f"{where}.primitive").with_material(material)
        else:
            raise SceneConfigError(where, "object needs a 'mesh' path or a 'primitive'")
        scale = _get(obj, "scale", where, 1.0, "number")
        objects.append(mesh.transformed(_pose_from(obj, where), scale))

    ground = None
    if doc.get("ground") is not None:
        g = doc["ground"]
        try:
            plane = Plane.from_normal(_get(g, "normal", "ground", [0.0, 0.0, 1.0], "vec3"),
                                      _get(g, "offset", "ground", 0.0, "number"))
            ground = Ground.rectangle(
                plane,
                extent=tuple(_get(g, "extent", "ground", [20.0, 20.0])),
                center=_get(g, "center", "ground", None),
                albedo=_get(g, "albedo", "ground", DEFAULT_GROUND_ALBEDO, "number"),
                specular=_get(g, "specular", "ground", 1.0, "number"),
            )
        except (TypeError, ValueError) as exc:
            if isinstance(exc, SceneConfigError):
                raise
            raise SceneConfigError("ground", str(exc)) from exc

    intrinsics = _get(doc, "intrinsics", "", {})
    if not isinstance(intrinsics, dict):
        raise SceneConfigError("intrinsics", "expected an object")
    return SceneDescription(Scene(tuple(objects), ground), pose, dict(intrinsics), scene_id)


def load_scene_file(path) -> SceneDescription:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise SceneConfigError("<root>", f"invalid JSON: {exc}") from exc
    return parse_scene(doc, path.parent, path.stem)
