"""Procedural meshes for test scenes and the JSON ``primitive`` entries."""

from __future__ import annotations

import numpy as np

from .scene import Material, Mesh


def quad(corners, material: Material | None = None) -> Mesh:
    """Planar quad from four corners in counter-clockwise order (seen from the front)."""
    return Mesh(np.asarray(corners, float), [[0, 1, 2], [0, 2, 3]], material or Material())


def _grid(c0, c1, c2, c3, divisions: int):
    """Bilinear ``divisions x divisions`` tessellation of a quad given counter-clockwise."""
    s = np.linspace(0.0, 1.0, divisions + 1)
    a, b = np.meshgrid(s, s, indexing="ij")
    a, b = a[..., None], b[..., None]
    c0, c1, c2, c3 = (np.asarray(c, float) for c in (c0, c1, c2, c3))
    verts = (1 - a) * (1 - b) * c0 + a * (1 - b) * c1 + a * b * c2 + (1 - a) * b * c3
    idx = np.arange((divisions + 1) ** 2).reshape(divisions + 1, divisions + 1)
    p00, p10, p11, p01 = idx[:-1, :-1], idx[1:, :-1], idx[1:, 1:], idx[:-1, 1:]
    tris = np.concatenate([np.stack([p00, p10, p11], -1).reshape(-1, 3),
                           np.stack([p00, p11, p01], -1).reshape(-1, 3)])
    return verts.reshape(-1, 3), tris


def plate(center, normal, size, divisions: int = 1, material: Material | None = None) -> Mesh:
    """Rectangular plate facing ``normal``, split into ``divisions`` x ``divisions`` cells."""
    n = np.asarray(normal, float)
    n /= np.linalg.norm(n)
    up = np.array([0.0, 0.0, 1.0]) if abs(n[2]) < 0.9 else np.array([1.0, 0.0, 0.0])
    u = np.cross(up, n)
    u /= np.linalg.norm(u)
    v = np.cross(n, u)
    su, sv = (size, size) if np.isscalar(size) else size
    c = np.asarray(center, float)
    hu, hv = 0.5 * su * u, 0.5 * sv * v
    verts, tris = _grid(c - hu - hv, c + hu - hv, c + hu + hv, c - hu + hv, divisions)
    return Mesh(verts, tris, material or Material())


def box(lo, hi, material: Material | None = None, bottom: bool = True, divisions: int = 1) -> Mesh:
    """Axis-aligned box with outward normals. ``bottom=False`` leaves the -z face open."""
    x0, y0, z0 = lo
    x1, y1, z1 = hi
    corners = np.array([[x0, y0, z0], [x1, y0, z0], [x1, y1, z0], [x0, y1, z0],
                        [x0, y0, z1], [x1, y0, z1], [x1, y1, z1], [x0, y1, z1]], float)
    faces = [
        [4, 5, 6, 7],  # +z
        [0, 1, 5, 4],  # -y
        [1, 2, 6, 5],  # +x
        [2, 3, 7, 6],  # +y
        [3, 0, 4, 7],  # -x
    ]
    if bottom:
        faces.append([0, 3, 2, 1])
    if divisions == 1:
        tris = [[f[0], f[1], f[2]] for f in faces] + [[f[0], f[2], f[3]] for f in faces]
        return Mesh(corners, tris, material or Material())
    verts, tris, base = [], [], 0
    for f in faces:
        v, t = _grid(*corners[f], divisions)
        verts.append(v)
        tris.append(t + base)
        base += len(v)
    return Mesh(np.concatenate(verts), np.concatenate(tris), material or Material())


def icosphere(center, radius: float, subdivisions: int = 2, material: Material | None = None) -> Mesh:
    """Geodesic sphere with ``20 * 4**subdivisions`` triangles, vertices on the sphere."""
    t = (1.0 + 5 ** 0.5) / 2.0
    verts = [[-1, t, 0], [1, t, 0], [-1, -t, 0], [1, -t, 0], [0, -1, t], [0, 1, t],
             [0, -1, -t], [0, 1, -t], [t, 0, -1], [t, 0, 1], [-t, 0, -1], [-t, 0, 1]]
    verts = [list(np.asarray(v, float) / np.linalg.norm(v)) for v in verts]
    faces = [[0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11], [1, 5, 9], [5, 11, 4],
             [11, 10, 2], [10, 7, 6], [7, 1, 8], [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8],
             [3, 8, 9], [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1]]
    for _ in range(subdivisions):
        cache: dict[tuple[int, int], int] = {}

        def midpoint(i, j):
            key = (min(i, j), max(i, j))
            if key not in cache:
                m = np.add(verts[i], verts[j])
                verts.append(list(m / np.linalg.norm(m)))
                cache[key] = len(verts) - 1
            return cache[key]

        new = []
        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new += [[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]
        faces = new
    v = np.asarray(center, float) + radius * np.asarray(verts)
    return Mesh(v, faces, material or Material())
