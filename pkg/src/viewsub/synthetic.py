"""Procedural meshes and a jittered four-class toy corpus."""

from __future__ import annotations

import numpy as np
from scipy.spatial.transform import Rotation

from .mesh import TriangleMesh, transform_mesh


def box(size=(1.0, 1.0, 1.0), center=(0.0, 0.0, 0.0)) -> TriangleMesh:
    sx, sy, sz = (0.5 * float(s) for s in size)
    v = np.array(
        [[x, y, z] for x in (-sx, sx) for y in (-sy, sy) for z in (-sz, sz)],
        dtype=np.float64,
    )
    quads = [(0, 1, 3, 2), (4, 6, 7, 5), (0, 4, 5, 1), (2, 3, 7, 6), (0, 2, 6, 4), (1, 5, 7, 3)]
    tris = []
    for a, b, c, d in quads:
        tris += [(a, b, c), (a, c, d)]
    return TriangleMesh(v + np.asarray(center, dtype=np.float64), tris)


def icosphere(subdivisions: int = 3, radius: float = 1.0) -> TriangleMesh:
    """Subdivided icosahedron; 20 * 4**subdivisions faces (3 -> 1280)."""
    t = (1.0 + 5.0**0.5) / 2.0
    verts = [
        (-1, t, 0), (1, t, 0), (-1, -t, 0), (1, -t, 0),
        (0, -1, t), (0, 1, t), (0, -1, -t), (0, 1, -t),
        (t, 0, -1), (t, 0, 1), (-t, 0, -1), (-t, 0, 1),
    ]
    faces = [
        (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
        (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
        (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
        (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
    ]
    verts = [np.array(p, dtype=np.float64) / np.linalg.norm(p) for p in verts]
    for _ in range(subdivisions):
        cache: dict[tuple[int, int], int] = {}

        def midpoint(i, j):
            key = (min(i, j), max(i, j))
            if key not in cache:
                m = verts[i] + verts[j]
                verts.append(m / np.linalg.norm(m))
                cache[key] = len(verts) - 1
            return cache[key]

        new = []
        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = new
    return TriangleMesh(np.array(verts) * radius, faces)


def ellipsoid(axes=(1.0, 1.0, 1.0), subdivisions: int = 3) -> TriangleMesh:
    return transform_mesh(icosphere(subdivisions), np.diag(axes))


def cylinder(length=2.0, radii=(0.5, 0.5), segments: int = 32) -> TriangleMesh:
    """Closed cylinder along x with an elliptic cross-section."""
    th = 2 * np.pi * np.arange(segments) / segments
    ry, rz = radii
    ring = np.stack([ry * np.cos(th), rz * np.sin(th)], axis=1)
    h = length / 2.0
    v = np.concatenate(
        [
            np.column_stack([np.full(segments, -h), ring]),
            np.column_stack([np.full(segments, h), ring]),
            [[-h, 0.0, 0.0], [h, 0.0, 0.0]],
        ]
    )
    c0, c1 = 2 * segments, 2 * segments + 1
    tris = []
    for i in range(segments):
        j = (i + 1) % segments
        tris += [(i, j, segments + j), (i, segments + j, segments + i)]
        tris += [(c0, j, i), (c1, segments + i, segments + j)]
    return TriangleMesh(v, tris)


def torus(major=1.0, minor=0.3, segments=(32, 16)) -> TriangleMesh:
    """Torus around the z axis."""
    nu, nv = segments
    u = 2 * np.pi * np.arange(nu) / nu
    w = 2 * np.pi * np.arange(nv) / nv
    uu, ww = np.meshgrid(u, w, indexing="ij")
    rad = major + minor * np.cos(ww)
    v = np.stack([rad * np.cos(uu), rad * np.sin(uu), minor * np.sin(ww)], axis=-1).reshape(-1, 3)
    tris = []
    for i in range(nu):
        for j in range(nv):
            a = i * nv + j
            b = ((i + 1) % nu) * nv + j
            c = ((i + 1) % nu) * nv + (j + 1) % nv
            d = i * nv + (j + 1) % nv
            tris += [(a, b, c), (a, c, d)]
    return TriangleMesh(v, tris)


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    return Rotation.random(random_state=rng).as_matrix()


def random_mesh(rng: np.random.Generator, n_triangles: int = 40) -> TriangleMesh:
    """A random triangle soup; useful for integral checks."""
    v = rng.normal(size=(3 * n_triangles, 3)) * rng.uniform(0.5, 2.0, size=3)
    return TriangleMesh(v, np.arange(3 * n_triangles).reshape(-1, 3))


def random_blob(rng: np.random.Generator, subdivisions: int = 2) -> TriangleMesh:
    """A star-shaped closed surface with random bumps and distinct principal axes."""
    base = icosphere(subdivisions)
    v = base.vertices
    k = rng.normal(size=(4, 3))
    bump = 1.0 + 0.25 * np.tanh(v @ k.T).sum(axis=1) / 4.0
    v = v * bump[:, None] * np.array([1.0, rng.uniform(0.55, 0.8), rng.uniform(0.3, 0.5)])
    return TriangleMesh(v, base.triangles)


SHAPE_CLASSES = ("box", "ellipsoid", "cylinder", "torus")


def jittered_shape(kind: str, rng: np.random.Generator) -> TriangleMesh:
    """One randomly perturbed member of a toy class, in a random pose.

    Every class keeps three clearly distinct principal extents so that the
    principal axes are well defined.
    """
    if kind == "box":
        m = box((1.0, rng.uniform(0.45, 0.6), rng.uniform(0.15, 0.22)))
    elif kind == "ellipsoid":
        m = ellipsoid((1.0, rng.uniform(0.7, 0.8), rng.uniform(0.4, 0.5)), subdivisions=3)
    elif kind == "cylinder":
        m = cylinder(2.0, (rng.uniform(0.3, 0.36), rng.uniform(0.13, 0.17)), segments=32)
    elif kind == "torus":
        m = torus(1.0, rng.uniform(0.25, 0.35), segments=(32, 12))
        m = transform_mesh(m, np.diag([1.0, rng.uniform(0.7, 0.8), 1.0]))
    else:
        raise ValueError(f"unknown shape class {kind!r}")
    scale = rng.uniform(0.5, 3.0)
    return transform_mesh(m, scale * random_rotation(rng), rng.uniform(-5, 5, size=3))


def toy_corpus(per_class: int = 10, seed: int = 0) -> list[tuple[str, str, TriangleMesh]]:
    """``(model_id, class_name, mesh)`` triples, ``per_class`` of each toy class."""
    rng = np.random.default_rng(seed)
    out = []
    for kind in SHAPE_CLASSES:
        for i in range(per_class):
            out.append((f"{kind}{i:02d}", kind, jittered_shape(kind, rng)))
    return out
