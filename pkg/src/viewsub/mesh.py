"""Triangle meshes: OFF parsing/writing, surface area and affine transforms."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np


class MeshError(ValueError):
    """Invalid mesh content."""


class OffParseError(MeshError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass(frozen=True, eq=False)
class TriangleMesh:
    """Indexed triangle soup.

    ``vertices`` is an (n, 3) float64 array, ``triangles`` an (m, 3) int64
    array of vertex indices. Arrays are made read-only on construction.
    """

    vertices: np.ndarray
    triangles: np.ndarray

    def __post_init__(self):
        v = np.array(self.vertices, dtype=np.float64).reshape(-1, 3)
        t = np.array(self.triangles, dtype=np.int64).reshape(-1, 3)
        if not np.all(np.isfinite(v)):
            raise MeshError("vertex coordinates must be finite")
        if t.size and (t.min() < 0 or t.max() >= len(v)):
            raise MeshError("triangle index out of range")
        v.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "triangles", t)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    def corners(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """The three (m, 3) corner arrays A, B, C."""
        v = self.vertices[self.triangles]
        return v[:, 0], v[:, 1], v[:, 2]


def _tokens(text: str):
    """Yield (line_number, tokens) for non-empty, non-comment lines."""
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield lineno, line.split()


def parse_off(text: str) -> TriangleMesh:
    """Parse an OFF document. Polygons are fan-triangulated from their first vertex."""
    lines = _tokens(text)
    try:
        lineno, toks = next(lines)
    except StopIteration:
        raise OffParseError("empty file", 1) from None

    head = toks[0]
    if head == "OFF":
        rest = toks[1:]
    elif head.startswith("OFF") and head[3:].isdigit():
        # "OFF490 976 0" appears in some PSB files
        rest = [head[3:]] + toks[1:]
    else:
        raise OffParseError("missing OFF header", lineno)
    if not rest:
        try:
            lineno, rest = next(lines)
        except StopIteration:
            raise OffParseError("missing element counts", lineno) from None
    if len(rest) < 2:
        raise OffParseError("malformed element counts", lineno)
    try:
        nv, nf = int(rest[0]), int(rest[1])
    except ValueError:
        raise OffParseError("malformed element counts", lineno) from None
    if nv < 0 or nf < 0:
        raise OffParseError("negative element count", lineno)

    verts = np.empty((nv, 3), dtype=np.float64)
    for i in range(nv):
        try:
            lineno, toks = next(lines)
        except StopIteration:
            raise OffParseError(f"expected {nv} vertices, found {i}", lineno) from None
        if len(toks) < 3:
            raise OffParseError("vertex needs 3 coordinates", lineno)
        try:
            verts[i] = [float(x) for x in toks[:3]]
        except ValueError:
            raise OffParseError("bad vertex coordinate", lineno) from None
    if not np.all(np.isfinite(verts)):
        raise OffParseError("non-finite vertex coordinate", lineno)

    tris = []
    for i in range(nf):
        try:
            lineno, toks = next(lines)
        except StopIteration:
            raise OffParseError(f"expected {nf} faces, found {i}", lineno) from None
        try:
            k = int(toks[0])
            idx = [int(x) for x in toks[1 : k + 1]]
        except ValueError:
            raise OffParseError("bad face record", lineno) from None
        if k < 3 or len(idx) != k:
            raise OffParseError(f"face declares {k} vertices, has {len(idx)}", lineno)
        for j in idx:
            if j < 0 or j >= nv:
                raise OffParseError(f"vertex index {j} out of range [0, {nv})", lineno)
        for j in range(1, k - 1):
            tris.append((idx[0], idx[j], idx[j + 1]))

    extra = next(lines, None)
    if extra is not None:
        raise OffParseError("trailing data after declared elements", extra[0])
    if not tris:
        raise OffParseError("mesh has no faces", lineno)
    return TriangleMesh(verts, np.array(tris, dtype=np.int64))


def read_off(path) -> TriangleMesh:
    return parse_off(Path(path).read_text(encoding="ascii", errors="replace"))


def serialize_off(mesh: TriangleMesh) -> str:
    out = [f"OFF\n{mesh.n_vertices} {mesh.n_triangles} 0\n"]
    out.extend(f"{x!r} {y!r} {z!r}\n" for x, y, z in mesh.vertices.tolist())
    out.extend(f"3 {a} {b} {c}\n" for a, b, c in mesh.triangles.tolist())
    return "".join(out)


def write_off(mesh: TriangleMesh, path) -> None:
    Path(path).write_text(serialize_off(mesh), encoding="ascii")


def triangle_areas(mesh: TriangleMesh) -> np.ndarray:
    a, b, c = mesh.corners()
    return 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)


def surface_area(mesh: TriangleMesh) -> float:
    return float(triangle_areas(mesh).sum())


def transform_mesh(mesh: TriangleMesh, linear, translation=(0.0, 0.0, 0.0)) -> TriangleMesh:
    """Apply ``v -> linear @ v + translation`` to every vertex."""
    linear = np.asarray(linear, dtype=np.float64)
    if linear.shape != (3, 3) or not np.all(np.isfinite(linear)):
        raise MeshError("linear part must be a finite 3x3 matrix")
    v = mesh.vertices @ linear.T + np.asarray(translation, dtype=np.float64)
    return TriangleMesh(v, mesh.triangles)
