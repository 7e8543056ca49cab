"""Geodesic view spheres and orthographic depth rendering.

Depth images are ``RESOLUTION x RESOLUTION`` float64 arrays indexed
``[row, col]``. Column ``c`` covers image-plane coordinate ``u`` increasing to
the right, row 0 sits at ``v = +1``. A pixel holds ``(<p, d> + 1) / 2`` of the
nearest surface point along the view direction ``d``; uncovered pixels are 0.

All coordinates are kept exactly symmetric under the 8 square symmetries so
that rendering a signed-permuted mesh reproduces a pixel permutation of the
original render bit for bit.
"""

from __future__ import annotations

import functools
import itertools
import re
from dataclasses import dataclass
from pathlib import Path

import numba
import numpy as np

from .mesh import MeshError, TriangleMesh

RESOLUTION = 128
INV_SQRT2 = float(1.0 / np.sqrt(2.0))

# ---------------------------------------------------------------------------
# square symmetries (D4)
# ---------------------------------------------------------------------------

_ROT90 = np.array([[0, -1], [1, 0]], dtype=np.int64)
_MIRROR = np.array([[-1, 0], [0, 1]], dtype=np.int64)


def _d4_matrices() -> np.ndarray:
    rots = [np.linalg.matrix_power(_ROT90, k) for k in range(4)]
    return np.array(rots + [r @ _MIRROR for r in rots], dtype=np.int64)


# code k -> 2x2 integer matrix acting on (u, v); 0-3 rotations, 4-7 mirrored
D4 = _d4_matrices()
D4.setflags(write=False)


def d4_code(matrix) -> int:
    m = np.asarray(matrix)
    for k, a in enumerate(D4):
        if np.array_equal(a, m):
            return k
    raise ValueError(f"not a square symmetry: {m.tolist()}")


def d4_compose(a: int, b: int) -> int:
    """Code of ``D4[a] @ D4[b]`` (apply b first)."""
    return d4_code(D4[a] @ D4[b])


def d4_inverse(a: int) -> int:
    return d4_code(D4[a].T)


@functools.lru_cache(maxsize=None)
def _d4_source_index(code: int, res: int) -> np.ndarray:
    # doubled pixel-centre coordinates are odd integers, exact under D4
    cols = np.arange(res)
    u2 = 2 * cols + 1 - res
    v2 = res - 1 - 2 * cols
    uu, vv = np.meshgrid(u2, v2)  # uu varies along columns, vv along rows
    inv = D4[code].T
    su = inv[0, 0] * uu + inv[0, 1] * vv
    sv = inv[1, 0] * uu + inv[1, 1] * vv
    src_col = (su + res - 1) // 2
    src_row = (res - 1 - sv) // 2
    idx = (src_row * res + src_col).ravel()
    idx.setflags(write=False)
    return idx


def transform_image_d4(img: np.ndarray, code: int) -> np.ndarray:
    """Move image content by the square symmetry ``D4[code]``.

    The result satisfies ``out(x) = img(D4[code]^-1 x)`` in (u, v) coordinates.
    """
    img = np.asarray(img)
    if img.ndim != 2 or img.shape[0] != img.shape[1]:
        raise ValueError("expected a square image")
    if code == 0:
        return img.copy()
    idx = _d4_source_index(int(code), img.shape[0])
    return img.ravel()[idx].reshape(img.shape)


# ---------------------------------------------------------------------------
# view spheres
# ---------------------------------------------------------------------------

_AXES = np.array(
    [[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]],
    dtype=np.float64,
)


def _snap(vec: np.ndarray) -> np.ndarray:
    """Round components to {0, +-1/sqrt2, +-1} so symmetry tests stay exact."""
    out = np.empty(3)
    for k, c in enumerate(vec):
        a = abs(c)
        if a < 1e-9:
            out[k] = 0.0
        elif abs(a - 1.0) < 1e-9:
            out[k] = np.copysign(1.0, c)
        elif abs(a - INV_SQRT2) < 1e-9:
            out[k] = np.copysign(INV_SQRT2, c)
        else:
            raise ValueError(f"component {c!r} outside the octahedral lattice")
    return out


def frame_for(direction) -> tuple[np.ndarray, np.ndarray]:
    """Camera (right, up) for a view direction; (right, up, direction) is right-handed."""
    d = np.asarray(direction, dtype=np.float64)
    ref = np.array([0.0, 0.0, 1.0]) if abs(d[2]) < 0.9 else np.array([1.0, 0.0, 0.0])
    up = ref - (ref @ d) * d
    up /= np.linalg.norm(up)
    right = np.cross(up, d)
    return right, up


@dataclass(frozen=True, eq=False)
class ViewSphere:
    level: int
    directions: np.ndarray  # (n, 3)
    rights: np.ndarray  # (n, 3)
    ups: np.ndarray  # (n, 3)
    canonical_indices: tuple[int, ...]

    @property
    def n_views(self) -> int:
        return len(self.directions)

    def index_of(self, direction) -> int:
        hits = np.flatnonzero(np.all(self.directions == np.asarray(direction), axis=1))
        if len(hits) != 1:
            raise KeyError(f"direction {np.asarray(direction).tolist()} is not a sphere vertex")
        return int(hits[0])


def _octahedron_edges():
    for i, j in itertools.combinations(range(6), 2):
        if i // 2 != j // 2:  # skip antipodal pairs
            yield i, j


def geodesic_sphere(level: int) -> ViewSphere:
    """Octahedron (level 0, 6 views) or its single midpoint subdivision (level 1, 18 views).

    The first six vertices are always +x, -x, +y, -y, +z, -z.
    """
    return _geodesic_sphere(int(level))


@functools.lru_cache(maxsize=None)
def _geodesic_sphere(level: int) -> ViewSphere:
    if level not in (0, 1):
        raise ValueError("view sphere level must be 0 or 1")
    dirs = [a for a in _AXES]
    if level == 1:
        for i, j in _octahedron_edges():
            dirs.append(_snap((_AXES[i] + _AXES[j]) / np.sqrt(2.0)))
    dirs = np.array(dirs)
    rights, ups = [], []
    for d in dirs:
        r, u = frame_for(d)
        rights.append(_snap(r))
        ups.append(_snap(u))
    sphere = ViewSphere(
        level=level,
        directions=dirs,
        rights=np.array(rights),
        ups=np.array(ups),
        canonical_indices=tuple(range(6)),
    )
    for arr in (sphere.directions, sphere.rights, sphere.ups):
        arr.setflags(write=False)
    for d, r, u in zip(sphere.directions, sphere.rights, sphere.ups):
        assert np.linalg.det(np.array([r, u, d])) > 0.999
    return sphere


# ---------------------------------------------------------------------------
# rasterization
# ---------------------------------------------------------------------------


@numba.njit(cache=True, nogil=True)
def _rasterize(x, y, z, tris, res, out):
    # x, y in pixel units: pixel centres at (c - res/2 + 0.5, res/2 - 0.5 - r)
    half = res / 2.0
    for t in range(tris.shape[0]):
        i0 = tris[t, 0]
        i1 = tris[t, 1]
        i2 = tris[t, 2]
        x0 = x[i0]
        y0 = y[i0]
        x1 = x[i1]
        y1 = y[i1]
        x2 = x[i2]
        y2 = y[i2]
        area = (x1 - x0) * (y2 - y0) - (y1 - y0) * (x2 - x0)
        if area == 0.0:
            continue
        xmin = min(x0, min(x1, x2))
        xmax = max(x0, max(x1, x2))
        ymin = min(y0, min(y1, y2))
        ymax = max(y0, max(y1, y2))
        c_lo = max(int(np.floor(xmin + half - 0.5)) - 1, 0)
        c_hi = min(int(np.ceil(xmax + half - 0.5)) + 1, res - 1)
        r_lo = max(int(np.floor(half - 0.5 - ymax)) - 1, 0)
        r_hi = min(int(np.ceil(half - 0.5 - ymin)) + 1, res - 1)
        z0 = z[i0]
        z1 = z[i1]
        z2 = z[i2]
        for r in range(r_lo, r_hi + 1):
            py = half - 0.5 - r
            for c in range(c_lo, c_hi + 1):
                px = c - half + 0.5
                w0 = (x2 - x1) * (py - y1) - (y2 - y1) * (px - x1)
                w1 = (x0 - x2) * (py - y2) - (y0 - y2) * (px - x2)
                w2 = (x1 - x0) * (py - y0) - (y1 - y0) * (px - x0)
                if area > 0.0:
                    if w0 < 0.0 or w1 < 0.0 or w2 < 0.0:
                        continue
                else:
                    if w0 > 0.0 or w1 > 0.0 or w2 > 0.0:
                        continue
                depth = (w0 * z0 + w1 * z1 + w2 * z2) / area
                val = (depth + 1.0) * 0.5
                if val < 0.0:
                    val = 0.0
                elif val > 1.0:
                    val = 1.0
                if val > out[r, c]:
                    out[r, c] = val


def _dot(v: np.ndarray, axis: np.ndarray) -> np.ndarray:
    # explicit sum; matmul kernels may fuse multiply-adds and break symmetry
    return v[:, 0] * axis[0] + v[:, 1] * axis[1] + v[:, 2] * axis[2]


def check_in_unit_ball(mesh: TriangleMesh, slack: float = 1e-6) -> None:
    r = np.sqrt((mesh.vertices**2).sum(axis=1)).max()
    if r > 1.0 + slack:
        raise MeshError(f"mesh extends to radius {r:.6g}; normalize its pose first")


def render_depth(mesh: TriangleMesh, direction, frame, res: int = RESOLUTION, _checked=False) -> np.ndarray:
    """Orthographic depth image of a mesh lying inside the unit ball."""
    if not _checked:
        check_in_unit_ball(mesh)
    d = np.asarray(direction, dtype=np.float64)
    right, up = (np.asarray(a, dtype=np.float64) for a in frame)
    v = mesh.vertices
    half = res / 2.0
    out = np.zeros((res, res), dtype=np.float64)
    _rasterize(_dot(v, right) * half, _dot(v, up) * half, _dot(v, d), mesh.triangles, res, out)
    return out


def render_views(mesh: TriangleMesh, sphere: ViewSphere, res: int = RESOLUTION) -> np.ndarray:
    """Depth images from every sphere vertex, stacked as (n_views, res, res)."""
    check_in_unit_ball(mesh)
    return np.stack(
        [
            render_depth(mesh, d, (r, u), res, _checked=True)
            for d, r, u in zip(sphere.directions, sphere.rights, sphere.ups)
        ]
    )


# ---------------------------------------------------------------------------
# PGM export (diagnostics only)
# ---------------------------------------------------------------------------


def to_pgm_bytes(values: np.ndarray, rescale: bool = False) -> bytes:
    v = np.asarray(values, dtype=np.float64)
    if rescale:
        lo, hi = v.min(), v.max()
        v = (v - lo) / (hi - lo) if hi > lo else np.zeros_like(v)
    pix = np.clip(np.rint(v * 255.0), 0, 255).astype(np.uint8)
    h, w = pix.shape
    return f"P5\n{w} {h}\n255\n".encode("ascii") + pix.tobytes()


def write_pgm(path, values: np.ndarray, rescale: bool = False) -> None:
    Path(path).write_bytes(to_pgm_bytes(values, rescale))


def read_pgm(path) -> np.ndarray:
    """Read a binary 8-bit PGM written by :func:`write_pgm` (values in [0, 1])."""
    data = Path(path).read_bytes()
    m = re.match(rb"P5\s+(\d+)\s+(\d+)\s+(\d+)\s", data)
    if m is None:
        raise ValueError("not a binary PGM")
    w, h, maxval = (int(g) for g in m.groups())
    pix = np.frombuffer(data[m.end() : m.end() + w * h], dtype=np.uint8).reshape(h, w)
    return pix / float(maxval)
