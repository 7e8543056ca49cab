"""The 48 axis rotation/reflection (ARR) versions of a pose-normalized model.

A signed permutation ``g`` permutes the view directions of an octahedral view
sphere, and because camera frames are chosen equivariantly, the view of the
transformed model from ``g d_i`` is the view from ``d_i`` moved by a square
symmetry. View sets can therefore be remapped without re-rendering.
"""

from __future__ import annotations

import functools
import itertools
from dataclasses import dataclass

import numpy as np

from .render import D4, ViewSphere, transform_image_d4


class FrameCertificateError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class ArrElement:
    signed_perm: np.ndarray  # 3x3 int, one nonzero per row/column
    view_perm: np.ndarray | None = None  # view i goes to view_perm[i]
    inplane: np.ndarray | None = None  # D4 code applied to view i

    @property
    def det(self) -> int:
        return int(round(np.linalg.det(self.signed_perm)))


def enumerate_arr() -> list[ArrElement]:
    """All 48 signed permutations; permutations in lexicographic order, then sign patterns."""
    out = []
    for perm in itertools.permutations(range(3)):
        for signs in itertools.product((1, -1), repeat=3):
            g = np.zeros((3, 3), dtype=np.int64)
            for row, (col, s) in enumerate(zip(perm, signs)):
                g[row, col] = s
            g.setflags(write=False)
            out.append(ArrElement(g))
    return out


def arr_index(g) -> int:
    g = np.asarray(g)
    for k, e in enumerate(enumerate_arr()):
        if np.array_equal(e.signed_perm, g):
            return k
    raise ValueError("not a signed permutation matrix")


def _inplane_code(g, sphere: ViewSphere, i: int, j: int) -> int:
    gr = g @ sphere.rights[i]
    gu = g @ sphere.ups[i]
    rj, uj = sphere.rights[j], sphere.ups[j]
    for code, a in enumerate(D4):
        # (g r_i, g u_i) = M (r_j, u_j) and the image moves by M^T
        m = a.T
        if np.array_equal(gr, m[0, 0] * rj + m[0, 1] * uj) and np.array_equal(
            gu, m[1, 0] * rj + m[1, 1] * uj
        ):
            return code
    raise FrameCertificateError(
        f"camera frames are not equivariant for g={g.tolist()} at view {i}"
    )


def build_view_maps(sphere: ViewSphere) -> list[ArrElement]:
    """The 48 elements with their view permutation and per-view square symmetry."""
    return _build_view_maps(sphere)


@functools.lru_cache(maxsize=None)
def _build_view_maps(sphere: ViewSphere) -> list[ArrElement]:
    out = []
    for e in enumerate_arr():
        g = e.signed_perm.astype(np.float64)
        perm = np.empty(sphere.n_views, dtype=np.int64)
        codes = np.empty(sphere.n_views, dtype=np.int64)
        for i, d in enumerate(sphere.directions):
            try:
                j = sphere.index_of(g @ d)
            except KeyError:
                raise FrameCertificateError(
                    f"view sphere is not closed under g={e.signed_perm.tolist()}"
                ) from None
            perm[i] = j
            codes[i] = _inplane_code(g, sphere, i, j)
        perm.setflags(write=False)
        codes.setflags(write=False)
        out.append(ArrElement(e.signed_perm, perm, codes))
    return out


def remap_views(views: np.ndarray, element: ArrElement) -> np.ndarray:
    """View set of the g-transformed model, from the views of the original."""
    views = np.asarray(views)
    if element.view_perm is None:
        raise ValueError("element has no view map; use build_view_maps")
    if len(views) != len(element.view_perm):
        raise ValueError(f"expected {len(element.view_perm)} views, got {len(views)}")
    out = np.empty_like(views)
    for i, (j, code) in enumerate(zip(element.view_perm, element.inplane)):
        out[j] = transform_image_d4(views[i], int(code))
    return out


def canonical_subset(items, sphere: ViewSphere | None = None):
    """The six axis-view entries (+x, -x, +y, -y, +z, -z) of an 18- or 6-view set."""
    n = len(items)
    if n not in (6, 18):
        raise ValueError(f"canonical subset needs 6 or 18 views, got {n}")
    idx = list(sphere.canonical_indices) if sphere is not None else list(range(6))
    return items[idx] if isinstance(items, np.ndarray) else [items[i] for i in idx]


def inverse_element(elements: list[ArrElement], k: int) -> int:
    return arr_index(elements[k].signed_perm.T)


def compose_index(a: int, b: int) -> int:
    """Index of ``g_a @ g_b``."""
    els = enumerate_arr()
    return arr_index(els[a].signed_perm @ els[b].signed_perm)

