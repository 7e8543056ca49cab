"""Model descriptors, filtered four-case distances and ranked lists."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .arr import build_view_maps, remap_views
from .mesh import MeshError, TriangleMesh
from .pose import Category, categorize, normalize_pose
from .render import geodesic_sphere, render_views
from .subspace import SubspaceModel, project_many

log = logging.getLogger(__name__)

N_ARR = 48
FEATURE_DTYPE = np.float32
MAX_RATIO_DISTANCE = math.sqrt(2.0)


class _Filtered:
    """Marker for a database model rejected by the eigenvalue-ratio filter."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "FILTERED"

    def __reduce__(self):
        return (_Filtered, ())


FILTERED = _Filtered()


@dataclass(frozen=True, eq=False)
class ModelDescriptor:
    id: str
    category: Category
    a1: float
    a3: float
    arr_features: np.ndarray  # (48, n_v, K) float32; index 0 is the untransformed model

    @property
    def n_v(self) -> int:
        return self.arr_features.shape[1]

    @property
    def K(self) -> int:
        return self.arr_features.shape[2]

    def canonical_features(self) -> np.ndarray:
        """(48, 6, K): axis views of every ARR version."""
        return self.arr_features[:, :6]


@dataclass(frozen=True, eq=False)
class QueryDescriptor:
    a1: float
    a3: float
    category: Category
    features: np.ndarray  # (n_v, K) float32
    id: str | None = None

    @property
    def n_v(self) -> int:
        return self.features.shape[0]

    @property
    def canonical(self) -> np.ndarray:
        return self.features[:6]


def _views_for(category: Category) -> int:
    return 6 if category == Category.ELONGATED else 18


def _render_normalized(mesh: TriangleMesh, t_c: float, n_views: int | None):
    normalized, info = normalize_pose(mesh, t_c)
    n_v = _views_for(info.category) if n_views is None else n_views
    sphere = geodesic_sphere(0 if n_v == 6 else 1)
    return render_views(normalized, sphere), sphere, info


def preprocess_database_model(mesh: TriangleMesh, subspace: SubspaceModel, t_c: float = 0.4,
                              model_id: str = "", n_views: int | None = None) -> ModelDescriptor:
    """Pose-normalize, categorize, render, and project all 48 ARR versions.

    ``n_views`` forces 6 or 18 views regardless of category (used by
    categorization sweeps, which need 18-view descriptors for every model).
    """
    views, sphere, info = _render_normalized(mesh, t_c, n_views)
    feats = np.empty((N_ARR, sphere.n_views, subspace.K), dtype=FEATURE_DTYPE)
    for r, element in enumerate(build_view_maps(sphere)):
        imgs = views if r == 0 else remap_views(views, element)
        feats[r] = project_many(subspace, imgs)
    feats.setflags(write=False)
    return ModelDescriptor(model_id, info.category, info.a1, info.a3, feats)


def try_preprocess_database_model(mesh, subspace, t_c=0.4, model_id="", n_views=None):
    """As :func:`preprocess_database_model` but returns None for degenerate meshes."""
    try:
        return preprocess_database_model(mesh, subspace, t_c, model_id, n_views)
    except MeshError as exc:
        log.warning("skipping model %s: %s", model_id, exc)
        return None


def preprocess_query(mesh: TriangleMesh, subspace: SubspaceModel, t_c: float = 0.4,
                     query_id: str | None = None) -> QueryDescriptor:
    views, _, info = _render_normalized(mesh, t_c, None)
    feats = project_many(subspace, views).astype(FEATURE_DTYPE)
    feats.setflags(write=False)
    return QueryDescriptor(info.a1, info.a3, info.category, feats, query_id)


def query_from_descriptor(d: ModelDescriptor) -> QueryDescriptor:
    """The query descriptor the same mesh would produce (identity ARR version)."""
    return QueryDescriptor(d.a1, d.a3, d.category, d.arr_features[0], d.id)


def recategorize(desc, t_c: float):
    """Re-run categorization at a new threshold without re-rendering.

    An 18-view descriptor can always drop to its six axis views; going from
    6 to 18 views needs a fresh render and raises ValueError.
    """
    cat = categorize(desc.a1, desc.a3, t_c)
    need = _views_for(cat)
    if need == desc.n_v:
        if cat == desc.category:
            return desc
    elif need > desc.n_v:
        raise ValueError(f"model {desc.id!r} needs 18 views at t_c={t_c}; re-render it")
    if isinstance(desc, ModelDescriptor):
        feats = desc.arr_features if need == desc.n_v else desc.canonical_features()
        return ModelDescriptor(desc.id, cat, desc.a1, desc.a3, feats)
    feats = desc.features if need == desc.n_v else desc.canonical
    return QueryDescriptor(desc.a1, desc.a3, cat, feats, desc.id)


def ratio_distance(q, d) -> float:
    return math.hypot(q.a1 - d.a1, q.a3 - d.a3)


def set_distance(Fa, Fb) -> float:
    """Mean of per-view L2 distances between two equally sized feature sets."""
    Fa = np.asarray(Fa, dtype=np.float64)
    Fb = np.asarray(Fb, dtype=np.float64)
    if Fa.shape != Fb.shape:
        raise ValueError(f"feature sets differ in shape: {Fa.shape} vs {Fb.shape}")
    return float(np.linalg.norm(Fa - Fb, axis=-1).mean())


def _operands(q: QueryDescriptor, d: ModelDescriptor) -> tuple[np.ndarray, np.ndarray]:
    q_sph = q.category == Category.SPHERICAL
    d_sph = d.category == Category.SPHERICAL
    if q_sph and d_sph:
        return q.features, d.arr_features
    if q_sph:
        return q.canonical, d.arr_features
    if d_sph:
        return q.features, d.canonical_features()
    return q.features, d.arr_features


def feature_distance(q: QueryDescriptor, d: ModelDescriptor) -> float:
    """min over the 48 ARR versions of the mean per-view feature distance."""
    fq, fd = _operands(q, d)
    if fq.shape[-1] != fd.shape[-1]:
        raise ValueError(f"feature dimensions differ: {fq.shape[-1]} vs {fd.shape[-1]}")
    if fq.shape[0] != fd.shape[1]:
        raise ValueError(f"view counts differ: {fq.shape[0]} vs {fd.shape[1]}")
    diff = fd.astype(np.float64) - fq.astype(np.float64)
    per_version = np.sqrt(np.einsum("rvk,rvk->rv", diff, diff)).mean(axis=1)
    return float(per_version.min())


def model_distance(q: QueryDescriptor, d: ModelDescriptor, t_f: float = 0.4):
    """DIST(q, d), or FILTERED when the eigenvalue ratios are too far apart."""
    if ratio_distance(q, d) > t_f:
        return FILTERED
    return feature_distance(q, d)


@dataclass(frozen=True)
class RankedEntry:
    id: str
    distance: float | None  # None when filtered
    ratio_distance: float
    filtered: bool


def order_entries(entries: list[RankedEntry]) -> list[RankedEntry]:
    """Unfiltered by distance, then filtered by ratio distance; ties by id."""
    kept = sorted((e for e in entries if not e.filtered), key=lambda e: (e.distance, e.id))
    dropped = sorted((e for e in entries if e.filtered), key=lambda e: (e.ratio_distance, e.id))
    return kept + dropped


def rank_database(q: QueryDescriptor, database, t_f: float = 0.4,
                  exclude_self: bool = False) -> list[RankedEntry]:
    entries = []
    for d in database:
        if exclude_self and q.id is not None and d.id == q.id:
            continue
        rd = ratio_distance(q, d)
        if rd > t_f:
            entries.append(RankedEntry(d.id, None, rd, True))
        else:
            entries.append(RankedEntry(d.id, feature_distance(q, d), rd, False))
    return order_entries(entries)


def ranked_csv_lines(query_id: str, ranked: list[RankedEntry], top: int | None = None) -> list[str]:
    rows = ranked if top is None else ranked[:top]
    out = []
    for k, e in enumerate(rows, start=1):
        dist = "" if e.filtered else repr(e.distance)
        out.append(f"{query_id},{k},{e.id},{dist},{int(e.filtered)}")
    return out
