"""Continuous PCA pose normalization and elongation categorization."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .mesh import MeshError, TriangleMesh, transform_mesh, triangle_areas

# below this |lambda_1| the object is treated as a point
LAMBDA_FLOOR = 1e-12
# relative threshold for the second eigenvalue (rod-like objects)
RATIO_EPS = 1e-9


class DegenerateMeshError(MeshError):
    pass


class Category(enum.IntEnum):
    ELONGATED = 0
    SPHERICAL = 1


@dataclass(frozen=True)
class PoseInfo:
    centroid: np.ndarray
    rotation: np.ndarray  # rows are e1, e2, e3
    scale: float
    eigenvalues: tuple[float, float, float]
    ratios: tuple[float, float, float]
    category: Category | None = None

    @property
    def a1(self) -> float:
        return self.ratios[0]

    @property
    def a3(self) -> float:
        return self.ratios[2]


def cpca_covariance(mesh: TriangleMesh) -> tuple[np.ndarray, np.ndarray]:
    """Area-weighted surface centroid and covariance of the continuous surface.

    Uses the exact per-triangle second moment
    ``int_T p p^T dA = area/12 * (sum_i v_i v_i^T + 9 m m^T)``.
    """
    areas = triangle_areas(mesh)
    total = areas.sum()
    if not total > 0:
        raise DegenerateMeshError("mesh has zero surface area")
    # shift to the vertex mean first to limit cancellation
    origin = mesh.vertices.mean(axis=0)
    tri = mesh.vertices[mesh.triangles] - origin  # (m, 3 corners, 3)
    mids = tri.mean(axis=1)
    centroid = areas @ mids / total

    second = np.einsum("t,tki,tkj->ij", areas, tri, tri)
    second += 9.0 * np.einsum("t,ti,tj->ij", areas, mids, mids)
    second /= 12.0 * total
    cov = second - np.outer(centroid, centroid)
    cov = 0.5 * (cov + cov.T)
    return centroid + origin, cov


def principal_axes(cov) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues sorted descending and a right-handed eigenvector frame.

    Returns ``(lam, axes)`` with ``axes[i]`` the i-th principal axis.
    """
    cov = np.asarray(cov, dtype=np.float64)
    if not np.allclose(cov, cov.T, rtol=0, atol=1e-9 * max(1.0, np.abs(cov).max())):
        raise ValueError("covariance must be symmetric")
    lam, vec = np.linalg.eigh(0.5 * (cov + cov.T))
    order = np.argsort(lam, kind="stable")[::-1]
    lam = lam[order]
    axes = vec[:, order].T.copy()
    axes[2] = np.cross(axes[0], axes[1])
    return lam, axes


def eigenvalue_ratios(l1: float, l2: float, l3: float) -> tuple[float, float, float]:
    """(a1, a2, a3) = (l2/l1, l3/l1, l3/l2) with a guard for rod-like objects."""
    l3 = max(l3, 0.0)
    if l1 <= LAMBDA_FLOOR:
        raise DegenerateMeshError(f"largest eigenvalue {l1:g} is numerically zero")
    if l2 <= RATIO_EPS * l1:
        return 0.0, 0.0, 1.0
    a1 = min(l2 / l1, 1.0)
    a3 = min(l3 / l2, 1.0)
    return a1, a1 * a3, a3


def categorize(a1: float, a3: float, t_c: float) -> Category:
    if math.hypot(a1, a3) <= t_c:
        return Category.ELONGATED
    return Category.SPHERICAL


def normalize_pose(mesh: TriangleMesh, t_c: float | None = None) -> tuple[TriangleMesh, PoseInfo]:
    """Translate, rotate onto principal axes and scale into the unit ball."""
    centroid, cov = cpca_covariance(mesh)
    lam, axes = principal_axes(cov)
    lam = np.maximum(lam, 0.0)
    ratios = eigenvalue_ratios(*lam)

    centered = mesh.vertices - centroid
    scale = float(np.sqrt((centered**2).sum(axis=1)).max())
    if not scale > 0:
        raise DegenerateMeshError("all vertices coincide")
    out = transform_mesh(mesh, axes / scale, -(axes @ centroid) / scale)

    category = None if t_c is None else categorize(ratios[0], ratios[2], t_c)
    info = PoseInfo(
        centroid=centroid,
        rotation=axes,
        scale=scale,
        eigenvalues=tuple(float(x) for x in lam),
        ratios=ratios,
        category=category,
    )
    return out, info
