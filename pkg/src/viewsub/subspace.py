"""PCA, ICA and NMF subspaces learned from an ensemble of depth images.

The ensemble is an ``M x N`` matrix whose columns are vectorized depth images.
"""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, field

import numpy as np

from .mesh import MeshError
from .pose import normalize_pose
from .render import RESOLUTION, geodesic_sphere, render_views

log = logging.getLogger(__name__)

DEFAULT_DIMS = {"pca": 40, "ica": 20, "nmf": 30}
NMF_FLOOR = 1e-12


class SubspaceError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class SubspaceModel:
    kind: str
    K: int
    mean: np.ndarray  # (M,), zeros for NMF
    projector: np.ndarray | None  # (K, M), None for NMF
    basis: np.ndarray  # (M, K) basis images as columns
    spectrum: np.ndarray | None = None  # PCA eigenvalues of the scatter matrix
    seed: int = 0
    converged: bool = True
    n_iter: int = 0
    nmf_project_iterations: int = 100
    meta: dict = field(default_factory=dict)

    @property
    def M(self) -> int:
        return len(self.mean)

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        h.update(f"{self.kind}:{self.K}:{self.seed}:{self.nmf_project_iterations}".encode())
        for a in (self.mean, self.projector, self.basis, self.spectrum):
            if a is not None:
                h.update(np.ascontiguousarray(a, dtype="<f8").tobytes())
        return h.hexdigest()


def assemble_training_matrix(meshes, res: int = RESOLUTION, dtype=np.float64) -> np.ndarray:
    """Six canonical views of every model, vectorized into consecutive columns."""
    sphere = geodesic_sphere(0)
    cols = []
    for k, mesh in enumerate(meshes):
        try:
            normalized, _ = normalize_pose(mesh)
        except MeshError as exc:
            log.warning("skipping training model %d: %s", k, exc)
            continue
        cols.append(render_views(normalized, sphere, res).reshape(sphere.n_views, -1))
    if not cols:
        raise SubspaceError("empty training ensemble")
    return np.concatenate(cols).T.astype(dtype, copy=False)


def _check_dim(X: np.ndarray, K: int) -> None:
    M, N = X.shape
    if K < 1 or K > min(M, N):
        raise SubspaceError(f"dimension K={K} must lie in [1, {min(M, N)}]")


def _fix_signs(V: np.ndarray) -> np.ndarray:
    # largest-magnitude entry of every column positive, for reproducible files
    idx = np.argmax(np.abs(V), axis=0)
    s = np.sign(V[idx, np.arange(V.shape[1])])
    s[s == 0] = 1.0
    return V * s


def pca_eig(X: np.ndarray, K: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Mean, top-K eigenvectors (M x K) and eigenvalues of ``G = (X - m)(X - m)^T``.

    With fewer samples than pixels the N x N Gram matrix is diagonalized
    instead of G; both share their nonzero spectrum.
    """
    X = np.asarray(X, dtype=np.float64)
    _check_dim(X, K)
    M, N = X.shape
    mean = X.mean(axis=1)
    Xc = X - mean[:, None]
    if N <= M:
        beta, U = np.linalg.eigh(Xc.T @ Xc)
        beta, U = beta[::-1], U[:, ::-1]
    else:
        beta, V = np.linalg.eigh(Xc @ Xc.T)
        beta, V = beta[::-1], V[:, ::-1]
    tol = max(beta[0], 0.0) * max(M, N) * np.finfo(float).eps
    rank = int(np.sum(beta > tol))
    if K > rank:
        raise SubspaceError(f"dimension K={K} exceeds the ensemble rank {rank}")
    alpha = beta[:K].copy()
    if N <= M:
        V = Xc @ U[:, :K] / np.sqrt(alpha)
    else:
        V = V[:, :K]
    return mean, _fix_signs(V), alpha


def train_pca(X: np.ndarray, K: int = DEFAULT_DIMS["pca"]) -> SubspaceModel:
    mean, V, alpha = pca_eig(X, K)
    return SubspaceModel(
        kind="pca",
        K=K,
        mean=mean,
        projector=np.ascontiguousarray(V.T),
        basis=V,
        spectrum=alpha,
    )


# ---------------------------------------------------------------------------
# ICA
# ---------------------------------------------------------------------------


def _sym_decorrelate(W: np.ndarray) -> np.ndarray:
    """(W W^T)^(-1/2) W"""
    s, u = np.linalg.eigh(W @ W.T)
    s = np.clip(s, np.finfo(float).tiny, None)
    return (u * (1.0 / np.sqrt(s))) @ u.T @ W


def fastica_rotation(
    Z: np.ndarray, seed: int = 0, tol: float = 1e-4, max_iter: int = 200
) -> tuple[np.ndarray, bool, int]:
    """Symmetric FastICA with the tanh contrast on whitened data ``Z`` (K x N).

    Returns the orthogonal de-mixing rotation, a convergence flag and the
    number of iterations used. Without convergence the iterate with the
    smallest direction change is returned.
    """
    K, N = Z.shape
    rng = np.random.default_rng(seed)
    W = _sym_decorrelate(rng.normal(size=(K, K)))
    best, best_lim = W, np.inf
    for it in range(1, max_iter + 1):
        Y = np.tanh(W @ Z)
        W_new = (Y @ Z.T) / N - np.mean(1.0 - Y**2, axis=1)[:, None] * W
        W_new = _sym_decorrelate(W_new)
        lim = float(np.max(np.abs(np.abs(np.sum(W_new * W, axis=1)) - 1.0)))
        W = W_new
        if lim < best_lim:
            best, best_lim = W, lim
        if lim < tol:
            return W, True, it
    return best, False, max_iter


def train_ica(X: np.ndarray, K: int = DEFAULT_DIMS["ica"], seed: int = 0,
              tol: float = 1e-4, max_iter: int = 200) -> SubspaceModel:
    """Centre, whiten with the top-K principal directions, then rotate with FastICA."""
    X = np.asarray(X, dtype=np.float64)
    N = X.shape[1]
    mean, V, alpha = pca_eig(X, K)
    whiten = V.T / np.sqrt(alpha / N)[:, None]  # (K, M)
    Z = whiten @ (X - mean[:, None])
    R, converged, n_iter = fastica_rotation(Z, seed=seed, tol=tol, max_iter=max_iter)
    if not converged:
        log.warning("FastICA did not converge in %d iterations", max_iter)
    projector = R @ whiten
    return SubspaceModel(
        kind="ica",
        K=K,
        mean=mean,
        projector=projector,
        basis=np.linalg.pinv(projector),
        seed=seed,
        converged=converged,
        n_iter=n_iter,
        meta={"rotation": R},
    )


def amari_index(P: np.ndarray) -> float:
    """Normalized Amari error of a square gain matrix; 0 iff P is a scaled permutation."""
    P = np.abs(np.asarray(P, dtype=np.float64))
    K = P.shape[0]
    if K == 1:
        return 0.0
    rows = (P.sum(axis=1) / P.max(axis=1) - 1.0).sum()
    cols = (P.sum(axis=0) / P.max(axis=0) - 1.0).sum()
    return float((rows + cols) / (2.0 * K * (K - 1)))


# ---------------------------------------------------------------------------
# NMF
# ---------------------------------------------------------------------------


def nmf_objective(X, U, H) -> float:
    R = X - U @ H
    return float(np.sum(R * R))


def nmf_factorize(X: np.ndarray, K: int, iterations: int = 300, seed: int = 0,
                  track_objective: bool = False):
    """Lee-Seung multiplicative updates for ``min ||X - U H||_F^2`` with U, H >= 0.

    Returns ``(U, H, history)``; ``history`` holds the objective before the
    first update and after every iteration when ``track_objective`` is set.
    """
    X = np.asarray(X, dtype=np.float64)
    if np.any(X < 0):
        raise SubspaceError("NMF needs a nonnegative ensemble")
    _check_dim(X, K)
    M, N = X.shape
    rng = np.random.default_rng(seed)
    # uniform on (0, 1]
    U = 1.0 - rng.random((M, K))
    H = 1.0 - rng.random((K, N))
    history = [nmf_objective(X, U, H)] if track_objective else []
    for _ in range(iterations):
        H *= (U.T @ X) / ((U.T @ U) @ H + NMF_FLOOR)
        U *= (X @ H.T) / (U @ (H @ H.T) + NMF_FLOOR)
        if track_objective:
            history.append(nmf_objective(X, U, H))
    return U, H, history


def nmf_solve_coefficients(U: np.ndarray, X: np.ndarray, iterations: int = 100) -> np.ndarray:
    """Nonnegative coefficients ``h`` with ``x ~ U h`` for every column of X."""
    K = U.shape[1]
    X = np.asarray(X, dtype=np.float64).reshape(U.shape[0], -1)
    H = np.full((K, X.shape[1]), 1.0 / K)
    UtX = U.T @ X
    UtU = U.T @ U
    for _ in range(iterations):
        H *= UtX / (UtU @ H + NMF_FLOOR)
    return H


def train_nmf(X: np.ndarray, K: int = DEFAULT_DIMS["nmf"], iterations: int = 300,
              seed: int = 0) -> SubspaceModel:
    U, H, _ = nmf_factorize(X, K, iterations=iterations, seed=seed)
    return SubspaceModel(
        kind="nmf",
        K=K,
        mean=np.zeros(U.shape[0]),
        projector=None,
        basis=U,
        seed=seed,
        n_iter=iterations,
        meta={"H": H},
    )


def train(kind: str, X: np.ndarray, K: int | None = None, seed: int = 0) -> SubspaceModel:
    kind = kind.lower()
    K = DEFAULT_DIMS[kind] if K is None else K
    if kind == "pca":
        return train_pca(X, K)
    if kind == "ica":
        return train_ica(X, K, seed=seed)
    if kind == "nmf":
        return train_nmf(X, K, seed=seed)
    raise SubspaceError(f"unknown subspace kind {kind!r}")


# ---------------------------------------------------------------------------
# projection
# ---------------------------------------------------------------------------


def project_many(model: SubspaceModel, images) -> np.ndarray:
    """Feature vectors (n, K) for a stack of images (n, R, R) or vectors (n, M)."""
    imgs = np.asarray(images, dtype=np.float64)
    n = imgs.shape[0]
    flat = imgs.reshape(n, -1)
    if flat.shape[1] != model.M:
        raise SubspaceError(f"image has {flat.shape[1]} pixels, model expects {model.M}")
    if model.kind == "nmf":
        return nmf_solve_coefficients(model.basis, flat.T, model.nmf_project_iterations).T
    return (flat - model.mean) @ model.projector.T


def project(model: SubspaceModel, img) -> np.ndarray:
    return project_many(model, np.asarray(img)[None])[0]
