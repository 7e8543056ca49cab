"""Binary files for subspace models (``VSUB``) and descriptor databases (``VSTR``).

All integers are 32-bit little-endian, strings are UTF-8 with a length prefix.
Subspace arrays are stored as float64, descriptor features as float32.
"""

from __future__ import annotations

import os
import struct
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .pose import Category
from .retrieval import FEATURE_DTYPE, N_ARR, ModelDescriptor
from .subspace import SubspaceModel

MODEL_MAGIC = b"VSUB"
STORE_MAGIC = b"VSTR"
FORMAT_VERSION = 1


class StoreError(ValueError):
    pass


class _Writer:
    def __init__(self):
        self.parts: list[bytes] = []

    def raw(self, b: bytes):
        self.parts.append(b)

    def u8(self, x):
        self.parts.append(struct.pack("<B", x))

    def u32(self, x):
        self.parts.append(struct.pack("<I", x))

    def f64(self, x):
        self.parts.append(struct.pack("<d", x))

    def string(self, s: str):
        b = s.encode("utf-8")
        self.u32(len(b))
        self.parts.append(b)

    def array(self, a, dtype):
        self.parts.append(np.ascontiguousarray(a, dtype=dtype).tobytes())

    def getvalue(self) -> bytes:
        return b"".join(self.parts)


class _Reader:
    def __init__(self, data: bytes, what: str):
        self.data = data
        self.pos = 0
        self.what = what

    def raw(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise StoreError(f"{self.what} is truncated at byte {len(self.data)}")
        b = self.data[self.pos : self.pos + n]
        self.pos += n
        return b

    def u8(self) -> int:
        return struct.unpack("<B", self.raw(1))[0]

    def u32(self) -> int:
        return struct.unpack("<I", self.raw(4))[0]

    def f64(self) -> float:
        return struct.unpack("<d", self.raw(8))[0]

    def string(self) -> str:
        n = self.u32()
        try:
            return self.raw(n).decode("utf-8")
        except UnicodeDecodeError:
            raise StoreError(f"{self.what} contains an invalid string") from None

    def array(self, count: int, dtype) -> np.ndarray:
        dt = np.dtype(dtype)
        return np.frombuffer(self.raw(count * dt.itemsize), dtype=dt).copy()

    def header(self, magic: bytes) -> None:
        if self.raw(4) != magic:
            raise StoreError(f"{self.what} does not start with {magic.decode()}")
        version = self.u32()
        if version != FORMAT_VERSION:
            raise StoreError(f"{self.what} has format version {version}, expected {FORMAT_VERSION}")

    def finish(self) -> None:
        if self.pos != len(self.data):
            raise StoreError(f"{self.what} has {len(self.data) - self.pos} trailing bytes")


def _atomic_write(path, data: bytes) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# ---------------------------------------------------------------------------
# subspace models
# ---------------------------------------------------------------------------


def model_to_bytes(model: SubspaceModel) -> bytes:
    w = _Writer()
    w.raw(MODEL_MAGIC)
    w.u32(FORMAT_VERSION)
    w.string(model.kind)
    w.u32(model.K)
    w.u32(model.M)
    w.u32(model.seed)
    w.u8(int(model.converged))
    w.u32(model.n_iter)
    w.u32(model.nmf_project_iterations)
    w.array(model.mean, "<f8")
    w.array(model.basis, "<f8")
    for opt in (model.projector, model.spectrum):
        w.u8(opt is not None)
        if opt is not None:
            w.array(opt, "<f8")
    return w.getvalue()


def model_from_bytes(data: bytes, what: str = "model file") -> SubspaceModel:
    r = _Reader(data, what)
    r.header(MODEL_MAGIC)
    kind = r.string()
    if kind not in ("pca", "ica", "nmf"):
        raise StoreError(f"{what}: unknown subspace kind {kind!r}")
    K, M, seed = r.u32(), r.u32(), r.u32()
    converged = bool(r.u8())
    n_iter, nmf_iters = r.u32(), r.u32()
    mean = r.array(M, "<f8")
    basis = r.array(M * K, "<f8").reshape(M, K)
    projector = r.array(K * M, "<f8").reshape(K, M) if r.u8() else None
    spectrum = r.array(K, "<f8") if r.u8() else None
    r.finish()
    return SubspaceModel(kind, K, mean, projector, basis, spectrum, seed, converged, n_iter, nmf_iters)


def save_model(model: SubspaceModel, path) -> None:
    _atomic_write(path, model_to_bytes(model))


def load_model(path) -> SubspaceModel:
    return model_from_bytes(Path(path).read_bytes(), str(path))


# ---------------------------------------------------------------------------
# descriptor stores
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Fingerprint:
    kind: str
    K: int
    seed: int
    digest: str  # sha256 hex of the model content

    @classmethod
    def of(cls, model: SubspaceModel) -> "Fingerprint":
        return cls(model.kind, model.K, model.seed, model.fingerprint())


@dataclass
class DescriptorStore:
    fingerprint: Fingerprint
    t_c: float
    records: list[ModelDescriptor] = field(default_factory=list)
    version: int = FORMAT_VERSION

    def check_model(self, model: SubspaceModel) -> None:
        fp = Fingerprint.of(model)
        if fp != self.fingerprint:
            raise StoreError(
                f"store was built with {self.fingerprint.kind}-{self.fingerprint.K} "
                f"({self.fingerprint.digest[:12]}), model is {fp.kind}-{fp.K} ({fp.digest[:12]})"
            )


def store_to_bytes(store: DescriptorStore) -> bytes:
    fp = store.fingerprint
    w = _Writer()
    w.raw(STORE_MAGIC)
    w.u32(FORMAT_VERSION)
    w.string(fp.kind)
    w.u32(fp.K)
    w.u32(fp.seed)
    w.raw(bytes.fromhex(fp.digest))
    w.f64(store.t_c)
    w.u32(len(store.records))
    for d in store.records:
        if d.K != fp.K or d.arr_features.shape[0] != N_ARR:
            raise StoreError(f"record {d.id!r} has feature shape {d.arr_features.shape}")
        w.string(d.id)
        w.u8(int(d.category))
        w.f64(d.a1)
        w.f64(d.a3)
        w.u32(d.n_v)
        w.array(d.arr_features, "<f4")
    return w.getvalue()


def store_from_bytes(data: bytes, what: str = "descriptor store") -> DescriptorStore:
    r = _Reader(data, what)
    r.header(STORE_MAGIC)
    fp = Fingerprint(r.string(), r.u32(), r.u32(), r.raw(32).hex())
    t_c = r.f64()
    records = []
    for _ in range(r.u32()):
        rid = r.string()
        cat = r.u8()
        if cat not in (0, 1):
            raise StoreError(f"{what}: record {rid!r} has invalid category {cat}")
        a1, a3 = r.f64(), r.f64()
        n_v = r.u32()
        if n_v not in (6, 18):
            raise StoreError(f"{what}: record {rid!r} has {n_v} views")
        feats = r.array(N_ARR * n_v * fp.K, "<f4").astype(FEATURE_DTYPE).reshape(N_ARR, n_v, fp.K)
        feats.setflags(write=False)
        records.append(ModelDescriptor(rid, Category(cat), a1, a3, feats))
    r.finish()
    return DescriptorStore(fp, t_c, records)


def save_store(store: DescriptorStore, path) -> None:
    _atomic_write(path, store_to_bytes(store))


def load_store(path, model: SubspaceModel | None = None) -> DescriptorStore:
    store = store_from_bytes(Path(path).read_bytes(), str(path))
    if model is not None:
        store.check_model(model)
    return store
