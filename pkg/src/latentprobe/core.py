"""Embedding corpus container, file ingestion and row normalizations."""

from __future__ import annotations

import enum
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from latentprobe.errors import InputError

RAW_DTYPE = "f32le"


class NormalizationMode(str, enum.Enum):
    NONE = "none"
    L2_ROWS = "l2_rows"
    UNIT_HYPERSPHERE_SCALE = "unit_hypersphere_scale"

    @classmethod
    def parse(cls, value: str | "NormalizationMode") -> "NormalizationMode":
        if isinstance(value, cls):
            return value
        aliases = {"l2": cls.L2_ROWS, "hypersphere": cls.UNIT_HYPERSPHERE_SCALE}
        if value in aliases:
            return aliases[value]
        try:
            return cls(value)
        except ValueError:
            raise InputError(f"unknown normalization mode {value!r}") from None


@dataclass(frozen=True, eq=False)
class EmbeddingSet:
    """An N x D embedding matrix with one integer class label per row.

    Vectors are held as float64 regardless of how they were stored. The
    arrays are marked read-only so a set can be shared between workers.
    """

    vectors: np.ndarray
    labels: np.ndarray
    ids: np.ndarray | None = None
    name: str = "corpus"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        vectors = np.array(self.vectors, dtype=np.float64, copy=True)
        if vectors.ndim == 1:
            vectors = vectors[:, None]
        if vectors.ndim != 2 or vectors.shape[0] < 1 or vectors.shape[1] < 1:
            raise InputError(f"vectors must be a non-empty 2-D array, got shape {vectors.shape}")
        bad = ~np.isfinite(vectors).all(axis=1)
        if bad.any():
            raise InputError(f"non-finite value in row {int(np.flatnonzero(bad)[0])}")

        labels = np.asarray(self.labels)
        if labels.ndim != 1 or labels.shape[0] != vectors.shape[0]:
            raise InputError(f"label count {labels.size} != row count {vectors.shape[0]}")
        if labels.size and not np.issubdtype(labels.dtype, np.integer):
            as_int = labels.astype(np.int64)
            if not np.array_equal(as_int, labels):
                raise InputError("labels must be integers")
            labels = as_int
        labels = labels.astype(np.int64, copy=True)
        if (labels < 0).any():
            raise InputError(f"negative class id in row {int(np.flatnonzero(labels < 0)[0])}")

        ids = np.arange(vectors.shape[0], dtype=np.int64) if self.ids is None else np.array(self.ids, dtype=np.int64)
        if ids.shape != (vectors.shape[0],):
            raise InputError("ids must have one entry per row")

        for arr in (vectors, labels, ids):
            arr.setflags(write=False)
        object.__setattr__(self, "vectors", vectors)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "ids", ids)

    @property
    def n(self) -> int:
        return self.vectors.shape[0]

    @property
    def d(self) -> int:
        return self.vectors.shape[1]

    def __len__(self) -> int:
        return self.n

    def with_vectors(self, vectors: np.ndarray, **meta) -> "EmbeddingSet":
        return EmbeddingSet(vectors, self.labels, self.ids, self.name, {**self.meta, **meta})

    def fingerprint(self) -> str:
        """sha256 over the float32 storage bytes and the labels, as written by save_embeddings."""
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.vectors, dtype="<f4").tobytes())
        h.update("\n".join(str(int(v)) for v in self.labels).encode())
        return h.hexdigest()


def normalize(e: EmbeddingSet, mode: NormalizationMode | str) -> EmbeddingSet:
    """Return a copy of ``e`` under ``mode``; labels and ids are untouched."""
    mode = NormalizationMode.parse(mode)
    if mode is NormalizationMode.NONE:
        return e.with_vectors(e.vectors)
    norms = np.linalg.norm(e.vectors, axis=1)
    if mode is NormalizationMode.L2_ROWS:
        zero = norms == 0
        if zero.any():
            raise InputError(f"zero-norm row {int(np.flatnonzero(zero)[0])} cannot be L2-normalized")
        return e.with_vectors(e.vectors / norms[:, None], normalization=mode.value)
    top = norms.max()
    if top == 0:
        raise InputError("all rows are zero; cannot scale into the unit hypersphere")
    return e.with_vectors(e.vectors / top, normalization=mode.value)


def is_unit_norm(vectors: np.ndarray, tol: float) -> bool:
    norms = np.linalg.norm(vectors, axis=1)
    return bool(np.all(np.abs(norms - 1.0) <= tol))


# ---------------------------------------------------------------- file I/O

def sidecar_path(data_path: Path) -> Path:
    return data_path.with_name(data_path.name + ".json")


def save_embeddings(e: EmbeddingSet, data_path, labels_path=None) -> tuple[Path, Path]:
    """Write the raw little-endian float32 format plus its JSON sidecar and a labels file."""
    data_path = Path(data_path)
    labels_path = Path(labels_path) if labels_path is not None else data_path.with_suffix(".labels")
    arr = np.ascontiguousarray(e.vectors, dtype="<f4")
    data_path.write_bytes(arr.tobytes())
    sidecar = {"count": e.n, "dim": e.d, "dtype": RAW_DTYPE, "name": e.name}
    sidecar_path(data_path).write_text(json.dumps(sidecar, sort_keys=True) + "\n")
    labels_path.write_text("".join(f"{int(v)}\n" for v in e.labels))
    return data_path, labels_path


def _read_labels(path: Path) -> np.ndarray:
    out = []
    for lineno, line in enumerate(path.read_text().splitlines(), 1):
        line = line.strip()
        if not line:
            continue
        try:
            out.append(int(line))
        except ValueError:
            raise InputError(f"{path}:{lineno}: label {line!r} is not an integer") from None
    return np.asarray(out, dtype=np.int64)


def load_embeddings(data_path, labels_path=None, format: str = "raw_f32", name: str | None = None) -> EmbeddingSet:
    """Load a corpus.

    ``raw_f32`` expects ``<data_path>.json`` with count/dim and a labels file
    holding one integer per line. ``csv`` expects one row per item with the
    class label in the last column; ``labels_path`` is then ignored unless
    given, in which case it overrides the last column.
    """
    data_path = Path(data_path)
    if not data_path.exists():
        raise InputError(f"data file not found: {data_path}")
    if labels_path is not None:
        labels_path = Path(labels_path)
        if not labels_path.exists():
            raise InputError(f"labels file not found: {labels_path}")

    if format == "raw_f32":
        side = sidecar_path(data_path)
        if not side.exists():
            raise InputError(f"raw sidecar not found: {side}")
        meta = json.loads(side.read_text())
        count, dim = int(meta["count"]), int(meta["dim"])
        if meta.get("dtype", RAW_DTYPE) != RAW_DTYPE:
            raise InputError(f"unsupported raw dtype {meta['dtype']!r}")
        raw = data_path.read_bytes()
        if len(raw) != count * dim * 4:
            raise InputError(
                f"byte-length mismatch: {data_path} has {len(raw)} bytes, sidecar declares {count}x{dim} float32"
            )
        vectors = np.frombuffer(raw, dtype="<f4").reshape(count, dim).astype(np.float64)
        if labels_path is None:
            raise InputError("raw_f32 corpora need a labels file")
        labels = _read_labels(labels_path)
        name = name or meta.get("name") or data_path.stem
    elif format == "csv":
        try:
            table = np.loadtxt(data_path, delimiter=",", dtype=np.float64, ndmin=2)
        except ValueError as exc:
            raise InputError(f"{data_path}: {exc}") from None
        if table.shape[1] < 2:
            raise InputError(f"{data_path}: csv needs at least one vector column plus a label column")
        vectors, labels = table[:, :-1], table[:, -1]
        if labels_path is not None:
            labels = _read_labels(labels_path)
        name = name or data_path.stem
    else:
        raise InputError(f"unknown format {format!r}")

    bad = ~np.isfinite(vectors).all(axis=1)
    if bad.any():
        raise InputError(f"non-finite value in row {int(np.flatnonzero(bad)[0])}")
    if len(labels) != vectors.shape[0]:
        raise InputError(f"label count {len(labels)} != row count {vectors.shape[0]}")
    return EmbeddingSet(vectors, labels, name=name)


def file_hash(*paths) -> str:
    h = hashlib.sha256()
    for p in paths:
        if p is None:
            continue
        with open(p, "rb") as fh:
            for chunk in iter(lambda: fh.read(1 << 20), b""):
                h.update(chunk)
    return h.hexdigest()
