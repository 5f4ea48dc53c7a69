"""Exact brute-force neighbor search.

Everything approximate in the package is checked against this module, so it
favours determinism over raw speed: distances are recomputed pairwise for the
final ranking and ties always go to the smaller item id.
"""

from __future__ import annotations

import csv
import enum
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from latentprobe.core import EmbeddingSet
from latentprobe.errors import InputError

THREADS_ENV = "LATENTPROBE_THREADS"
_BLOCK = 512


class Metric(str, enum.Enum):
    EUCLIDEAN = "euclidean"
    COSINE = "cosine_distance"
    INNER_PRODUCT = "inner_product_desc"
    HAMMING = "hamming"

    @classmethod
    def parse(cls, value) -> "Metric":
        if isinstance(value, cls):
            return value
        aliases = {"cosine": cls.COSINE, "ip": cls.INNER_PRODUCT, "inner_product": cls.INNER_PRODUCT, "l2": cls.EUCLIDEAN}
        if value in aliases:
            return aliases[value]
        try:
            return cls(value)
        except ValueError:
            raise InputError(f"unknown metric {value!r}") from None

    @property
    def descending(self) -> bool:
        return self is Metric.INNER_PRODUCT


@dataclass(frozen=True)
class NeighborTable:
    k: int
    query_ids: np.ndarray
    neighbor_ids: np.ndarray
    distances: np.ndarray
    metric: Metric
    self_excluded: bool

    def __len__(self) -> int:
        return len(self.query_ids)

    def to_csv(self, path) -> None:
        with open(Path(path), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["query_id", "rank", "neighbor_id", "distance"])
            for q, ids, dist in zip(self.query_ids, self.neighbor_ids, self.distances):
                for rank, (j, dv) in enumerate(zip(ids, dist), 1):
                    w.writerow([int(q), rank, int(j), repr(float(dv))])

    @classmethod
    def from_csv(cls, path, metric, self_excluded: bool = True) -> "NeighborTable":
        rows: dict[int, list[tuple[int, int, float]]] = {}
        with open(Path(path), newline="") as fh:
            for rec in csv.DictReader(fh):
                rows.setdefault(int(rec["query_id"]), []).append(
                    (int(rec["rank"]), int(rec["neighbor_id"]), float(rec["distance"]))
                )
        qids = np.array(sorted(rows), dtype=np.int64)
        ordered = [sorted(rows[q]) for q in qids]
        k = len(ordered[0]) if ordered else 0
        if any(len(r) != k for r in ordered):
            raise InputError("ragged neighbor table")
        ids = np.array([[j for _, j, _ in r] for r in ordered], dtype=np.int64).reshape(len(qids), k)
        dist = np.array([[dv for _, _, dv in r] for r in ordered], dtype=np.float64).reshape(len(qids), k)
        return cls(k, qids, ids, dist, Metric.parse(metric), self_excluded)


def worker_count() -> int:
    raw = os.environ.get(THREADS_ENV)
    cap = os.cpu_count() or 1
    if raw:
        try:
            return max(1, min(int(raw), cap))
        except ValueError:
            raise InputError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
    return min(4, cap)


# ------------------------------------------------------------- distances

def euclidean_to(rows: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Direct per-row L2 distance. Shared with IVF so both return identical floats."""
    diff = rows - q
    # plain add.reduce per row: summation order does not depend on memory alignment
    return np.sqrt(np.square(diff).sum(axis=1))


def bits_of(vectors: np.ndarray) -> np.ndarray:
    """Bit view used by the hamming metric: any nonzero coordinate is a 1."""
    return (np.asarray(vectors) != 0).astype(np.float64)


def _unit_rows(x: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(x, axis=1)
    if (norms == 0).any():
        raise InputError(f"cosine distance undefined for zero row {int(np.flatnonzero(norms == 0)[0])}")
    return x / norms[:, None]


def _select(values: np.ndarray, k: int, band: float = 0.0) -> np.ndarray:
    """Indices whose value is within ``band`` of the k-th smallest, in ascending index order."""
    kth = np.partition(values, k - 1)[k - 1]
    return np.flatnonzero(values <= kth + band)


def _rank(cand: np.ndarray, dist: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    # cand is ascending, so a stable sort leaves ties in id order
    order = np.argsort(dist, kind="stable")[:k]
    return cand[order], dist[order]


def _knn_block(x, q_idx, k, metric, exclude_self, aux):
    q = x[q_idx]
    out_ids = np.empty((len(q_idx), k), dtype=np.int64)
    out_d = np.empty((len(q_idx), k), dtype=np.float64)
    if metric is Metric.EUCLIDEAN:
        sq = aux["sq"]
        approx = sq[q_idx, None] + sq[None, :] - 2.0 * (q @ x.T)
        # Gram-trick rounding error bound; every candidate within it is recomputed exactly
        band = 1e-9 * (sq[q_idx, None] + aux["sq_max"]) + 1e-300
    elif metric is Metric.COSINE:
        u = aux["unit"]
        approx = np.clip(1.0 - u[q_idx] @ u.T, 0.0, 2.0)
    elif metric is Metric.INNER_PRODUCT:
        approx = -(q @ x.T)
    else:
        b = aux["pm"]
        approx = (x.shape[1] - b[q_idx] @ b.T) / 2.0
        approx = np.rint(approx)
    if exclude_self:
        approx[np.arange(len(q_idx)), q_idx] = np.inf
    for r, i in enumerate(q_idx):
        row = approx[r]
        if metric is Metric.EUCLIDEAN:
            cand = _select(row, k, band[r, 0])
            if exclude_self:
                cand = cand[cand != i]
            exact = euclidean_to(x[cand], x[i])
            ids, dv = _rank(cand, exact, k)
        else:
            cand = _select(row, k)
            ids, dv = _rank(cand, row[cand], k)
        out_ids[r] = ids
        out_d[r] = -dv if metric is Metric.INNER_PRODUCT else dv
    return out_ids, out_d


def exact_knn(e: EmbeddingSet, k: int, metric="euclidean", exclude_self: bool = True) -> NeighborTable:
    """True k nearest neighbours of every item, ties broken by ascending id."""
    metric = Metric.parse(metric)
    n = e.n
    limit = n - (1 if exclude_self else 0)
    if not (1 <= k <= limit):
        raise InputError(f"k={k} out of range [1, {limit}] for N={n} (exclude_self={exclude_self})")
    x = e.vectors
    aux = {}
    if metric is Metric.EUCLIDEAN:
        aux["sq"] = np.einsum("ij,ij->i", x, x)
        aux["sq_max"] = float(aux["sq"].max())
    elif metric is Metric.COSINE:
        aux["unit"] = _unit_rows(x)
    elif metric is Metric.HAMMING:
        aux["pm"] = 2.0 * bits_of(x) - 1.0

    blocks = [np.arange(s, min(s + _BLOCK, n)) for s in range(0, n, _BLOCK)]
    ids = np.empty((n, k), dtype=np.int64)
    dist = np.empty((n, k), dtype=np.float64)

    def run(block):
        bi, bd = _knn_block(x, block, k, metric, exclude_self, aux)
        ids[block] = bi
        dist[block] = bd

    workers = worker_count()
    if workers > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(run, blocks))
    else:
        for b in blocks:
            run(b)
    return NeighborTable(k, e.ids.copy(), e.ids[ids], dist, metric, exclude_self)


def occurrence_counts(t: NeighborTable, n_items: int) -> np.ndarray:
    """How often each item appears across all neighbour lists (the N_k vector)."""
    flat = np.asarray(t.neighbor_ids).ravel()
    if flat.size and (flat.min() < 0 or flat.max() >= n_items):
        raise InputError(f"neighbor id outside [0, {n_items})")
    return np.bincount(flat, minlength=n_items).astype(np.int64)
