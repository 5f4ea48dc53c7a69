"""Inverted-file index over a flat L2 coarse quantizer."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from latentprobe.ann.base import check_query
from latentprobe.core import EmbeddingSet
from latentprobe.errors import InputError
from latentprobe.knn import euclidean_to


@dataclass(frozen=True)
class IvfConfig:
    nlist: int = 100
    nprobe: int = 1
    kmeans_iters: int = 25
    seed: int = 0

    def __post_init__(self):
        if not (1 <= self.nprobe <= self.nlist):
            raise InputError(f"need 1 <= nprobe <= nlist, got nprobe={self.nprobe}, nlist={self.nlist}")
        if self.kmeans_iters < 0:
            raise InputError("kmeans_iters must be >= 0")


def _sq_dists(x: np.ndarray, c: np.ndarray) -> np.ndarray:
    d = np.einsum("ij,ij->i", x, x)[:, None] + np.einsum("ij,ij->i", c, c)[None, :] - 2.0 * (x @ c.T)
    return np.maximum(d, 0.0)


def assign(x: np.ndarray, centroids: np.ndarray, block: int = 4096) -> np.ndarray:
    out = np.empty(x.shape[0], dtype=np.int64)
    for s in range(0, x.shape[0], block):
        out[s : s + block] = np.argmin(_sq_dists(x[s : s + block], centroids), axis=1)
    return out


def kmeans_pp_init(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = x.shape[0]
    centers = np.empty((k, x.shape[1]))
    centers[0] = x[rng.integers(n)]
    closest = _sq_dists(x, centers[:1])[:, 0]
    for j in range(1, k):
        total = closest.sum()
        if total <= 0.0:
            # fewer distinct points than centers; pad with arbitrary rows
            idx = rng.integers(n)
        else:
            idx = int(np.searchsorted(np.cumsum(closest), rng.random() * total, side="right"))
            idx = min(idx, n - 1)
        centers[j] = x[idx]
        closest = np.minimum(closest, _sq_dists(x, centers[j : j + 1])[:, 0])
    return centers


def kmeans(x: np.ndarray, k: int, iters: int = 25, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Lloyd iterations from a k-means++ start.

    An empty cluster is re-seeded with the member of the largest cluster that
    lies farthest from that cluster's centroid, which splits it on the next pass.
    """
    rng = np.random.default_rng(seed)
    centers = kmeans_pp_init(x, k, rng)
    labels = assign(x, centers)
    for _ in range(iters):
        counts = np.bincount(labels, minlength=k)
        sums = np.zeros_like(centers)
        np.add.at(sums, labels, x)
        nonempty = counts > 0
        centers[nonempty] = sums[nonempty] / counts[nonempty, None]
        for j in np.flatnonzero(~nonempty):
            big = int(np.argmax(counts))
            members = np.flatnonzero(labels == big)
            far = members[int(np.argmax(euclidean_to(x[members], centers[big])))]
            centers[j] = x[far]
            labels[far] = j
            counts[big] -= 1
            counts[j] = 1
        new = assign(x, centers)
        if np.array_equal(new, labels):
            break
        labels = new
    return centers, assign(x, centers)


class IvfIndex:
    kind = "ivf"
    metric = "euclidean"
    descending = False

    def __init__(self, vectors: np.ndarray, centroids: np.ndarray, assignments: np.ndarray, cfg: IvfConfig):
        self.vectors = vectors
        self.centroids = centroids
        self.assignments = assignments
        self.cfg = cfg
        order = np.argsort(assignments, kind="stable")
        bounds = np.searchsorted(assignments[order], np.arange(cfg.nlist + 1))
        self.lists = [order[bounds[j] : bounds[j + 1]] for j in range(cfg.nlist)]

    @property
    def size(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def config_dict(self) -> dict:
        return asdict(self.cfg)

    def probe(self, q: np.ndarray, nprobe: int) -> np.ndarray:
        d = euclidean_to(self.centroids, q)
        return np.argsort(d, kind="stable")[:nprobe]

    def search(self, query, k: int, nprobe: int | None = None) -> tuple[np.ndarray, np.ndarray]:
        q = check_query(query, self.dim)
        nprobe = self.cfg.nprobe if nprobe is None else nprobe
        if not (1 <= nprobe <= self.cfg.nlist):
            raise InputError(f"nprobe={nprobe} outside [1, {self.cfg.nlist}]")
        cells = self.probe(q, nprobe)
        cand = np.sort(np.concatenate([self.lists[c] for c in cells]))
        dist = euclidean_to(self.vectors[cand], q)
        order = np.argsort(dist, kind="stable")[:k]
        return cand[order], dist[order]

    def arrays(self) -> dict:
        return {"vectors": self.vectors, "centroids": self.centroids, "assignments": self.assignments}

    @classmethod
    def from_arrays(cls, config: dict, arrays: dict) -> "IvfIndex":
        return cls(arrays["vectors"], arrays["centroids"], arrays["assignments"], IvfConfig(**config))


def ivf_build(e: EmbeddingSet, cfg: IvfConfig = IvfConfig()) -> IvfIndex:
    if cfg.nlist > e.n:
        raise InputError(f"nlist={cfg.nlist} exceeds corpus size N={e.n}")
    x = np.array(e.vectors)
    centroids, labels = kmeans(x, cfg.nlist, cfg.kmeans_iters, cfg.seed)
    return IvfIndex(x, centroids, labels, cfg)


def ivf_search(idx: IvfIndex, query, k: int, nprobe: int | None = None):
    return idx.search(query, k, nprobe)
