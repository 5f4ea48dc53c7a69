"""DBSCAN under cosine or Euclidean distance, scored against class labels with NMI and ARI."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from latentprobe.core import EmbeddingSet
from latentprobe.errors import InputError
from latentprobe.knn import Metric

NOISE = -1
HYPERSPHERE_TOL = 1e-6


@dataclass
class ClusterResult:
    assignments: np.ndarray
    n_clusters: int
    eps: float
    min_pts: int
    metric: str
    nmi: float | None = None
    ari: float | None = None
    noise_mode: str = "shared"

    @property
    def n_noise(self) -> int:
        return int(np.sum(self.assignments == NOISE))

    def to_dict(self, with_assignments: bool = False) -> dict:
        out = {
            "metric": self.metric,
            "eps": self.eps,
            "min_pts": self.min_pts,
            "n_clusters": self.n_clusters,
            "n_noise": self.n_noise,
            "nmi": self.nmi,
            "ari": self.ari,
            "noise_mode": self.noise_mode,
        }
        if with_assignments:
            out["assignments"] = self.assignments.tolist()
        return out


def _neighborhoods(x: np.ndarray, eps: float, metric: Metric, block: int = 1024) -> list[np.ndarray]:
    n = x.shape[0]
    out: list[np.ndarray] = []
    if metric is Metric.COSINE:
        norms = np.linalg.norm(x, axis=1)
        if (norms == 0).any():
            raise InputError("cosine DBSCAN needs nonzero rows")
        u = x / norms[:, None]
        for s in range(0, n, block):
            d = 1.0 - u[s : s + block] @ u.T
            out.extend(np.flatnonzero(row <= eps) for row in d)
    else:
        sq = np.einsum("ij,ij->i", x, x)
        for s in range(0, n, block):
            d2 = np.maximum(sq[s : s + block, None] + sq[None, :] - 2.0 * (x[s : s + block] @ x.T), 0.0)
            out.extend(np.flatnonzero(row <= eps * eps) for row in d2)
    for i, nb in enumerate(out):
        # a point is always in its own neighbourhood, whatever the rounding
        if not np.any(nb == i):
            out[i] = np.sort(np.append(nb, i))
    return out


def dbscan(e: EmbeddingSet | np.ndarray, eps: float, min_pts: int = 5, metric="euclidean") -> ClusterResult:
    """Density-based clustering; ``min_pts`` counts the point itself.

    Clusters are numbered by their smallest core member. A border point that
    touches several clusters joins the lowest-numbered one, which matches a
    classic expansion that scans points by ascending id.
    """
    metric = Metric.parse(metric)
    if metric not in (Metric.COSINE, Metric.EUCLIDEAN):
        raise InputError(f"DBSCAN supports cosine_distance or euclidean, not {metric.value}")
    if eps <= 0 or min_pts < 1:
        raise InputError("need eps > 0 and min_pts >= 1")
    x = e.vectors if isinstance(e, EmbeddingSet) else np.asarray(e, dtype=np.float64)
    if metric is Metric.EUCLIDEAN and np.linalg.norm(x, axis=1).max() > 1.0 + HYPERSPHERE_TOL:
        raise InputError("Euclidean DBSCAN expects the corpus scaled into the unit hypersphere (normalize hypersphere)")
    n = x.shape[0]
    nbhd = _neighborhoods(x, eps, metric)
    core = np.array([nb.size >= min_pts for nb in nbhd], dtype=bool)

    labels = np.full(n, NOISE, dtype=np.int64)
    cluster = 0
    for seed in range(n):
        if not core[seed] or labels[seed] != NOISE:
            continue
        labels[seed] = cluster
        queue = deque([seed])
        while queue:
            p = queue.popleft()
            for q in nbhd[p]:
                if core[q] and labels[q] == NOISE:
                    labels[q] = cluster
                    queue.append(q)
        cluster += 1

    for i in np.flatnonzero(~core):
        owners = labels[nbhd[i][core[nbhd[i]]]]
        if owners.size:
            labels[i] = owners.min()
    return ClusterResult(labels, cluster, float(eps), int(min_pts), metric.value)


# ------------------------------------------------------------ agreement scores

def _check_pair(a, b, min_len: int):
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape or a.ndim != 1:
        raise InputError(f"label vectors differ in length ({a.size} vs {b.size})")
    if a.size < min_len:
        raise InputError(f"need at least {min_len} labels")
    return a, b


def contingency(a, b) -> np.ndarray:
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    table = np.zeros((ai.max() + 1, bi.max() + 1), dtype=np.int64)
    np.add.at(table, (ai, bi), 1)
    return table


def _entropy(counts: np.ndarray) -> float:
    p = counts[counts > 0] / counts.sum()
    return float(-np.sum(p * np.log(p)))


def nmi(a, b) -> float:
    """Mutual information over the arithmetic mean of the two entropies; 0 if either entropy is 0."""
    a, b = _check_pair(a, b, 1)
    c = contingency(a, b).astype(np.float64)
    n = c.sum()
    ha, hb = _entropy(c.sum(axis=1)), _entropy(c.sum(axis=0))
    if ha == 0.0 or hb == 0.0:
        return 0.0
    pa = c.sum(axis=1, keepdims=True) / n
    pb = c.sum(axis=0, keepdims=True) / n
    pab = c / n
    nz = pab > 0
    mi = float(np.sum(pab[nz] * np.log(pab[nz] / (pa @ pb)[nz])))
    return float(min(max(mi / ((ha + hb) / 2.0), 0.0), 1.0))


def _comb2(x):
    x = np.asarray(x, dtype=np.float64)
    return x * (x - 1.0) / 2.0


def ari(a, b) -> float:
    """Adjusted Rand index from pair counts."""
    a, b = _check_pair(a, b, 2)
    c = contingency(a, b)
    n = c.sum()
    index = _comb2(c).sum()
    sa, sb = _comb2(c.sum(axis=1)).sum(), _comb2(c.sum(axis=0)).sum()
    total = _comb2(n)
    expected = sa * sb / total
    max_index = (sa + sb) / 2.0
    if max_index == expected:
        # both partitions trivial in the same way: perfect agreement by convention
        return 1.0
    return float((index - expected) / (max_index - expected))


def score_clusters(result: ClusterResult, truth, noise_mode: str = "shared") -> ClusterResult:
    """Attach NMI/ARI. ``shared``: all noise is one extra label; ``exclude``: drop noise points."""
    truth = np.asarray(truth)
    pred = result.assignments
    if noise_mode == "exclude":
        keep = pred != NOISE
        pred, truth = pred[keep], truth[keep]
    elif noise_mode != "shared":
        raise InputError(f"unknown noise mode {noise_mode!r}")
    if pred.size >= 2:
        result.nmi, result.ari = nmi(truth, pred), ari(truth, pred)
    else:
        result.nmi, result.ari = 0.0, 0.0
    result.noise_mode = noise_mode
    return result


def cluster_corpus(e: EmbeddingSet, eps: float, min_pts: int = 5, metric="euclidean", noise_mode: str = "shared") -> ClusterResult:
    return score_clusters(dbscan(e, eps, min_pts, metric), e.labels, noise_mode)
