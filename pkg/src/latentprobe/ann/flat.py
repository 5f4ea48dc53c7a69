"""Exhaustive index wrapping the exact oracle, so evaluation code sees one contract."""

from __future__ import annotations

import numpy as np

from latentprobe.ann.base import check_query
from latentprobe.core import EmbeddingSet
from latentprobe.knn import Metric, euclidean_to


class FlatIndex:
    kind = "exact"

    def __init__(self, vectors: np.ndarray, metric="euclidean"):
        self.vectors = vectors
        self.metric = Metric.parse(metric).value
        self.descending = Metric.parse(metric).descending

    @property
    def size(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def config_dict(self) -> dict:
        return {"metric": self.metric}

    def search(self, query, k: int) -> tuple[np.ndarray, np.ndarray]:
        q = check_query(query, self.dim)
        metric = Metric(self.metric)
        ids = np.arange(self.size)
        if metric is Metric.EUCLIDEAN:
            d = euclidean_to(self.vectors, q)
        elif metric is Metric.INNER_PRODUCT:
            d = -(self.vectors @ q)
        elif metric is Metric.COSINE:
            d = 1.0 - (self.vectors @ q) / (np.linalg.norm(self.vectors, axis=1) * np.linalg.norm(q))
        else:
            d = np.sum((self.vectors != 0) != (q != 0), axis=1).astype(np.float64)
        order = np.argsort(d, kind="stable")[:k]
        out = d[order]
        return ids[order], (-out if metric is Metric.INNER_PRODUCT else out)

    def arrays(self) -> dict:
        return {"vectors": self.vectors}

    @classmethod
    def from_arrays(cls, config: dict, arrays: dict) -> "FlatIndex":
        return cls(arrays["vectors"], config["metric"])


def flat_build(e: EmbeddingSet, metric="euclidean") -> FlatIndex:
    return FlatIndex(np.array(e.vectors), metric)
