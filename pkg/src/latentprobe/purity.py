"""Local class purity as a function of neighbourhood size."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from latentprobe.core import EmbeddingSet
from latentprobe.errors import InputError
from latentprobe.knn import NeighborTable, exact_knn


@dataclass(frozen=True)
class PurityCurve:
    k_values: np.ndarray
    purity: np.ndarray
    metric: str
    n_queries: int

    def to_dict(self) -> dict:
        return {
            "metric": self.metric,
            "n_queries": self.n_queries,
            "k": self.k_values.tolist(),
            "purity": self.purity.tolist(),
        }

    def to_csv(self, path) -> None:
        with open(Path(path), "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["k", "purity"])
            for k, p in zip(self.k_values, self.purity):
                w.writerow([int(k), repr(float(p))])


def purity_from_table(labels: np.ndarray, table: NeighborTable, k_max: int | None = None) -> np.ndarray:
    """Mean same-class fraction for every k in 1..k_max via a cumulative hit count."""
    k_max = table.k if k_max is None else k_max
    hits = labels[table.neighbor_ids[:, :k_max]] == labels[table.query_ids][:, None]
    cum = np.cumsum(hits, axis=1)
    ks = np.arange(1, k_max + 1)
    return (cum / ks).mean(axis=0)


def local_purity_curve(e: EmbeddingSet, k_max: int = 50, metric="euclidean") -> PurityCurve:
    if not (1 <= k_max <= e.n - 1):
        raise InputError(f"k_max={k_max} out of range [1, {e.n - 1}]")
    table = exact_knn(e, k_max, metric=metric, exclude_self=True)
    return PurityCurve(np.arange(1, k_max + 1), purity_from_table(e.labels, table), table.metric.value, e.n)
