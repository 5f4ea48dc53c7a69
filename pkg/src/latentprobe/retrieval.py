"""Ranked-retrieval metrics with same-class relevance and k-NN classification accuracy."""

from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import dataclass, field

import numpy as np

from latentprobe.core import EmbeddingSet
from latentprobe.errors import InputError
from latentprobe.knn import NeighborTable, exact_knn

AP_CONVENTION = "sum_{i<=K, rel_i} P@i / min(|relevant|, K)"
STD_CONVENTION = "sample (ddof=1)"
METRICS = ("p_at_k", "r_at_k", "map_at_k", "mrr")


def precision_at_k(retrieved, relevant, k: int) -> float:
    # divides by k even when fewer than k were returned
    if k < 1:
        raise InputError("k must be >= 1")
    rel = relevant if isinstance(relevant, (set, frozenset)) else set(relevant)
    return sum(1 for r in list(retrieved)[:k] if r in rel) / k


def recall_at_k(retrieved, relevant, k: int) -> float:
    rel = relevant if isinstance(relevant, (set, frozenset)) else set(relevant)
    if not rel:
        raise InputError("query class has no other members")
    return sum(1 for r in list(retrieved)[:k] if r in rel) / len(rel)


def average_precision_at_k(retrieved, relevant, k: int) -> float:
    rel = relevant if isinstance(relevant, (set, frozenset)) else set(relevant)
    if not rel:
        raise InputError("query class has no other members")
    ranks = [i for i, r in enumerate(list(retrieved)[:k], 1) if r in rel]
    return _exact_ap(ranks, min(len(rel), k))


def _exact_ap(ranks, denom: int) -> float:
    """sum_j j / ranks[j-1], over denom, with one correctly rounded division at the end."""
    if not ranks:
        return 0.0
    lcm = math.lcm(*ranks)
    return sum(j * (lcm // r) for j, r in enumerate(ranks, 1)) / (lcm * denom)


def reciprocal_rank(retrieved, relevant) -> float:
    rel = relevant if isinstance(relevant, (set, frozenset)) else set(relevant)
    for i, r in enumerate(retrieved, 1):
        if r in rel:
            return 1.0 / i
    return 0.0


def _query_metrics(hits: np.ndarray, n_relevant: int, k: int) -> tuple[float, float, float, float]:
    """Vector form of the four metrics from a boolean hit row (rank order)."""
    top = hits[:k]
    n_hit = int(top.sum())
    p = n_hit / k
    r = n_hit / n_relevant
    ap = _exact_ap((np.flatnonzero(top) + 1).tolist(), min(n_relevant, k))
    first = np.flatnonzero(hits)
    rr = 1.0 / (first[0] + 1) if first.size else 0.0
    return p, r, ap, rr


@dataclass
class RetrievalReport:
    index_kind: str
    k: int
    p_at_k: tuple[float, float]
    r_at_k: tuple[float, float]
    map_at_k: tuple[float, float]
    mrr: tuple[float, float]
    n_queries: int
    n_skipped: int = 0
    exclude_self: bool = True
    config: dict = field(default_factory=dict)
    wall_time_s: float = 0.0
    per_query: dict | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        out = {
            "index_kind": self.index_kind,
            "k": self.k,
            "n_queries": self.n_queries,
            "n_skipped": self.n_skipped,
            "exclude_self": self.exclude_self,
            "config": self.config,
            "conventions": {"ap_denominator": AP_CONVENTION, "std": STD_CONVENTION},
            "timings": {"wall_time_s": self.wall_time_s},
        }
        for m in METRICS:
            mean, std = getattr(self, m)
            out[m] = {"mean": mean, "std": std}
        return out

    CSV_FIELDS = ("index_kind", "k", "n_queries",
                  "p_mean", "p_std", "r_mean", "r_std", "map_mean", "map_std", "mrr_mean", "mrr_std")

    def csv_row(self) -> list:
        row = [self.index_kind, self.k, self.n_queries]
        for m in METRICS:
            row.extend(getattr(self, m))
        return row

    def to_csv(self, header: bool = True) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        if header:
            w.writerow(self.CSV_FIELDS)
        w.writerow([repr(v) if isinstance(v, float) else v for v in self.csv_row()])
        return buf.getvalue()

    def render_row(self) -> str:
        """mean x100 and std x100, rounded, the way cross-method tables print them."""
        cells = [f"{100 * m:.0f}±{100 * s:.0f}" for m, s in (getattr(self, x) for x in METRICS)]
        return f"{self.index_kind:<6} " + " ".join(f"{c:>8}" for c in cells)


def _mean_std(values: np.ndarray) -> tuple[float, float]:
    if values.size == 0:
        return 0.0, 0.0
    mean = float(np.mean(values))
    std = float(np.std(values, ddof=1)) if values.size > 1 else 0.0
    return mean, std


def _aggregate(kind, k, rows, skipped, exclude_self, config, wall, keep_per_query) -> RetrievalReport:
    arr = np.array(rows, dtype=np.float64).reshape(-1, 4)
    stats = [_mean_std(arr[:, j]) for j in range(4)]
    return RetrievalReport(
        index_kind=kind,
        k=k,
        p_at_k=stats[0],
        r_at_k=stats[1],
        map_at_k=stats[2],
        mrr=stats[3],
        n_queries=arr.shape[0],
        n_skipped=skipped,
        exclude_self=exclude_self,
        config=config,
        wall_time_s=wall,
        per_query={m: arr[:, j].tolist() for j, m in enumerate(METRICS)} if keep_per_query else None,
    )


def _class_sizes(labels: np.ndarray) -> np.ndarray:
    return np.bincount(labels)


def _ranked_for_item(idx, e: EmbeddingSet, i: int, depth: int):
    if hasattr(idx, "search_codes"):
        return idx.search_codes(i, depth)[0]
    return idx.search(e.vectors[i], depth)[0]


def evaluate_index(e: EmbeddingSet, idx, k: int = 10, exclude_self: bool = True, keep_per_query: bool = False) -> RetrievalReport:
    """Query every indexed item once; relevance is "same class as the query"."""
    if idx.size != e.n:
        raise InputError(f"index holds {idx.size} items but corpus has {e.n}")
    t0 = time.perf_counter()
    labels = e.labels
    sizes = _class_sizes(labels)
    depth = k + 1 if exclude_self else k
    rows, skipped = [], 0
    for i in range(e.n):
        n_rel = int(sizes[labels[i]]) - (1 if exclude_self else 0)
        if n_rel < 1:
            skipped += 1
            continue
        ranked = np.asarray(_ranked_for_item(idx, e, i, depth))
        if exclude_self:
            ranked = ranked[ranked != i][:k]
        rows.append(_query_metrics(labels[ranked] == labels[i], n_rel, k))
    return _aggregate(idx.kind, k, rows, skipped, exclude_self, idx.config_dict(), time.perf_counter() - t0, keep_per_query)


def evaluate_table(e: EmbeddingSet, table: NeighborTable, k: int | None = None, keep_per_query: bool = False) -> RetrievalReport:
    """Same metrics straight from a neighbour table (rows aligned with corpus order)."""
    k = table.k if k is None else k
    if k > table.k:
        raise InputError(f"cutoff {k} deeper than table k={table.k}")
    labels = e.labels
    sizes = _class_sizes(labels)
    rows, skipped = [], 0
    pos = {int(v): j for j, v in enumerate(e.ids)}
    for q, ranked in zip(table.query_ids, table.neighbor_ids):
        i = pos[int(q)]
        n_rel = int(sizes[labels[i]]) - (1 if table.self_excluded else 0)
        if n_rel < 1:
            skipped += 1
            continue
        idx_rows = np.array([pos[int(j)] for j in ranked[:k]], dtype=np.int64)
        rows.append(_query_metrics(labels[idx_rows] == labels[i], n_rel, k))
    return _aggregate("exact", k, rows, skipped, table.self_excluded, {"metric": table.metric.value}, 0.0, keep_per_query)


def vote(neighbor_labels: np.ndarray, top: int = 5) -> list[int]:
    """Classes ordered by vote count (desc), ties to the smaller class id; voted classes only."""
    classes, counts = np.unique(neighbor_labels, return_counts=True)
    order = np.lexsort((classes, -counts))
    return classes[order][:top].tolist()


def knn_classify_accuracy(e: EmbeddingSet, k: int, metric="euclidean", table: NeighborTable | None = None) -> tuple[float, float]:
    """Leave-one-out majority-vote accuracy (top-1, top-5)."""
    if table is None:
        table = exact_knn(e, k, metric=metric, exclude_self=True)
    nl = e.labels[table.neighbor_ids[:, :k]]
    top1 = top5 = 0
    for truth, row in zip(e.labels, nl):
        ranked = vote(row)
        top1 += ranked[0] == truth
        top5 += truth in ranked
    return float(top1) / e.n, float(top5) / e.n
