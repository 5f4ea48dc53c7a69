"""Hierarchical navigable small-world graph over unit vectors, inner-product similarity.

Insertion follows the usual layered scheme: a node draws a level
``floor(-ln U * mL)`` with ``mL = 1/ln m``, greedy-descends from the entry point
to its level, then at each of its layers runs a beam of ``ef_construction``
and links to neighbours chosen by the diversity heuristic. A neighbour list is
only pruned once it would exceed its cap (2m on layer 0, m above), so small
graphs stay fully connected.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import asdict, dataclass

import numpy as np

from latentprobe.ann.base import check_query
from latentprobe.core import EmbeddingSet, is_unit_norm
from latentprobe.errors import InputError

UNIT_TOL = 1e-4


@dataclass(frozen=True)
class HnswConfig:
    m: int = 16
    ef_construction: int = 40
    ef_search: int = 16
    seed: int = 0

    def __post_init__(self):
        if self.m < 2:
            raise InputError("HNSW needs m >= 2")
        if self.ef_search < 1 or self.ef_construction < 1:
            raise InputError("ef values must be >= 1")

    def cap(self, layer: int) -> int:
        return 2 * self.m if layer == 0 else self.m


class HnswIndex:
    kind = "hnsw"
    metric = "inner_product_desc"
    descending = True

    def __init__(self, vectors: np.ndarray, cfg: HnswConfig):
        self.vectors = vectors
        self.cfg = cfg
        self.levels = np.zeros(0, dtype=np.int64)
        # links[layer][node] -> list of neighbour ids; nodes absent from a layer have no entry
        self.links: list[dict[int, list[int]]] = []
        self.entry = -1

    @property
    def size(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    @property
    def max_level(self) -> int:
        return len(self.links) - 1

    def config_dict(self) -> dict:
        return asdict(self.cfg)

    # -- graph primitives ---------------------------------------------------

    def _sims(self, ids, q):
        return self.vectors[ids] @ q

    def _greedy(self, q, entry: int, layer: int) -> int:
        cur = entry
        cur_sim = float(self.vectors[cur] @ q)
        while True:
            nbrs = self.links[layer][cur]
            if not nbrs:
                return cur
            sims = self._sims(nbrs, q)
            best = int(np.argmax(sims))
            if sims[best] > cur_sim or (sims[best] == cur_sim and nbrs[best] < cur):
                cur, cur_sim = nbrs[best], float(sims[best])
            else:
                return cur

    def _beam(self, q, entries: list[int], layer: int, ef: int) -> list[tuple[float, int]]:
        """Best-first search; returns up to ef (similarity, id) pairs, best first."""
        visited = set(entries)
        cand = []  # max-heap on similarity via (-sim, id)
        found = []  # min-heap on (sim, -id): root is the current worst
        for e in entries:
            s = float(self.vectors[e] @ q)
            heapq.heappush(cand, (-s, e))
            heapq.heappush(found, (s, -e))
            if len(found) > ef:
                heapq.heappop(found)
        adj = self.links[layer]
        while cand:
            neg, c = heapq.heappop(cand)
            if len(found) >= ef and -neg < found[0][0]:
                break
            fresh = [n for n in adj[c] if n not in visited]
            if not fresh:
                continue
            visited.update(fresh)
            sims = self._sims(fresh, q)
            for n, s in zip(fresh, sims.tolist()):
                if len(found) < ef or (s, -n) > found[0]:
                    heapq.heappush(cand, (-s, n))
                    heapq.heappush(found, (s, -n))
                    if len(found) > ef:
                        heapq.heappop(found)
        return sorted(((s, -n) for s, n in found), key=lambda t: (-t[0], t[1]))

    def _heuristic(self, base_vec, cands: list[tuple[float, int]], limit: int) -> list[int]:
        """Keep a candidate only if it is more similar to the base than to every kept one."""
        if len(cands) <= limit:
            return [c for _, c in cands]
        kept: list[int] = []
        for sim, c in cands:
            if len(kept) >= limit:
                break
            if kept:
                to_kept = self._sims(kept, self.vectors[c])
                if np.any(to_kept > sim):
                    continue
            kept.append(c)
        return kept

    def _add_link(self, src: int, dst: int, layer: int) -> None:
        nbrs = self.links[layer][src]
        if dst in nbrs:
            return
        cap = self.cfg.cap(layer)
        if len(nbrs) < cap:
            nbrs.append(dst)
            return
        pool = nbrs + [dst]
        sims = self._sims(pool, self.vectors[src])
        ranked = sorted(zip(sims.tolist(), pool), key=lambda t: (-t[0], t[1]))
        self.links[layer][src] = self._heuristic(self.vectors[src], ranked, cap)

    # -- build ----------------------------------------------------------------

    def _insert(self, node: int, level: int) -> None:
        while self.max_level < level:
            self.links.append({})
        for layer in range(level + 1):
            self.links[layer][node] = []
        if self.entry < 0:
            self.entry = node
            return
        q = self.vectors[node]
        top = int(self.levels[self.entry])
        cur = self.entry
        for layer in range(top, level, -1):
            cur = self._greedy(q, cur, layer)
        entries = [cur]
        for layer in range(min(level, top), -1, -1):
            found = self._beam(q, entries, layer, self.cfg.ef_construction)
            chosen = self._heuristic(q, found, self.cfg.cap(layer))
            self.links[layer][node] = list(chosen)
            for nb in chosen:
                self._add_link(nb, node, layer)
            entries = [c for _, c in found]
        if level > top:
            self.entry = node

    def build(self, rng: np.random.Generator) -> "HnswIndex":
        n = self.size
        ml = 1.0 / math.log(self.cfg.m)
        u = 1.0 - rng.random(n)  # (0, 1]
        self.levels = np.floor(-np.log(u) * ml).astype(np.int64)
        for node in range(n):
            self._insert(node, int(self.levels[node]))
        return self

    # -- query ------------------------------------------------------------------

    def search(self, query, k: int, ef_search: int | None = None) -> tuple[np.ndarray, np.ndarray]:
        if self.entry < 0:
            raise InputError("search on an empty HNSW index")
        q = check_query(query, self.dim)
        ef = self.cfg.ef_search if ef_search is None else ef_search
        if ef < 1:
            raise InputError("ef_search must be >= 1")
        cur = self.entry
        for layer in range(self.max_level, 0, -1):
            cur = self._greedy(q, cur, layer)
        found = self._beam(q, [cur], 0, ef)[:k]
        ids = np.array([c for _, c in found], dtype=np.int64)
        sims = np.array([s for s, _ in found], dtype=np.float64)
        return ids, sims

    def degree_ok(self) -> bool:
        return all(len(nb) <= self.cfg.cap(layer) for layer, adj in enumerate(self.links) for nb in adj.values())

    def edges(self) -> list[tuple[int, int, int]]:
        return sorted((layer, a, b) for layer, adj in enumerate(self.links) for a, nb in adj.items() for b in nb)

    # -- serialization: per layer, CSR over the sorted member nodes -----------

    def arrays(self) -> dict:
        out = {"vectors": self.vectors, "levels": self.levels, "entry": np.array([self.entry], dtype=np.int64)}
        for layer, adj in enumerate(self.links):
            nodes = sorted(adj)
            offsets = np.cumsum([0] + [len(adj[v]) for v in nodes]).astype(np.int64)
            flat = np.array([b for v in nodes for b in adj[v]], dtype=np.int64)
            out[f"l{layer}_nodes"] = np.array(nodes, dtype=np.int64)
            out[f"l{layer}_offsets"] = offsets
            out[f"l{layer}_targets"] = flat
        return out

    @classmethod
    def from_arrays(cls, config: dict, arrays: dict) -> "HnswIndex":
        idx = cls(arrays["vectors"], HnswConfig(**config))
        idx.levels = arrays["levels"]
        idx.entry = int(arrays["entry"][0])
        layer = 0
        while f"l{layer}_nodes" in arrays:
            nodes, off, tgt = arrays[f"l{layer}_nodes"], arrays[f"l{layer}_offsets"], arrays[f"l{layer}_targets"]
            idx.links.append({int(v): tgt[off[i] : off[i + 1]].tolist() for i, v in enumerate(nodes)})
            layer += 1
        return idx


def hnsw_build(e: EmbeddingSet, cfg: HnswConfig = HnswConfig()) -> HnswIndex:
    if not is_unit_norm(e.vectors, UNIT_TOL):
        raise InputError("HNSW expects L2-normalized rows (norms within 1e-4 of 1); normalize with l2 first")
    idx = HnswIndex(np.array(e.vectors), cfg)
    return idx.build(np.random.default_rng(cfg.seed))


def hnsw_search(idx: HnswIndex, query, k: int, ef_search: int | None = None):
    return idx.search(query, k, ef_search)
