"""Sign-random-projection LSH with exhaustive Hamming ranking and bucket statistics."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from latentprobe.ann.base import check_query
from latentprobe.core import EmbeddingSet
from latentprobe.errors import InputError


@dataclass(frozen=True)
class LshConfig:
    nbits: int = 128
    seed: int = 0
    center: bool = False

    def __post_init__(self):
        if self.nbits < 1:
            raise InputError("nbits must be >= 1")


@dataclass(frozen=True)
class LshBucketStats:
    nbits: int
    n_items: int
    unique_buckets: int
    entropy_bits: float
    max_bucket_fraction: float

    @property
    def entropy_ceiling(self) -> float:
        return min(float(self.nbits), math.log2(self.n_items))

    def to_dict(self) -> dict:
        return {**asdict(self), "entropy_ceiling": self.entropy_ceiling}


_POPCOUNT = np.array([bin(i).count("1") for i in range(256)], dtype=np.int64)


class LshIndex:
    kind = "lsh"
    metric = "hamming"
    descending = False

    def __init__(self, planes: np.ndarray, offset: np.ndarray, codes: np.ndarray, cfg: LshConfig):
        self.planes = planes
        self.offset = offset
        self.codes = codes  # packed, N x ceil(nbits/8) uint8, bit order little
        self.cfg = cfg
        self._pm = None

    @property
    def size(self) -> int:
        return self.codes.shape[0]

    @property
    def dim(self) -> int:
        return self.planes.shape[1]

    @property
    def nbits(self) -> int:
        return self.cfg.nbits

    def config_dict(self) -> dict:
        return asdict(self.cfg)

    def hash_bits(self, x: np.ndarray) -> np.ndarray:
        """Boolean code matrix: bit i set iff w_i . (x - offset) >= 0."""
        x = np.atleast_2d(x)
        return (x - self.offset) @ self.planes.T >= 0.0

    def encode(self, x: np.ndarray) -> np.ndarray:
        return np.packbits(self.hash_bits(x), axis=1, bitorder="little")

    def unpacked(self) -> np.ndarray:
        return np.unpackbits(self.codes, axis=1, count=self.nbits, bitorder="little").astype(bool)

    def _signs(self) -> np.ndarray:
        if self._pm is None:
            self._pm = np.where(self.unpacked(), 1.0, -1.0)
        return self._pm

    def hamming_batch(self, query_codes_pm: np.ndarray) -> np.ndarray:
        """Hamming distance of +-1 query codes against every stored code (exact in float64)."""
        return np.rint((self.nbits - query_codes_pm @ self._signs().T) / 2.0).astype(np.int64)

    def search(self, query, k: int) -> tuple[np.ndarray, np.ndarray]:
        if self.size == 0:
            raise InputError("search on an empty LSH index")
        q = check_query(query, self.dim)
        qpm = np.where(self.hash_bits(q), 1.0, -1.0)
        ham = self.hamming_batch(qpm)[0]
        order = np.argsort(ham, kind="stable")[:k]
        return order.astype(np.int64), ham[order].astype(np.float64)

    def search_codes(self, item: int, k: int) -> tuple[np.ndarray, np.ndarray]:
        """Rank against the stored code of an indexed item, skipping re-hashing."""
        ham = self.hamming_batch(self._signs()[item : item + 1])[0]
        order = np.argsort(ham, kind="stable")[:k]
        return order.astype(np.int64), ham[order].astype(np.float64)

    def arrays(self) -> dict:
        return {"planes": self.planes, "offset": self.offset, "codes": self.codes}

    @classmethod
    def from_arrays(cls, config: dict, arrays: dict) -> "LshIndex":
        return cls(arrays["planes"], arrays["offset"], arrays["codes"], LshConfig(**config))


def lsh_build(e: EmbeddingSet, cfg: LshConfig = LshConfig()) -> LshIndex:
    rng = np.random.default_rng(cfg.seed)
    planes = rng.standard_normal((cfg.nbits, e.d))
    offset = e.vectors.mean(axis=0) if cfg.center else np.zeros(e.d)
    idx = LshIndex(planes, offset, np.zeros((0, 0), dtype=np.uint8), cfg)
    idx.codes = idx.encode(e.vectors)
    return idx


def lsh_search(idx: LshIndex, query, k: int):
    return idx.search(query, k)


def bucket_stats_from_codes(codes: np.ndarray, nbits: int) -> LshBucketStats:
    """Occupancy statistics over buckets keyed by the full packed code."""
    n = codes.shape[0]
    if n == 0:
        raise InputError("no codes")
    _, counts = np.unique(codes, axis=0, return_counts=True)
    p = counts / n
    entropy = float(-np.sum(p * np.log2(p)))
    return LshBucketStats(
        nbits=nbits,
        n_items=n,
        unique_buckets=int(counts.size),
        entropy_bits=max(entropy, 0.0),
        max_bucket_fraction=float(counts.max() / n),
    )


def lsh_bucket_stats(idx: LshIndex) -> LshBucketStats:
    return bucket_stats_from_codes(idx.codes, idx.nbits)


def popcount_rows(packed: np.ndarray) -> np.ndarray:
    return _POPCOUNT[packed].sum(axis=-1)
