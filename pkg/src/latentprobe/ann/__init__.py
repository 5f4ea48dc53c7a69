"""Approximate indexes sharing one search contract, plus on-disk persistence."""

from __future__ import annotations

from latentprobe.ann.base import AnnIndex, read_index_file, write_index
from latentprobe.ann.flat import FlatIndex, flat_build
from latentprobe.ann.hnsw import HnswConfig, HnswIndex, hnsw_build, hnsw_search
from latentprobe.ann.ivf import IvfConfig, IvfIndex, ivf_build, ivf_search, kmeans
from latentprobe.ann.lsh import (
    LshBucketStats,
    LshConfig,
    LshIndex,
    bucket_stats_from_codes,
    lsh_bucket_stats,
    lsh_build,
    lsh_search,
)
from latentprobe.errors import InputError

_KINDS = {"exact": FlatIndex, "ivf": IvfIndex, "hnsw": HnswIndex, "lsh": LshIndex}


def save_index(idx, path) -> None:
    write_index(path, idx.kind, idx.config_dict(), idx.arrays())


def load_index(path):
    kind, config, arrays = read_index_file(path)
    if kind not in _KINDS:
        raise InputError(f"{path}: unknown index kind {kind!r}")
    return _KINDS[kind].from_arrays(config, arrays)


__all__ = [
    "AnnIndex",
    "FlatIndex",
    "HnswConfig",
    "HnswIndex",
    "IvfConfig",
    "IvfIndex",
    "LshBucketStats",
    "LshConfig",
    "LshIndex",
    "bucket_stats_from_codes",
    "flat_build",
    "hnsw_build",
    "hnsw_search",
    "ivf_build",
    "ivf_search",
    "kmeans",
    "load_index",
    "lsh_bucket_stats",
    "lsh_build",
    "lsh_search",
    "save_index",
]
