"""Shared search contract and the versioned on-disk index format.

File layout::

    b"LPIDX\\0"  | u16 format version | u32 header length | JSON header | array payloads

The JSON header carries the index kind, its config and a manifest of
(name, dtype, shape) for each array; payloads follow in manifest order as raw
little-endian bytes, so a load reproduces every array bit for bit.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Protocol

import numpy as np

from latentprobe.errors import InputError

MAGIC = b"LPIDX\0"
FORMAT_VERSION = 1


class AnnIndex(Protocol):
    kind: str
    metric: str
    descending: bool

    @property
    def size(self) -> int: ...

    @property
    def dim(self) -> int: ...

    def search(self, query: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
        """Ranked (ids, scores); may return fewer than k rows, never padded."""
        ...

    def config_dict(self) -> dict: ...


def check_query(query, dim: int) -> np.ndarray:
    q = np.asarray(query, dtype=np.float64).ravel()
    if q.shape[0] != dim:
        raise InputError(f"query dimension {q.shape[0]} != index dimension {dim}")
    return q


def write_index(path, kind: str, config: dict, arrays: dict[str, np.ndarray]) -> None:
    manifest = []
    blobs = []
    for name, arr in arrays.items():
        a = np.ascontiguousarray(arr)
        a = a.astype(a.dtype.newbyteorder("<"), copy=False)
        manifest.append({"name": name, "dtype": a.dtype.str, "shape": list(a.shape)})
        blobs.append(a.tobytes())
    header = json.dumps({"kind": kind, "config": config, "arrays": manifest}, sort_keys=True).encode()
    with open(Path(path), "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<HI", FORMAT_VERSION, len(header)))
        fh.write(header)
        for b in blobs:
            fh.write(b)


def read_index_file(path) -> tuple[str, dict, dict[str, np.ndarray]]:
    raw = Path(path).read_bytes()
    if not raw.startswith(MAGIC):
        raise InputError(f"{path}: not a latentprobe index file")
    off = len(MAGIC)
    version, hlen = struct.unpack_from("<HI", raw, off)
    if version != FORMAT_VERSION:
        raise InputError(f"{path}: unsupported index format version {version}")
    off += struct.calcsize("<HI")
    header = json.loads(raw[off : off + hlen])
    off += hlen
    arrays = {}
    for item in header["arrays"]:
        dt = np.dtype(item["dtype"])
        count = int(np.prod(item["shape"], dtype=np.int64))
        nbytes = count * dt.itemsize
        if off + nbytes > len(raw):
            raise InputError(f"{path}: truncated payload for {item['name']}")
        arrays[item["name"]] = np.frombuffer(raw, dtype=dt, count=count, offset=off).reshape(item["shape"]).copy()
        off += nbytes
    if off != len(raw):
        raise InputError(f"{path}: {len(raw) - off} trailing bytes")
    return header["kind"], header["config"], arrays
