"""Spearman rank correlation with t-approximation or exact permutation p-values."""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import stats as sps

from latentprobe.errors import ComputationError, InputError

EXACT_MAX_N = 10


@dataclass(frozen=True)
class CorrelationResult:
    rho: float
    p_value: float
    n: int
    method: str = "t_approx"

    def to_dict(self) -> dict:
        return asdict(self)


def midranks(x) -> np.ndarray:
    """1-based ranks with tied values sharing the average of their positions."""
    x = np.asarray(x, dtype=np.float64)
    order = np.argsort(x, kind="stable")
    ranks = np.empty(x.size, dtype=np.float64)
    sx = x[order]
    i = 0
    while i < x.size:
        j = i
        while j + 1 < x.size and sx[j + 1] == sx[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def _pearson(a: np.ndarray, b: np.ndarray) -> float:
    a = a - a.mean()
    b = b - b.mean()
    denom = math.sqrt(float(a @ a) * float(b @ b))
    return float(np.clip((a @ b) / denom, -1.0, 1.0))


def t_pvalue(rho: float, n: int) -> float:
    """Two-sided p from t = rho * sqrt((n-2)/(1-rho^2)) on n-2 degrees of freedom."""
    if abs(rho) >= 1.0:
        return 0.0
    t = rho * math.sqrt((n - 2) / (1.0 - rho * rho))
    return float(min(1.0, 2.0 * sps.t.sf(abs(t), n - 2)))


def permutation_pvalue(rx: np.ndarray, ry: np.ndarray, rho: float) -> float:
    """Share of all n! pairings whose |rho| reaches the observed |rho|."""
    n = rx.size
    a = rx - rx.mean()
    b = ry - ry.mean()
    denom = math.sqrt(float(a @ a) * float(b @ b))
    target = abs(rho) - 1e-12
    hits = total = 0
    perms = itertools.permutations(range(n))
    while True:
        chunk = np.fromiter(itertools.chain.from_iterable(itertools.islice(perms, 50_000)), dtype=np.int64)
        if chunk.size == 0:
            break
        idx = chunk.reshape(-1, n)
        r = (b[idx] @ a) / denom
        hits += int(np.sum(np.abs(r) >= target))
        total += idx.shape[0]
    return hits / total


def spearman(x, y, method: str = "t_approx") -> CorrelationResult:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise InputError("spearman needs two 1-D vectors of equal length")
    n = x.size
    if n < 3:
        raise InputError(f"n < 3: spearman needs at least three paired samples, got {n}")
    if np.all(x == x[0]) or np.all(y == y[0]):
        raise ComputationError("undefined ranks: constant input")
    rx, ry = midranks(x), midranks(y)
    rho = _pearson(rx, ry)
    if method == "t_approx":
        p = t_pvalue(rho, n)
    elif method == "exact_permutation":
        if n > EXACT_MAX_N:
            raise InputError(f"exact permutation p-values limited to n <= {EXACT_MAX_N}")
        p = permutation_pvalue(rx, ry, rho)
    else:
        raise InputError(f"unknown p-value method {method!r}")
    return CorrelationResult(rho, p, n, method)


@dataclass
class CorrelationTable:
    properties: list[str]
    metrics: list[str]
    cells: dict[tuple[str, str], CorrelationResult]

    def cell(self, prop: str, metric: str) -> CorrelationResult:
        return self.cells[(prop, metric)]

    def to_dict(self) -> dict:
        return {
            "properties": self.properties,
            "metrics": self.metrics,
            "cells": [
                {"property": p, "metric": m, **self.cells[(p, m)].to_dict()}
                for m in self.metrics
                for p in self.properties
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def render(self) -> str:
        """Metrics as rows, one (rho, p) column pair per property."""
        mw = max(len("metric"), *(len(m) for m in self.metrics))
        head = f"{'metric':<{mw}}" + "".join(f" | {p:^15}" for p in self.properties)
        sub = " " * mw + "".join(f" | {'rho':>7} {'p':>7}" for _ in self.properties)
        lines = [head, sub, "-" * len(sub)]
        for m in self.metrics:
            cells = "".join(f" | {self.cells[(p, m)].rho:7.2f} {self.cells[(p, m)].p_value:7.3f}" for p in self.properties)
            lines.append(f"{m:<{mw}}{cells}")
        return "\n".join(lines) + "\n"


def correlation_matrix(properties: dict[str, list], metrics: dict[str, list], method: str = "t_approx") -> CorrelationTable:
    lengths = {len(v) for v in properties.values()} | {len(v) for v in metrics.values()}
    if len(lengths) != 1:
        raise InputError(f"all vectors must share one length, got {sorted(lengths)}")
    cells = {}
    for m, mv in metrics.items():
        for p, pv in properties.items():
            cells[(p, m)] = spearman(pv, mv, method=method)
    return CorrelationTable(list(properties), list(metrics), cells)
