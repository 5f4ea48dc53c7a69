"""Global geometry statistics: anisotropy, N_k skewness and the worst-case hub."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from latentprobe.core import EmbeddingSet
from latentprobe.errors import ComputationError, InputError
from latentprobe.knn import exact_knn, occurrence_counts

DEFAULT_HUB_K = 10


@dataclass(frozen=True)
class GeometryReport:
    anisotropy: float
    lambda_max: float
    total_variance: float
    skewness: float
    worst_case_hub: int
    hub_k: int
    metric: str = "euclidean"

    def __post_init__(self):
        if not (0.0 < self.anisotropy <= 1.0 + 1e-12):
            raise ComputationError(f"anisotropy {self.anisotropy} outside (0, 1]")

    def to_dict(self) -> dict:
        return asdict(self)


def top_eigenvalue(mat: np.ndarray, seed: int = 0, rtol: float = 1e-8, max_iter: int = 1000) -> float:
    """Largest eigenvalue of a symmetric PSD matrix by power iteration.

    Converged when the Rayleigh quotient moves by less than ``rtol`` relative.
    """
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(mat.shape[0])
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(max_iter):
        w = mat @ v
        new = float(v @ w)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        v = w / nw
        if abs(new - lam) <= rtol * abs(new):
            return new
        lam = new
    return lam


def covariance_spectrum_top(vectors: np.ndarray, seed: int = 0) -> tuple[float, float]:
    """(lambda_max, trace) of the sample covariance, never forming the larger Gram side."""
    x = np.asarray(vectors, dtype=np.float64)
    n = x.shape[0]
    if n < 2:
        raise InputError("anisotropy needs at least two rows")
    xc = x - x.mean(axis=0)
    trace = float(np.einsum("ij,ij->", xc, xc)) / (n - 1)
    if trace <= 0.0:
        raise ComputationError("degenerate corpus: all rows identical, total variance is zero")
    small = xc.T @ xc if x.shape[1] <= n else xc @ xc.T
    lam = top_eigenvalue(small / (n - 1), seed=seed)
    return lam, trace


def anisotropy(e: EmbeddingSet | np.ndarray, seed: int = 0) -> float:
    """Share of total variance on the leading principal direction, lambda_max / Tr(cov)."""
    vectors = e.vectors if isinstance(e, EmbeddingSet) else e
    lam, trace = covariance_spectrum_top(vectors, seed=seed)
    return min(lam / trace, 1.0)


def nk_skewness(counts) -> float:
    """Bias-adjusted skewness n/((n-1)(n-2)) * sum(((c - mean)/s)^3), s with ddof=1."""
    c = np.asarray(counts, dtype=np.float64)
    n = c.size
    if n < 3:
        raise InputError("skewness needs at least three counts")
    mu = c.mean()
    sigma = c.std(ddof=1)
    if sigma == 0.0 or not np.isfinite(sigma):
        raise ComputationError("constant occurrence counts: skewness undefined")
    z = (c - mu) / sigma
    return float(n / ((n - 1) * (n - 2)) * np.sum(z**3))


def worst_case_hub(counts) -> int:
    c = np.asarray(counts)
    if c.size == 0:
        raise InputError("empty occurrence vector")
    return int(c.max())


def geometry_report(e: EmbeddingSet, hub_k: int = DEFAULT_HUB_K, metric: str = "euclidean", seed: int = 0) -> GeometryReport:
    lam, trace = covariance_spectrum_top(e.vectors, seed=seed)
    table = exact_knn(e, hub_k, metric=metric, exclude_self=True)
    counts = occurrence_counts(table, e.n)
    return GeometryReport(
        anisotropy=min(lam / trace, 1.0),
        lambda_max=lam,
        total_variance=trace,
        skewness=nk_skewness(counts),
        worst_case_hub=worst_case_hub(counts),
        hub_k=hub_k,
        metric=table.metric.value,
    )
