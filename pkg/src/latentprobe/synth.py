"""Seeded synthetic corpora with known geometry.

Gaussian draws come from numpy's PCG64 generator through
``Generator.standard_normal`` (ziggurat), which is stable across numpy
releases for a fixed seed.
"""

from __future__ import annotations

import enum
from dataclasses import asdict, dataclass

import numpy as np

from latentprobe.core import EmbeddingSet
from latentprobe.errors import InputError


class SynthKind(str, enum.Enum):
    ISOTROPIC = "isotropic_gaussian"
    CONE = "cone"
    MIXTURE = "labeled_mixture"


@dataclass(frozen=True)
class SynthSpec:
    kind: SynthKind | str
    n: int
    d: int
    seed: int = 0
    kappa: float = 0.0
    n_classes: int = 1
    cluster_std: float = 1.0
    separation: float = 10.0

    def __post_init__(self):
        object.__setattr__(self, "kind", SynthKind(self.kind))
        if self.n < 1 or self.d < 1:
            raise InputError("n and d must be >= 1")
        if self.kappa < 0:
            raise InputError("cone concentration kappa must be >= 0")
        if self.n_classes < 1:
            raise InputError("n_classes must be >= 1")
        if self.n_classes > self.n:
            raise InputError(f"n_classes={self.n_classes} exceeds n={self.n}")
        if self.kind is SynthKind.MIXTURE:
            if self.separation <= 0:
                raise InputError("mixture separation must be > 0")
            if self.d < self.n_classes:
                raise InputError(f"mixture means sit on coordinate axes: need d >= n_classes ({self.d} < {self.n_classes})")

    def to_dict(self) -> dict:
        return {**asdict(self), "kind": self.kind.value}

    @property
    def name(self) -> str:
        if self.kind is SynthKind.CONE:
            return f"cone-k{self.kappa:g}-d{self.d}-s{self.seed}"
        return f"{self.kind.value}-d{self.d}-s{self.seed}"


def balanced_labels(n: int, n_classes: int) -> np.ndarray:
    """Contiguous equal-as-possible class blocks: 0,0,..,1,1,..."""
    return (np.arange(n) * n_classes // n).astype(np.int64)


def axis_means(n_classes: int, d: int, separation: float) -> np.ndarray:
    # scaled basis vectors; any two are exactly `separation` apart
    means = np.zeros((n_classes, d))
    means[np.arange(n_classes), np.arange(n_classes)] = separation / np.sqrt(2.0)
    return means


def generate(spec: SynthSpec) -> EmbeddingSet:
    rng = np.random.default_rng(spec.seed)
    n, d = spec.n, spec.d
    if spec.kind is SynthKind.ISOTROPIC:
        x = rng.standard_normal((n, d))
        labels = np.zeros(n, dtype=np.int64)
    elif spec.kind is SynthKind.MIXTURE:
        labels = balanced_labels(n, spec.n_classes)
        x = axis_means(spec.n_classes, d, spec.separation)[labels] + spec.cluster_std * rng.standard_normal((n, d))
    else:
        # normalize(kappa * mu + g); with n_classes > 1 each class also gets an
        # offset of length `separation` along its own random direction
        mu = rng.standard_normal(d)
        mu /= np.linalg.norm(mu)
        labels = balanced_labels(n, spec.n_classes)
        base = spec.kappa * mu
        if spec.n_classes > 1:
            dirs = rng.standard_normal((spec.n_classes, d))
            dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
            base = base + spec.separation * dirs[labels]
        x = base + spec.cluster_std * rng.standard_normal((n, d))
        norms = np.linalg.norm(x, axis=1, keepdims=True)
        x = x / np.where(norms == 0, 1.0, norms)
    return EmbeddingSet(x, labels, name=spec.name, meta={"synth": spec.to_dict()})
