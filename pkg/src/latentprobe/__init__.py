"""Geometry and retrieval diagnostics for labeled embedding corpora."""

from latentprobe.errors import ComputationError, InputError, LatentProbeError
from latentprobe.core import EmbeddingSet, NormalizationMode, load_embeddings, normalize, save_embeddings

__version__ = "0.1.0"

__all__ = [
    "ComputationError",
    "EmbeddingSet",
    "InputError",
    "LatentProbeError",
    "NormalizationMode",
    "load_embeddings",
    "normalize",
    "save_embeddings",
    "__version__",
]
