"""Self-supervised graph learning via spectral augmentation and bootstrapping."""

from .graphs import Graph, NormalizedLaplacian, SparseSym
from .data import DatasetBundle, generate_sbm

__all__ = [
    "Graph",
    "NormalizedLaplacian",
    "SparseSym",
    "DatasetBundle",
    "generate_sbm",
]

__version__ = "0.1.0"
