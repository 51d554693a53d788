"""
Dysasr NAS Module

Gumbel-Softmax width search over factored projections with shared weights.
"""

from dysasr.nas.gumbel import (
    ArchParams,
    GumbelSample,
    anneal_temperature,
    derive_architecture,
    sample_gumbel_weights,
)
from dysasr.nas.search import SearchResult, read_architecture, search, write_architecture
from dysasr.nas.supernet import (
    ArchGradient,
    SuperNet,
    extract_subnet,
    penalized_loss,
    supernet_forward,
)

__all__ = [
    "ArchGradient",
    "ArchParams",
    "GumbelSample",
    "SearchResult",
    "SuperNet",
    "anneal_temperature",
    "derive_architecture",
    "extract_subnet",
    "penalized_loss",
    "read_architecture",
    "sample_gumbel_weights",
    "search",
    "supernet_forward",
    "write_architecture",
]
