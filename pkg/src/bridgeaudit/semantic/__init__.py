"""Embeddings, near-duplicate pruning, bypass-pattern retrieval and state context."""

from .context import StateContext, StateVarEntry, state_context
from .embed import DEFAULT_DIMS, Embedder, FallbackEmbedder, FeatureHashEmbedder, prune_candidates, similarity
from .kb import (
    KnowledgePattern,
    Retrieved,
    VectorIndex,
    build_kb,
    load_kb,
    retrieve,
    save_kb,
    seed_kb,
    seed_patterns,
)

__all__ = [
    "DEFAULT_DIMS",
    "Embedder",
    "FallbackEmbedder",
    "FeatureHashEmbedder",
    "KnowledgePattern",
    "Retrieved",
    "StateContext",
    "StateVarEntry",
    "VectorIndex",
    "build_kb",
    "load_kb",
    "prune_candidates",
    "retrieve",
    "save_kb",
    "seed_kb",
    "seed_patterns",
    "similarity",
    "state_context",
]
