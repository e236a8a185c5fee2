"""Text embeddings, similarity and near-duplicate pruning.

The bundled embedder hashes lower-cased unigrams and bigrams into a fixed
number of signed buckets and L2-normalizes the counts. It needs no model
or network and is fully deterministic, which is what the pruning and
retrieval logic needs in tests. It is much weaker than a trained code
encoder; plug a better :class:`Embedder` in for real audits.
"""

from __future__ import annotations

import hashlib
import re
from typing import Protocol, Sequence, Union

import numpy as np

from ..errors import DimMismatch, ProviderUnavailable

DEFAULT_DIMS = 256
_TOKEN = re.compile(r"[a-z_$][a-z0-9_$]*|\d+|[^\sa-z0-9_$]")


class Embedder(Protocol):
    dims: int

    def embed(self, text: str) -> np.ndarray: ...


def normalize(vec: np.ndarray) -> np.ndarray:
    norm = float(np.linalg.norm(vec))
    if norm == 0.0:
        raise ValueError("cannot normalize a zero vector")
    return vec / norm


def tokens(text: str) -> list[str]:
    return _TOKEN.findall(text.lower())


class FeatureHashEmbedder:
    """Signed feature hashing over token unigrams and bigrams."""

    def __init__(self, dims: int = DEFAULT_DIMS):
        if dims < 2:
            raise ValueError("dims must be at least 2")
        self.dims = dims

    def features(self, text: str) -> list[str]:
        toks = tokens(text)
        return toks + [f"{a} {b}" for a, b in zip(toks, toks[1:])]

    def _bucket(self, feature: str) -> tuple[int, float]:
        digest = hashlib.blake2b(feature.encode("utf-8"), digest_size=8).digest()
        value = int.from_bytes(digest, "big")
        return value % self.dims, (1.0 if (value >> 63) & 1 else -1.0)

    def embed(self, text: str) -> np.ndarray:
        feats = self.features(text)
        if not feats:
            raise ValueError("cannot embed text without tokens")
        vec = np.zeros(self.dims, dtype=np.float64)
        for f in feats:
            idx, sign = self._bucket(f)
            vec[idx] += sign
        if not vec.any():
            # signed collisions cancelled out exactly; fall back to the first bucket
            vec[self._bucket(feats[0])[0]] = 1.0
        return normalize(vec)


class FallbackEmbedder:
    """Use ``primary`` and switch to ``fallback`` when it is unavailable."""

    def __init__(self, primary: Embedder, fallback: Embedder):
        if primary.dims != fallback.dims:
            raise DimMismatch(f"primary has {primary.dims} dims, fallback {fallback.dims}")
        self.primary = primary
        self.fallback = fallback
        self.dims = primary.dims

    def embed(self, text: str) -> np.ndarray:
        try:
            return self.primary.embed(text)
        except ProviderUnavailable:
            return self.fallback.embed(text)


def similarity(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity of unit vectors, i.e. their dot product."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimMismatch(f"{a.shape} vs {b.shape}")
    return float(np.dot(a, b))


SIM_EPS = 1e-9


def reaches(sim: float, threshold: float) -> bool:
    """``sim >= threshold`` up to floating-point noise in the dot product."""
    return sim >= threshold - SIM_EPS


VectorOrText = Union[str, np.ndarray, Sequence[float]]


def prune_candidates(
    snippets: Sequence[VectorOrText], threshold: float, embedder: Embedder | None = None
) -> list[int]:
    """Indices kept by a greedy scan: drop anything ≥ threshold to a kept item."""
    if not 0.0 <= threshold <= 1.0:
        raise ValueError("threshold must lie in [0, 1]")
    embedder = embedder or FeatureHashEmbedder()
    vecs = [embedder.embed(s) if isinstance(s, str) else np.asarray(s, dtype=np.float64) for s in snippets]
    kept: list[int] = []
    for i, v in enumerate(vecs):
        if not any(reaches(similarity(v, vecs[j]), threshold) for j in kept):
            kept.append(i)
    return kept
