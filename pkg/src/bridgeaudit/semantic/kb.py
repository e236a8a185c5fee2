"""Bypass knowledge base: pattern records, flat inner-product index, file format.

KB file layout::

    {"schema_version": "1", "dims": 256,
     "patterns": [{"pattern_id", "title", "bypass_principle", "root_cause",
                   "category", "exemplar_snippet", "embedding": [...]}]}
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from ..errors import DimMismatch, DuplicatePatternId, SchemaError
from ..fsutil import atomic_write_text
from .embed import Embedder, FeatureHashEmbedder, normalize, reaches

KB_SCHEMA_VERSION = "1"
CATEGORIES = ("state-config", "single-chain-vuln", "other")
DEFAULT_KB_THRESHOLD = 0.5
DEFAULT_TOP_K = 3


@dataclass(frozen=True)
class KnowledgePattern:
    pattern_id: str
    title: str
    bypass_principle: str
    root_cause: str
    category: str
    exemplar_snippet: str
    embedding: Optional[tuple] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.category not in CATEGORIES:
            raise ValueError(f"unknown category {self.category!r}")

    def prompt_view(self) -> dict:
        """Fields safe to place in a prompt; the exemplar code stays out."""
        return {
            "pattern_id": self.pattern_id,
            "title": self.title,
            "bypass_principle": self.bypass_principle,
            "root_cause": self.root_cause,
            "category": self.category,
        }

    def to_document(self) -> dict:
        doc = self.prompt_view()
        doc["exemplar_snippet"] = self.exemplar_snippet
        doc["embedding"] = list(self.embedding) if self.embedding is not None else None
        return doc


@dataclass(frozen=True)
class Retrieved:
    pattern: KnowledgePattern
    score: float


class VectorIndex:
    """Exhaustive inner-product search over unit vectors."""

    def __init__(self, dims: int, patterns: Sequence[KnowledgePattern]):
        self.dims = dims
        self.patterns = tuple(patterns)
        if self.patterns:
            self.matrix = np.array([p.embedding for p in self.patterns], dtype=np.float64)
            if self.matrix.shape[1] != dims:
                raise DimMismatch(f"index has {dims} dims, embeddings have {self.matrix.shape[1]}")
        else:
            self.matrix = np.zeros((0, dims))

    def __len__(self) -> int:
        return len(self.patterns)

    def scores(self, query: np.ndarray) -> np.ndarray:
        query = np.asarray(query, dtype=np.float64)
        if query.shape != (self.dims,):
            raise DimMismatch(f"query has shape {query.shape}, index {self.dims} dims")
        return self.matrix @ query

    def to_document(self) -> dict:
        return {
            "schema_version": KB_SCHEMA_VERSION,
            "dims": self.dims,
            "patterns": [p.to_document() for p in self.patterns],
        }


def build_kb(patterns: Iterable[KnowledgePattern], embedder: Optional[Embedder] = None) -> VectorIndex:
    embedder = embedder or FeatureHashEmbedder()
    seen = set()
    built = []
    for p in patterns:
        if p.pattern_id in seen:
            raise DuplicatePatternId(p.pattern_id)
        seen.add(p.pattern_id)
        vec = embedder.embed(p.exemplar_snippet)
        built.append(
            KnowledgePattern(
                p.pattern_id, p.title, p.bypass_principle, p.root_cause, p.category, p.exemplar_snippet, tuple(vec.tolist())
            )
        )
    return VectorIndex(embedder.dims, built)


def retrieve(
    index: VectorIndex,
    query_text: str,
    threshold: float = DEFAULT_KB_THRESHOLD,
    top_k: int = DEFAULT_TOP_K,
    embedder: Optional[Embedder] = None,
) -> list[Retrieved]:
    """Patterns scoring at least ``threshold``, best first, ties by pattern id."""
    if len(index) == 0 or top_k <= 0:
        return []
    embedder = embedder or FeatureHashEmbedder(index.dims)
    scores = index.scores(embedder.embed(query_text))
    ranked = sorted(
        (Retrieved(p, float(s)) for p, s in zip(index.patterns, scores) if reaches(float(s), threshold)),
        key=lambda r: (-r.score, r.pattern.pattern_id),
    )
    return ranked[:top_k]


def pattern_from_document(doc: dict, path: str = "pattern") -> KnowledgePattern:
    for key in ("pattern_id", "title", "bypass_principle", "root_cause", "category", "exemplar_snippet"):
        if not isinstance(doc.get(key), str):
            raise SchemaError(f"{path}.{key}", "missing or not a string")
    if doc["category"] not in CATEGORIES:
        raise SchemaError(f"{path}.category", f"unknown category {doc['category']!r}")
    emb = doc.get("embedding")
    return KnowledgePattern(
        doc["pattern_id"],
        doc["title"],
        doc["bypass_principle"],
        doc["root_cause"],
        doc["category"],
        doc["exemplar_snippet"],
        tuple(float(x) for x in emb) if emb is not None else None,
    )


def kb_from_document(doc: dict) -> VectorIndex:
    if doc.get("schema_version") != KB_SCHEMA_VERSION:
        raise SchemaError("$.schema_version", f"expected {KB_SCHEMA_VERSION!r}")
    dims = doc.get("dims")
    if not isinstance(dims, int) or dims < 1:
        raise SchemaError("$.dims", "must be a positive integer")
    patterns = []
    seen = set()
    for i, p in enumerate(doc.get("patterns", [])):
        pat = pattern_from_document(p, f"$.patterns[{i}]")
        if pat.embedding is None or len(pat.embedding) != dims:
            raise SchemaError(f"$.patterns[{i}].embedding", f"expected {dims} values")
        if pat.pattern_id in seen:
            raise DuplicatePatternId(pat.pattern_id)
        seen.add(pat.pattern_id)
        patterns.append(pat)
    return VectorIndex(dims, patterns)


def save_kb(index: VectorIndex, path: Union[str, Path]) -> None:
    atomic_write_text(Path(path), json.dumps(index.to_document(), indent=1) + "\n")


def load_kb(path: Union[str, Path]) -> VectorIndex:
    return kb_from_document(json.loads(Path(path).read_text(encoding="utf-8")))


def load_pattern_sources(path: Union[str, Path]) -> list[KnowledgePattern]:
    """Read pattern records (without embeddings) from a JSON list or KB-shaped file."""
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    items = doc["patterns"] if isinstance(doc, dict) else doc
    return [pattern_from_document(p, f"$[{i}]") for i, p in enumerate(items)]


def seed_patterns() -> list[KnowledgePattern]:
    text = resources.files("bridgeaudit.data").joinpath("seed_patterns.json").read_text(encoding="utf-8")
    return [pattern_from_document(p, f"seed[{i}]") for i, p in enumerate(json.loads(text))]


def seed_kb(embedder: Optional[Embedder] = None) -> VectorIndex:
    return build_kb(seed_patterns(), embedder)


__all__ = [
    "KnowledgePattern",
    "Retrieved",
    "VectorIndex",
    "build_kb",
    "kb_from_document",
    "load_kb",
    "normalize",
    "retrieve",
    "save_kb",
    "seed_kb",
    "seed_patterns",
]
