"""Audit thoughts and the layered graph that connects them."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional


@dataclass(frozen=True)
class AuditThought:
    thought_id: str
    layer: int
    parent_id: Optional[str]
    content: dict
    score: Optional[int] = None
    provenance: tuple = ()
    kind: str = "llm"  # root | sa | llm

    def to_document(self) -> dict:
        return {
            "thought_id": self.thought_id,
            "layer": self.layer,
            "parent_id": self.parent_id,
            "kind": self.kind,
            "score": self.score,
            "provenance": list(self.provenance),
            "content": self.content,
        }

    @classmethod
    def from_document(cls, doc: dict) -> "AuditThought":
        return cls(
            doc["thought_id"],
            doc["layer"],
            doc["parent_id"],
            doc["content"],
            doc.get("score"),
            tuple(doc.get("provenance", ())),
            doc.get("kind", "llm"),
        )


@dataclass(frozen=True)
class Pruned:
    """A node that produced no thought; its subtree stops here."""

    parent_id: str
    layer: int
    reason: str
    best_score: Optional[int] = None
    diagnostics: tuple = ()
    label: str = ""

    def to_document(self) -> dict:
        return {
            "parent_id": self.parent_id,
            "layer": self.layer,
            "label": self.label,
            "reason": self.reason,
            "best_score": self.best_score,
            "diagnostics": list(self.diagnostics),
        }


@dataclass
class AuditGraph:
    nodes: dict = field(default_factory=dict)
    edges: list = field(default_factory=list)
    layer_index: dict = field(default_factory=dict)
    pruned: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def add(self, thought: AuditThought) -> None:
        if thought.thought_id in self.nodes:
            raise ValueError(f"duplicate thought id {thought.thought_id}")
        if thought.parent_id is not None:
            parent = self.nodes[thought.parent_id]
            if parent.layer + 1 != thought.layer:
                raise ValueError(f"{thought.thought_id}: layer {thought.layer} under layer {parent.layer}")
            self.edges.append((thought.parent_id, thought.thought_id))
        elif thought.layer != 0:
            raise ValueError("only the layer-0 root may lack a parent")
        self.nodes[thought.thought_id] = thought
        self.layer_index.setdefault(thought.layer, []).append(thought.thought_id)

    def layer(self, t: int) -> list[AuditThought]:
        return [self.nodes[i] for i in self.layer_index.get(t, [])]

    def children(self, thought_id: str) -> list[AuditThought]:
        return [self.nodes[c] for p, c in self.edges if p == thought_id]

    def path_to_root(self, thought_id: str) -> list[str]:
        path = [thought_id]
        while self.nodes[path[-1]].parent_id is not None:
            path.append(self.nodes[path[-1]].parent_id)
        return path

    def ancestor(self, thought_id: str, layer: int) -> AuditThought:
        for tid in self.path_to_root(thought_id):
            if self.nodes[tid].layer == layer:
                return self.nodes[tid]
        raise KeyError(f"{thought_id} has no layer-{layer} ancestor")

    def to_document(self) -> dict:
        return {
            "nodes": [self.nodes[i].to_document() for t in sorted(self.layer_index) for i in self.layer_index[t]],
            "edges": [list(e) for e in self.edges],
            "pruned": [p.to_document() for p in self.pruned],
            "meta": self.meta,
        }

    @classmethod
    def from_document(cls, doc: dict) -> "AuditGraph":
        g = cls(meta=dict(doc.get("meta", {})))
        for n in doc["nodes"]:
            g.add(AuditThought.from_document(n))
        g.pruned = [Pruned(p["parent_id"], p["layer"], p["reason"], p.get("best_score"), tuple(p.get("diagnostics", ())), p.get("label", "")) for p in doc.get("pruned", [])]
        return g
