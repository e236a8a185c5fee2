"""State variables touched by a function and everything it calls."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from ..callgraph import CallGraph, build_call_graph, forward_closure
from ..errors import UnknownFunction
from ..frontend.nodes import CanonicalAst
from ..taint.identifiers import build_scope_index


@dataclass(frozen=True)
class StateVarEntry:
    name: str
    declared_type: str
    initializer_text: Optional[str]
    owning_contract: str

    def to_document(self) -> dict:
        return {
            "name": self.name,
            "declared_type": self.declared_type,
            "initializer_text": self.initializer_text,
            "owning_contract": self.owning_contract,
        }


@dataclass(frozen=True)
class StateContext:
    function_id: str
    state_vars: tuple

    def to_document(self) -> dict:
        return {"function_id": self.function_id, "state_vars": [v.to_document() for v in self.state_vars]}


def state_context(function_id: str, ast: CanonicalAst, graph: Optional[CallGraph] = None) -> StateContext:
    """State variables read or written anywhere in the forward closure."""
    if function_id not in ast.functions:
        raise UnknownFunction(function_id)
    graph = graph or build_call_graph(ast)
    index = build_scope_index(ast, forward_closure(graph, function_id))
    referenced = set()
    for unit in index.units:
        referenced.update(unit.keys)
    entries = tuple(
        StateVarEntry(v.name, v.declared_type, v.initializer_text, v.owning_contract)
        for qid, v in ast.state_vars.items()
        if qid in referenced
    )
    return StateContext(function_id, entries)
