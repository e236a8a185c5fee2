"""Context-aware slicing: tainted statements plus every enclosing condition.

The walk descends through ``if``/``for``/``while``. A control node whose
header is tainted forces everything beneath it into the slice; otherwise a
leaf statement is kept only when it mentions a tainted key. A control node
is kept whenever something below it is kept, its header is tainted, or it
is itself forced, so each kept statement carries its full chain of
conditions.
"""

from __future__ import annotations

import math
import textwrap
from dataclasses import dataclass, field
from typing import Iterable, Optional

from ..frontend.nodes import AstNode, CanonicalAst
from ..frontend.render import INDENT, for_header, function_header, render
from .identifiers import ScopeIndex, build_scope_index
from .propagate import TaintSet


@dataclass(frozen=True)
class Frame:
    """One enclosing control node and the branch the item sits in."""

    node_id: str
    branch: str  # then | else | body
    header: str
    condition: str


@dataclass(frozen=True)
class SliceItem:
    code: str
    context_stack: tuple
    frames: tuple
    function_id: str
    node_id: str
    kind: str = "statement"  # statement | condition


@dataclass(frozen=True)
class Slice:
    items: tuple = ()
    covered_node_ids: frozenset = frozenset()
    text: str = ""

    @property
    def token_estimate(self) -> int:
        return estimate_tokens(self.text)


def estimate_tokens(text: str) -> int:
    return math.ceil(len(text) / 4)


def _header(node: AstNode) -> str:
    if node.kind == "If":
        return f"if ({render(node.condition)})"
    if node.kind == "While":
        return f"while ({render(node.condition)})"
    return for_header(node)


class _Walker:
    def __init__(self, index: ScopeIndex, taint: TaintSet):
        self.index = index
        self.taint = taint
        self.covered: set[str] = set()

    def tainted(self, node: AstNode) -> bool:
        unit = self.index.unit_of_node.get(node.node_id)
        return unit is not None and self.taint.touches(unit.keys)

    def visit(self, node: AstNode, fid: str, frames: tuple, force: bool) -> list[SliceItem]:
        if node.kind == "Block":
            out = []
            for child in node.children:
                out += self.visit(child, fid, frames, force)
            return out
        if node.kind in ("If", "For", "While"):
            hot = self.tainted(node)
            inner_force = force or hot
            header = _header(node)
            cond = render(node.condition)
            first = "then" if node.kind == "If" else "body"
            own = Frame(node.node_id, first, header, cond)
            inner = self.visit(node.body, fid, frames + (own,), inner_force)
            other = node.child("else")
            if other is not None:
                neg = Frame(node.node_id, "else", header, f"!({cond})")
                inner += self.visit(other, fid, frames + (neg,), inner_force)
            if not (inner or hot or force):
                return []
            self.covered.add(node.node_id)
            marker = SliceItem(header, tuple(f.condition for f in frames), frames + (own,), fid, node.node_id, "condition")
            return [marker] + inner
        if force or self.tainted(node):
            self.covered.add(node.node_id)
            return [SliceItem(render(node), tuple(f.condition for f in frames), frames, fid, node.node_id)]
        return []


def slice_scope(ast: CanonicalAst, scope: Iterable[str], taint: TaintSet, index: Optional[ScopeIndex] = None) -> Slice:
    index = index or build_scope_index(ast, scope)
    walker = _Walker(index, taint)
    items: list[SliceItem] = []
    if taint.tainted:
        for fid in index.function_ids:
            fn = ast.lookup(fid)
            for inv in fn.modifier_calls:
                if walker.tainted(inv):
                    walker.covered.add(inv.node_id)
            if fn.body is not None:
                items += walker.visit(fn.body, fid, (), False)
    raw = Slice(tuple(items), frozenset(walker.covered))
    return Slice(raw.items, raw.covered_node_ids, reformat(raw, ast))


# ---------------------------------------------------------------- reformat


@dataclass
class _Group:
    node_id: str
    header: str
    branches: dict = field(default_factory=dict)  # branch -> list of entries


def _place(entries: list, item: SliceItem) -> None:
    for frame in item.frames:
        group = entries[-1] if entries and isinstance(entries[-1], _Group) else None
        if group is None or group.node_id != frame.node_id:
            group = _Group(frame.node_id, frame.header)
            entries.append(group)
        entries = group.branches.setdefault(frame.branch, [])
    if item.kind == "statement":
        entries.append(item.code)


def _emit(entries: list, depth: int, lines: list) -> None:
    pad = INDENT * depth
    for e in entries:
        if isinstance(e, str):
            first, _, rest = e.partition("\n")
            lines.append(pad + first)
            if rest:
                # raw multi-line text keeps its shape, re-anchored at this depth
                lines.extend(pad + ln if ln.strip() else "" for ln in textwrap.dedent(rest).split("\n"))
            continue
        main = e.branches.get("then", e.branches.get("body", []))
        lines.append(f"{pad}{e.header} {{")
        _emit(main, depth + 1, lines)
        if e.branches.get("else"):
            lines.append(pad + "} else {")
            _emit(e.branches["else"], depth + 1, lines)
        lines.append(pad + "}")


def reformat(raw: Slice, ast: Optional[CanonicalAst] = None) -> str:
    """Nest slice items under their shared conditions as compilable code.

    With ``ast`` available, items are wrapped in their function headers and
    contract declarations; without it only the nested statements are shown.
    """
    if not raw.items:
        return ""
    by_fn: dict[str, list] = {}
    for item in raw.items:
        _place(by_fn.setdefault(item.function_id, []), item)
    if ast is None:
        lines: list[str] = []
        for entries in by_fn.values():
            _emit(entries, 0, lines)
        return "\n".join(lines) + "\n"
    chunks = []
    for contract in ast.contracts:
        fns = [d for d in contract.functions + contract.modifiers if d.qualified_id in by_fn]
        if not fns:
            continue
        fns.sort(key=lambda d: ast.position[d.qualified_id])
        head = contract.kind if contract.kind != "abstract" else "abstract contract"
        head += f" {contract.name}"
        if contract.inherits:
            head += " is " + ", ".join(contract.inherits)
        parts = []
        for fn in fns:
            lines = [INDENT + function_header(fn.node) + " {"]
            _emit(by_fn[fn.qualified_id], 2, lines)
            lines.append(INDENT + "}")
            parts.append("\n".join(lines))
        chunks.append(head + " {\n" + "\n\n".join(parts) + "\n}")
    return "\n\n".join(chunks) + "\n"
