"""Call-graph construction and event-anchored transaction extraction.

Calls are resolved by name. An identifier call looks in the calling
contract and then its ancestors (breadth-first over the inherits lists). A
member call resolves through the static type of its base: a contract cast
``C(x).f()``, a typed state variable, parameter or local, ``super``,
``this`` or a library name. Calls through an interface fan out to every
contract implementing it. Whatever cannot be resolved is kept as a
dangling (caller, callee text) pair instead of being guessed.
"""

from __future__ import annotations

import logging
import re
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence, Union

from .errors import UnknownFunction
from .frontend.emits import compile_patterns, find_emit_sites
from .frontend.nodes import AstNode, CanonicalAst, ContractDecl, FunctionDecl
from .frontend.render import INDENT, render

log = logging.getLogger(__name__)

ENTRY_VISIBILITIES = frozenset({"public", "external"})

SOURCE_KEYWORDS = ("Lock", "Burn", "Deposit", "Send", "SwapOut")
DESTINATION_KEYWORDS = ("Mint", "Unlock", "Withdraw", "Relay", "SwapIn")

_BUILTIN_CALLS = frozenset(
    {
        "require",
        "assert",
        "revert",
        "keccak256",
        "sha256",
        "ripemd160",
        "ecrecover",
        "addmod",
        "mulmod",
        "blockhash",
        "gasleft",
        "selfdestruct",
        "type",
        "payable",
        "address",
        "bool",
        "string",
        "bytes",
        "uint",
        "int",
        "byte",
    }
)
_ELEMENTARY = re.compile(r"^(u?int\d*|bytes\d+|address|bool|string|bytes|byte)$")
_BUILTIN_BASES = frozenset({"abi", "msg", "block", "tx", "string", "bytes"})


@dataclass(frozen=True)
class EventPattern:
    """An anchor regex, optionally labelled with the bridge side it marks."""

    regex: str
    side: str = "unknown"


def default_event_patterns() -> list[EventPattern]:
    return [EventPattern(f"(?i){k}", "source") for k in SOURCE_KEYWORDS] + [
        EventPattern(f"(?i){k}", "destination") for k in DESTINATION_KEYWORDS
    ]


@dataclass
class CallGraph:
    nodes: set = field(default_factory=set)
    edges: set = field(default_factory=set)
    dangling: set = field(default_factory=set)
    visibility: dict = field(default_factory=dict)
    order: dict = field(default_factory=dict)
    _succ: dict = field(default_factory=dict, repr=False)
    _pred: dict = field(default_factory=dict, repr=False)

    def add_node(self, fid: str, visibility: str) -> None:
        if fid not in self.nodes:
            self.nodes.add(fid)
            self.visibility[fid] = visibility
            self.order[fid] = len(self.order)
            self._succ[fid] = []
            self._pred[fid] = []

    def add_edge(self, caller: str, callee: str) -> None:
        if (caller, callee) in self.edges:
            return
        self.edges.add((caller, callee))
        self._succ[caller].append(callee)
        self._pred[callee].append(caller)

    def successors(self, fid: str) -> list[str]:
        return list(self._succ[fid])

    def predecessors(self, fid: str) -> list[str]:
        return list(self._pred[fid])

    def sorted_ids(self, ids: Iterable[str]) -> list[str]:
        return sorted(ids, key=lambda i: self.order[i])


# ---------------------------------------------------------------- resolution


def _type_name(declared: str) -> str:
    """Bare type name from a declared type such as ``IERC20 memory``."""
    parts = declared.split()
    if not parts:
        return ""
    if parts[0] == "contract" and len(parts) > 1:
        return parts[1]
    return parts[0]


class CallResolver:
    def __init__(self, ast: CanonicalAst):
        self.ast = ast

    def _pick(self, candidates: list[FunctionDecl], nargs: int) -> list[FunctionDecl]:
        if not candidates:
            return []
        exact = [c for c in candidates if len(c.params) == nargs]
        return [exact[0] if exact else candidates[0]]

    def _named(self, contracts: Sequence[ContractDecl], name: str, nargs: int) -> list[FunctionDecl]:
        # nearest contract declaring the name wins; overloads disambiguated by arity
        for c in contracts:
            hits = [f for f in c.functions if f.name == name]
            if hits:
                return self._pick(hits, nargs)
        return []

    def in_contract(self, target: ContractDecl, name: str, nargs: int) -> Optional[list[FunctionDecl]]:
        """Functions a member call ``target.name`` can reach; None if unresolvable."""
        if target.kind == "interface":
            out = []
            for impl in self.ast.implementers(target):
                out.extend(self._named(self.ast.linearized(impl), name, nargs))
            return out or None
        hits = self._named(self.ast.linearized(target), name, nargs)
        if hits:
            return hits
        if self.ast.find_state_var(target, name) is not None:
            return []  # public getter, not a function body
        return None

    def contract_of_expr(self, expr: AstNode, ctx: ContractDecl, local_types: dict) -> Optional[ContractDecl]:
        if expr.kind == "FunctionCall":
            callee = expr.children[0]
            if callee.kind == "Identifier":
                return self.ast.contract(callee.attrs["name"], ctx.file_id)
            return None
        if expr.kind != "Identifier":
            return None
        name = expr.attrs["name"]
        if name in local_types:
            return self.ast.contract(_type_name(local_types[name]), ctx.file_id)
        var = self.ast.find_state_var(ctx, name)
        if var is not None:
            return self.ast.contract(_type_name(var.declared_type), ctx.file_id)
        return None

    def resolve(self, call: AstNode, ctx: ContractDecl, local_types: dict):
        """Targets for a call: a list (possibly empty for builtins) or None if dangling."""
        callee = call.children[0]
        nargs = len(call.children) - 1 - len(call.attrs.get("options", []))
        if callee.kind == "Identifier":
            name = callee.attrs["name"]
            if name in _BUILTIN_CALLS or _ELEMENTARY.match(name):
                return []
            if name not in local_types and self.ast.contract(name, ctx.file_id) is not None:
                return []  # type conversion C(x)
            hits = self._named(self.ast.linearized(ctx), name, nargs)
            return hits or None
        if callee.kind == "MemberAccess":
            (base,) = callee.children
            member = callee.attrs["member"]
            if base.kind == "Identifier":
                bname = base.attrs["name"]
                if bname == "super":
                    return self._named(self.ast.ancestors(ctx), member, nargs) or None
                if bname == "this":
                    return self._named(self.ast.linearized(ctx), member, nargs) or None
                if bname in _BUILTIN_BASES and bname not in local_types:
                    return []
                if bname not in local_types and self.ast.find_state_var(ctx, bname) is None:
                    named = self.ast.contract(bname, ctx.file_id)
                    if named is not None:
                        return self.in_contract(named, member, nargs)
            if base.kind == "FunctionCall" and base.children[0].kind == "Identifier":
                if base.children[0].attrs["name"] == "type":
                    return []
            target = self.contract_of_expr(base, ctx, local_types)
            if target is not None:
                return self.in_contract(target, member, nargs)
            return None
        if callee.kind == "UnaryOp" and callee.attrs["operator"] == "new":
            return []
        return None


def local_types(*decls: FunctionDecl) -> dict:
    types: dict[str, str] = {}
    for d in decls:
        for name, declared in d.params + d.returns:
            if name:
                types[name] = declared
        if d.body is None:
            continue
        for node in d.body.walk():
            if node.kind == "VarDeclStmt":
                for decl in node.attrs["decls"]:
                    if decl is not None:
                        types[decl["name"]] = decl["type"]
    return types


def call_sites(ast: CanonicalAst, fn: FunctionDecl) -> list[AstNode]:
    """FunctionCall nodes executed by ``fn`` with its modifiers inlined."""
    sites = []
    for inv in fn.modifier_calls:
        for arg in inv.children[1:]:
            sites.extend(n for n in arg.walk() if n.kind == "FunctionCall")
    for mod in ast.modifiers_of(fn):
        if mod.body is not None:
            sites.extend(n for n in mod.body.walk() if n.kind == "FunctionCall")
    if fn.body is not None:
        sites.extend(n for n in fn.body.walk() if n.kind == "FunctionCall")
    return sites


def build_call_graph(ast: CanonicalAst) -> CallGraph:
    graph = CallGraph()
    for fid, fn in ast.functions.items():
        graph.add_node(fid, fn.visibility)
    resolver = CallResolver(ast)
    for fid, fn in ast.functions.items():
        ctx = ast.contract_of(fn)
        types = local_types(fn, *ast.modifiers_of(fn))
        for call in call_sites(ast, fn):
            targets = resolver.resolve(call, ctx, types)
            if targets is None:
                graph.dangling.add((fid, render(call.children[0])))
                continue
            for t in targets:
                graph.add_edge(fid, t.qualified_id)
    return graph


# ---------------------------------------------------------------- closures


def _require(g: CallGraph, fid: str) -> None:
    if fid not in g.nodes:
        raise UnknownFunction(fid)


def forward_closure(g: CallGraph, entry: str) -> set[str]:
    _require(g, entry)
    seen = {entry}
    queue = deque([entry])
    while queue:
        for nxt in g.successors(queue.popleft()):
            if nxt not in seen:
                seen.add(nxt)
                queue.append(nxt)
    return seen


def backward_closure(g: CallGraph, anchors: Iterable[str]) -> set[str]:
    """Public/external functions that reach any anchor (anchors included)."""
    anchors = list(anchors)
    for a in anchors:
        _require(g, a)
    seen = set(anchors)
    queue = deque(anchors)
    while queue:
        for prev in g.predecessors(queue.popleft()):
            if prev not in seen:
                seen.add(prev)
                queue.append(prev)
    return {s for s in seen if g.visibility[s] in ENTRY_VISIBILITIES}


# ---------------------------------------------------------------- extraction


@dataclass(frozen=True)
class TransactionNode:
    anchor_event: str
    entrypoint: str
    members: tuple
    side_hint: str
    code_text: str
    anchor_function: str = ""

    def to_document(self) -> dict:
        return {
            "anchor_event": self.anchor_event,
            "anchor_function": self.anchor_function,
            "entrypoint": self.entrypoint,
            "side_hint": self.side_hint,
            "members": list(self.members),
            "code_text": self.code_text,
        }

    @classmethod
    def from_document(cls, doc: dict) -> "TransactionNode":
        return cls(
            anchor_event=doc["anchor_event"],
            entrypoint=doc["entrypoint"],
            members=tuple(doc["members"]),
            side_hint=doc.get("side_hint", "unknown"),
            code_text=doc.get("code_text", ""),
            anchor_function=doc.get("anchor_function", ""),
        )


@dataclass(frozen=True)
class NoAnchorsFound:
    """Non-fatal diagnostic: no emitted event matched the anchor patterns."""

    patterns: tuple

    def __str__(self) -> str:
        return f"no emit statement matches any of {len(self.patterns)} anchor patterns"


def _normalize_patterns(patterns) -> list[EventPattern]:
    if patterns is None:
        return default_event_patterns()
    out = []
    for p in patterns:
        if isinstance(p, EventPattern):
            out.append(p)
        elif isinstance(p, dict):
            out.append(EventPattern(p["regex"], p.get("side", "unknown")))
        else:
            out.append(EventPattern(str(p)))
    return out


def classify_event(event: str, patterns: Sequence[EventPattern]) -> str:
    """Side of the pattern group with the longest match inside ``event``.

    Longest match settles overlaps such as ``Unlock`` containing ``lock``.
    Equal-length matches from different sides give ``unknown``.
    """
    best: dict[str, int] = {}
    for p, rx in zip(patterns, compile_patterns(p.regex for p in patterns)):
        for m in rx.finditer(event):
            best[p.side] = max(best.get(p.side, 0), m.end() - m.start())
    if not best:
        return "unknown"
    top = max(best.values())
    sides = [s for s, n in best.items() if n == top]
    return sides[0] if len(sides) == 1 else "unknown"


def closure_code(ast: CanonicalAst, members: Iterable[str]) -> str:
    """Source text of the given functions grouped under their contracts.

    Modifiers used by a member are rendered under the contract declaring them.
    """
    wanted = set(members)
    shown = set()
    for fn in ast.functions.values():
        if fn.qualified_id in wanted:
            shown.add(fn.node)
            shown.update(m.node for m in ast.modifiers_of(fn))
    chunks = []
    for contract in ast.contracts:
        picked = [n for n in contract.node.children if n in shown]
        if not picked:
            continue
        head = contract.kind if contract.kind != "abstract" else "abstract contract"
        head += f" {contract.name}"
        if contract.inherits:
            head += " is " + ", ".join(contract.inherits)
        body = "\n\n".join(INDENT + render(n, 1) for n in picked)
        chunks.append(f"{head} {{\n{body}\n}}")
    return "\n\n".join(chunks) + ("\n" if chunks else "")


def extract_transaction_nodes(
    ast: CanonicalAst,
    patterns: Optional[Sequence[Union[str, EventPattern, dict]]] = None,
    *,
    graph: Optional[CallGraph] = None,
    diagnostics: Optional[list] = None,
) -> list[TransactionNode]:
    """One node per (public entrypoint, anchor event) reaching an anchor emit."""
    pats = _normalize_patterns(patterns)
    sites = find_emit_sites(ast, [p.regex for p in pats])
    if not sites:
        diag = NoAnchorsFound(tuple(p.regex for p in pats))
        log.info("%s", diag)
        if diagnostics is not None:
            diagnostics.append(diag)
        return []
    g = graph if graph is not None else build_call_graph(ast)
    out: list[TransactionNode] = []
    seen: set[tuple[str, str]] = set()
    for anchor_fn, event in sites:
        side = classify_event(event, pats)
        for entry in g.sorted_ids(backward_closure(g, [anchor_fn])):
            if (entry, event) in seen:
                continue
            seen.add((entry, event))
            members = tuple(g.sorted_ids(forward_closure(g, entry)))
            out.append(
                TransactionNode(
                    anchor_event=event,
                    entrypoint=entry,
                    members=members,
                    side_hint=side,
                    code_text=closure_code(ast, members),
                    anchor_function=anchor_fn,
                )
            )
    return out
