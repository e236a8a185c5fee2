"""Canonical syntax tree shared by every analysis stage.

A parsed file is a tree of :class:`AstNode` rooted at a ``SourceUnit``.
The declaration views (:class:`ContractDecl`, :class:`FunctionDecl`, ...)
are derived from that tree by :func:`build_source_file`, so a tree built by
the parser and a tree ingested from a document yield identical views.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Iterator, Optional

KINDS = frozenset(
    {
        "SourceUnit",
        "ContractDef",
        "StateVarDecl",
        "EventDecl",
        "FunctionDef",
        "ParamList",
        "Block",
        "If",
        "For",
        "While",
        "ExprStmt",
        "VarDeclStmt",
        "Assignment",
        "BinaryOp",
        "UnaryOp",
        "FunctionCall",
        "MemberAccess",
        "Identifier",
        "Literal",
        "EmitStatement",
        "Return",
        "Opaque",
    }
)

CONTROL_KINDS = frozenset({"If", "For", "While"})
STATEMENT_KINDS = frozenset(
    {"Block", "If", "For", "While", "ExprStmt", "VarDeclStmt", "EmitStatement", "Return", "Opaque"}
)
VISIBILITIES = ("public", "external", "internal", "private")
CONTRACT_KINDS = ("contract", "interface", "library", "abstract")


@dataclass(frozen=True, eq=False)
class AstNode:
    node_id: str
    kind: str
    attrs: dict = field(default_factory=dict)
    children: tuple = ()

    def walk(self) -> Iterator["AstNode"]:
        """Pre-order traversal including this node."""
        stack = [self]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(reversed(node.children))

    def child(self, attr: str) -> Optional["AstNode"]:
        """Child addressed by an index stored in ``attrs[attr]``."""
        idx = self.attrs.get(attr)
        if idx is None:
            return None
        return self.children[idx]

    @property
    def condition(self) -> Optional["AstNode"]:
        return self.child("condition")

    @property
    def body(self) -> Optional["AstNode"]:
        return self.child("body")

    def __repr__(self) -> str:
        return f"AstNode({self.node_id!r}, {self.kind!r}, {self.attrs!r}, <{len(self.children)} children>)"


def structurally_equal(a: AstNode, b: AstNode) -> bool:
    """Compare two trees ignoring node ids."""
    if a.kind != b.kind or a.attrs != b.attrs or len(a.children) != len(b.children):
        return False
    return all(structurally_equal(x, y) for x, y in zip(a.children, b.children))


def first_difference(a: AstNode, b: AstNode, path: str = "") -> Optional[str]:
    """Path of the first structural difference, or None when equal."""
    if a.kind != b.kind:
        return f"{path or '/'}: kind {a.kind} != {b.kind}"
    if a.attrs != b.attrs:
        return f"{path or '/'}: attrs {a.attrs} != {b.attrs}"
    if len(a.children) != len(b.children):
        return f"{path or '/'}: {len(a.children)} children != {len(b.children)}"
    for i, (x, y) in enumerate(zip(a.children, b.children)):
        diff = first_difference(x, y, f"{path}/{i}:{x.kind}")
        if diff:
            return diff
    return None


@dataclass(frozen=True)
class StateVarDecl:
    qualified_id: str
    name: str
    declared_type: str
    initializer_text: Optional[str]
    owning_contract: str
    node: AstNode = field(repr=False, compare=False)

    @property
    def initializer(self) -> Optional[AstNode]:
        return self.node.children[0] if self.node.children else None


@dataclass(frozen=True)
class EventDecl:
    name: str
    params: tuple
    node: AstNode = field(repr=False, compare=False)


@dataclass(frozen=True)
class FunctionDecl:
    qualified_id: str
    name: str
    params: tuple  # ((name, declared_type), ...)
    visibility: str
    body: Optional[AstNode] = field(repr=False, compare=False)
    emitted_events: tuple
    modifiers: tuple
    kind: str
    contract: str
    file_id: str
    returns: tuple = ()
    node: AstNode = field(default=None, repr=False, compare=False)

    @property
    def param_names(self) -> tuple:
        return tuple(name for name, _ in self.params)

    @property
    def modifier_calls(self) -> tuple:
        """FunctionCall nodes for the modifier invocations in the header."""
        return tuple(c for c in self.node.children if c.kind == "FunctionCall")

    @property
    def is_entrypoint(self) -> bool:
        return self.visibility in ("public", "external")


@dataclass(frozen=True)
class ContractDecl:
    name: str
    kind: str
    inherits: tuple
    state_vars: tuple
    functions: tuple
    events: tuple
    modifiers: tuple
    file_id: str
    node: AstNode = field(repr=False, compare=False)


@dataclass(frozen=True)
class SourceFile:
    file_id: str
    contracts: tuple
    root: AstNode = field(repr=False, compare=False)
    diagnostics: tuple = ()

    @property
    def opaque_count(self) -> int:
        return sum(1 for n in self.root.walk() if n.kind == "Opaque")


def emitted_events(body: Optional[AstNode]) -> tuple:
    if body is None:
        return ()
    seen: list[str] = []
    for node in body.walk():
        if node.kind == "EmitStatement" and node.attrs["event"] not in seen:
            seen.append(node.attrs["event"])
    return tuple(seen)


def build_source_file(root: AstNode) -> SourceFile:
    """Derive declaration views from a ``SourceUnit`` tree."""
    file_id = root.attrs["file_id"]
    contracts = []
    for cnode in root.children:
        if cnode.kind != "ContractDef":
            continue
        cname = cnode.attrs["name"]
        state_vars, functions, events, modifiers = [], [], [], []
        used_names: dict[str, int] = {}
        for member in cnode.children:
            if member.kind == "StateVarDecl":
                state_vars.append(
                    StateVarDecl(
                        qualified_id=f"{file_id}::{cname}::{member.attrs['name']}",
                        name=member.attrs["name"],
                        declared_type=member.attrs["type"],
                        initializer_text=member.attrs.get("initializer_text"),
                        owning_contract=cname,
                        node=member,
                    )
                )
            elif member.kind == "EventDecl":
                events.append(
                    EventDecl(
                        name=member.attrs["name"],
                        params=tuple((p["name"], p["type"]) for p in member.attrs["params"]),
                        node=member,
                    )
                )
            elif member.kind == "FunctionDef":
                name = member.attrs["name"]
                used_names[name] = used_names.get(name, 0) + 1
                # overloads get a positional suffix so qualified ids stay unique
                suffix = "" if used_names[name] == 1 else f"#{used_names[name]}"
                body = member.child("body")
                plist = member.children[0]
                decl = FunctionDecl(
                    qualified_id=f"{file_id}::{cname}::{name}{suffix}",
                    name=name,
                    params=tuple((p["name"], p["type"]) for p in plist.attrs["params"]),
                    visibility=member.attrs["visibility"],
                    body=body,
                    emitted_events=emitted_events(body),
                    modifiers=tuple(member.attrs["modifiers"]),
                    kind=member.attrs["kind"],
                    contract=cname,
                    file_id=file_id,
                    returns=tuple((r["name"], r["type"]) for r in member.attrs["returns"]),
                    node=member,
                )
                (modifiers if decl.kind == "modifier" else functions).append(decl)
        contracts.append(
            ContractDecl(
                name=cname,
                kind=cnode.attrs["kind"],
                inherits=tuple(cnode.attrs["inherits"]),
                state_vars=tuple(state_vars),
                functions=tuple(functions),
                events=tuple(events),
                modifiers=tuple(modifiers),
                file_id=file_id,
                node=cnode,
            )
        )
    return SourceFile(
        file_id=file_id,
        contracts=tuple(contracts),
        root=root,
        diagnostics=tuple(root.attrs.get("diagnostics", ())),
    )


class CanonicalAst:
    """Immutable collection of parsed files with lookup indexes."""

    def __init__(self, files):
        self.files: tuple[SourceFile, ...] = tuple(files)
        ids = set()
        for f in self.files:
            if f.file_id in ids:
                raise ValueError(f"duplicate file id {f.file_id!r}")
            ids.add(f.file_id)

    @cached_property
    def contracts(self) -> tuple[ContractDecl, ...]:
        return tuple(c for f in self.files for c in f.contracts)

    @cached_property
    def functions(self) -> dict[str, FunctionDecl]:
        """All non-modifier functions keyed by qualified id, in source order."""
        return {fn.qualified_id: fn for c in self.contracts for fn in c.functions}

    @cached_property
    def modifiers(self) -> dict[str, FunctionDecl]:
        return {m.qualified_id: m for c in self.contracts for m in c.modifiers}

    @cached_property
    def state_vars(self) -> dict[str, StateVarDecl]:
        return {v.qualified_id: v for c in self.contracts for v in c.state_vars}

    @cached_property
    def position(self) -> dict[str, int]:
        """Source-order rank of every function and modifier id."""
        order = {}
        for c in self.contracts:
            decls = {id(d.node): d for d in c.functions + c.modifiers}
            for member in c.node.children:
                decl = decls.get(id(member))
                if decl is not None:
                    order[decl.qualified_id] = len(order)
        return order

    @cached_property
    def _contract_index(self) -> dict[tuple[str, str], ContractDecl]:
        return {(c.file_id, c.name): c for c in self.contracts}

    def contract(self, name: str, file_id: Optional[str] = None) -> Optional[ContractDecl]:
        """Resolve a contract by name, preferring the given file."""
        if file_id is not None and (file_id, name) in self._contract_index:
            return self._contract_index[(file_id, name)]
        for c in self.contracts:
            if c.name == name:
                return c
        return None

    def contract_of(self, decl: FunctionDecl) -> ContractDecl:
        return self._contract_index[(decl.file_id, decl.contract)]

    def lookup(self, qualified_id: str) -> Optional[FunctionDecl]:
        return self.functions.get(qualified_id) or self.modifiers.get(qualified_id)

    def ancestors(self, contract: ContractDecl) -> list[ContractDecl]:
        """Breadth-first ancestors following inherits-list order."""
        out: list[ContractDecl] = []
        seen = {(contract.file_id, contract.name)}
        queue = [contract]
        while queue:
            cur = queue.pop(0)
            for pname in cur.inherits:
                parent = self.contract(pname, cur.file_id)
                if parent is None or (parent.file_id, parent.name) in seen:
                    continue
                seen.add((parent.file_id, parent.name))
                out.append(parent)
                queue.append(parent)
        return out

    def linearized(self, contract: ContractDecl) -> list[ContractDecl]:
        return [contract] + self.ancestors(contract)

    def find_function(self, contract: ContractDecl, name: str) -> Optional[FunctionDecl]:
        """Name-level lookup of ``name`` in a contract, then its nearest ancestors."""
        for c in self.linearized(contract):
            for fn in c.functions:
                if fn.name == name:
                    return fn
        return None

    def find_modifier(self, contract: ContractDecl, name: str) -> Optional[FunctionDecl]:
        for c in self.linearized(contract):
            for m in c.modifiers:
                if m.name == name:
                    return m
        return None

    def find_state_var(self, contract: ContractDecl, name: str) -> Optional[StateVarDecl]:
        for c in self.linearized(contract):
            for v in c.state_vars:
                if v.name == name:
                    return v
        return None

    def implementers(self, interface: ContractDecl) -> list[ContractDecl]:
        """Non-interface contracts that inherit ``interface`` transitively."""
        out = []
        for c in self.contracts:
            if c.kind == "interface" or c is interface:
                continue
            if any(a is interface for a in self.ancestors(c)):
                out.append(c)
        return out

    def modifiers_of(self, fn: FunctionDecl) -> list[FunctionDecl]:
        """Modifier declarations invoked by ``fn``, in header order."""
        contract = self.contract_of(fn)
        out = []
        for name in fn.modifiers:
            mod = self.find_modifier(contract, name)
            if mod is not None and mod not in out:
                out.append(mod)
        return out


def node_attr(node: AstNode, key: str, default: Any = None) -> Any:
    return node.attrs.get(key, default)
