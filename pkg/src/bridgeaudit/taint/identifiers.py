"""Scoped identifier keys and the statement units taint analysis works on.

Keys are canonical strings:

* a parameter, return variable or local ``x`` of function ``F`` is ``F:x``;
* a state variable is its qualified id ``file::Contract::x``;
* a member path ``x.y`` is the base key followed by ``.y``;
* names that resolve to neither (``msg``, ``block``, assembly builtins) are
  keyed per function like locals, so they never link two functions.

Callee names, contract and type names, event names and literals are not
data and produce no key.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Optional

from ..callgraph import CallResolver, local_types
from ..errors import UnknownFunction
from ..frontend.lexer import ELEMENTARY_TYPES, KEYWORDS, UNITS
from ..frontend.nodes import AstNode, CanonicalAst, FunctionDecl

_NOT_DATA = frozenset({"this", "super", "abi", "type", "_", "now"})
_WORD = re.compile(r"[A-Za-z_$][A-Za-z0-9_$]*")
_STRING = re.compile(r'"(?:[^"\\]|\\.)*"|\'(?:[^\'\\]|\\.)*\'')


@dataclass(frozen=True)
class Unit:
    """One statement (or control header) as seen by the infection rule."""

    node_id: str
    function_id: str
    kind: str  # statement | header | modifier-call
    keys: frozenset
    order: int


@dataclass(frozen=True)
class CallBinding:
    """Argument-to-parameter links of one resolved call inside the scope."""

    caller: str
    callee: str
    arg_keys: tuple  # one frozenset per positional argument
    param_keys: tuple
    result_targets: frozenset  # keys assigned from the call's value
    returns_value: bool


class FunctionScope:
    """Resolves names inside one function or modifier."""

    def __init__(self, ast: CanonicalAst, fn: FunctionDecl):
        self.ast = ast
        self.fn = fn
        self.contract = ast.contract_of(fn)
        self.locals = set(local_types(fn))
        self._callables = set()
        for c in ast.linearized(self.contract):
            self._callables.update(f.name for f in c.functions + c.modifiers)
            self._callables.update(e.name for e in c.events)

    def key(self, name: str) -> Optional[str]:
        if name in self.locals:
            return f"{self.fn.qualified_id}:{name}"
        if name in _NOT_DATA or name in ELEMENTARY_TYPES:
            return None
        var = self.ast.find_state_var(self.contract, name)
        if var is not None:
            return var.qualified_id
        if name in self._callables or self.ast.contract(name, self.fn.file_id) is not None:
            return None
        return f"{self.fn.qualified_id}:{name}"

    def _path(self, node: AstNode) -> Optional[tuple[str, list[str]]]:
        """(root name, member chain) if ``node`` is a plain ``a.b.c`` path."""
        members = []
        while node.kind == "MemberAccess":
            members.append(node.attrs["member"])
            node = node.children[0]
        if node.kind != "Identifier":
            return None
        return node.attrs["name"], list(reversed(members))

    def expr_keys(self, node: AstNode, out: Optional[set] = None) -> set:
        out = set() if out is None else out
        kind = node.kind
        if kind == "Identifier":
            k = self.key(node.attrs["name"])
            if k:
                out.add(k)
        elif kind == "Literal":
            pass
        elif kind == "Opaque":
            out.update(self.text_keys(node.attrs["text"]))
        elif kind == "MemberAccess":
            path = self._path(node)
            self.expr_keys(node.children[0], out)
            if path is not None:
                base = self.key(path[0])
                if base:
                    for i in range(1, len(path[1]) + 1):
                        out.add(base + "." + ".".join(path[1][:i]))
        elif kind == "FunctionCall":
            callee = node.children[0]
            if callee.kind == "MemberAccess":
                # the object a method is called on is data; the method name is not
                self.expr_keys(callee.children[0], out)
            elif callee.kind not in ("Identifier",) and not (
                callee.kind == "UnaryOp" and callee.attrs["operator"] == "new"
            ):
                self.expr_keys(callee, out)
            for child in node.children[1:]:
                self.expr_keys(child, out)
        elif kind == "UnaryOp" and node.attrs["operator"] == "new":
            pass
        else:
            for child in node.children:
                self.expr_keys(child, out)
        return out

    def text_keys(self, text: str) -> set:
        """Conservative keys for raw text kept by tolerant parsing."""
        out = set()
        for word in _WORD.findall(_STRING.sub(" ", text)):
            if word in KEYWORDS or word in UNITS:
                continue
            k = self.key(word)
            if k:
                out.add(k)
        return out

    def decl_keys(self, node: AstNode) -> set:
        return {f"{self.fn.qualified_id}:{d['name']}" for d in node.attrs["decls"] if d is not None}

    def param_keys(self) -> tuple:
        return tuple(f"{self.fn.qualified_id}:{name}" if name else "" for name, _ in self.fn.params)


def header_keys(scope: FunctionScope, node: AstNode) -> set:
    """Keys of a control node's header (condition, plus init/update for loops)."""
    keys = scope.expr_keys(node.condition)
    if node.kind == "For":
        for attr in ("init", "update"):
            part = node.child(attr)
            if part is not None:
                keys |= statement_keys(scope, part) if attr == "init" else scope.expr_keys(part)
    return keys


def statement_keys(scope: FunctionScope, node: AstNode) -> set:
    kind = node.kind
    if kind == "VarDeclStmt":
        keys = scope.decl_keys(node)
        for child in node.children:
            scope.expr_keys(child, keys)
        return keys
    if kind == "Opaque":
        return scope.text_keys(node.attrs["text"])
    if kind in ("If", "While", "For"):
        return header_keys(scope, node)
    keys: set = set()
    for child in node.children:
        scope.expr_keys(child, keys)
    return keys


def _assigned_keys(scope: FunctionScope, stmt: AstNode) -> set:
    if stmt.kind == "VarDeclStmt":
        return scope.decl_keys(stmt)
    if stmt.kind == "ExprStmt" and stmt.children[0].kind == "Assignment":
        return scope.expr_keys(stmt.children[0].children[0])
    return set()


@dataclass
class ScopeIndex:
    """Statement units and call bindings for a set of functions."""

    ast: CanonicalAst
    function_ids: tuple
    units: list = field(default_factory=list)
    bindings: list = field(default_factory=list)
    scopes: dict = field(default_factory=dict)
    unit_of_node: dict = field(default_factory=dict)

    @property
    def all_keys(self) -> set:
        keys = set()
        for u in self.units:
            keys |= u.keys
        for b in self.bindings:
            keys.update(k for k in b.param_keys if k)
        return keys

    def callee_keys(self, fid: str) -> set:
        keys = set()
        for u in self.units:
            if u.function_id == fid:
                keys |= u.keys
        return keys

    def declared_keys(self) -> set:
        """Keys of every parameter, local and reachable state variable."""
        keys = set(self.all_keys)
        for fid in self.function_ids:
            sc = self.scopes[fid]
            keys.update(f"{fid}:{n}" for n in sc.locals)
            for c in self.ast.linearized(sc.contract):
                keys.update(v.qualified_id for v in c.state_vars)
        return keys


def _statements(node: AstNode) -> Iterable[AstNode]:
    """Leaf statements and control nodes of a body, in source order."""
    if node.kind == "Block":
        for child in node.children:
            yield from _statements(child)
        return
    yield node
    if node.kind in ("If", "While", "For"):
        for attr in ("body", "else"):
            part = node.child(attr)
            if part is not None:
                yield from _statements(part)


def build_scope_index(ast: CanonicalAst, scope: Iterable[str]) -> ScopeIndex:
    """Index the given functions plus the modifiers they invoke."""
    ids = []
    for fid in scope:
        fn = ast.lookup(fid)
        if fn is None:
            raise UnknownFunction(fid)
        for mod in ast.modifiers_of(fn):
            if mod.qualified_id not in ids:
                ids.append(mod.qualified_id)
        if fid not in ids:
            ids.append(fid)
    ids.sort(key=lambda i: ast.position[i])
    index = ScopeIndex(ast, tuple(ids))
    in_scope = set(ids)
    resolver = CallResolver(ast)
    order = 0
    for fid in ids:
        fn = ast.lookup(fid)
        sc = FunctionScope(ast, fn)
        index.scopes[fid] = sc
        types = local_types(fn)
        for inv in fn.modifier_calls:
            unit = Unit(inv.node_id, fid, "modifier-call", frozenset(sc.expr_keys(inv)), order)
            order += 1
            index.units.append(unit)
            index.unit_of_node[inv.node_id] = unit
            mod = ast.find_modifier(sc.contract, inv.attrs["callee"])
            if mod is not None and mod.qualified_id in in_scope:
                args = tuple(frozenset(sc.expr_keys(a)) for a in inv.children[1:])
                params = tuple(f"{mod.qualified_id}:{n}" if n else "" for n, _ in mod.params)
                index.bindings.append(CallBinding(fid, mod.qualified_id, args, params, frozenset(), False))
        if fn.body is None:
            continue
        for stmt in _statements(fn.body):
            kind = "header" if stmt.kind in ("If", "While", "For") else "statement"
            unit = Unit(stmt.node_id, fid, kind, frozenset(statement_keys(sc, stmt)), order)
            order += 1
            index.units.append(unit)
            index.unit_of_node[stmt.node_id] = unit
            own = [stmt.condition] if kind == "header" else [stmt]
            if stmt.kind == "For":
                own += [c for c in (stmt.child("init"), stmt.child("update")) if c is not None]
            targets = frozenset(_assigned_keys(sc, stmt))
            for part in own:
                for call in (n for n in part.walk() if n.kind == "FunctionCall"):
                    resolved = resolver.resolve(call, sc.contract, types) or []
                    nopt = len(call.attrs.get("options", []))
                    args = tuple(frozenset(sc.expr_keys(a)) for a in call.children[1 + nopt :])
                    for target in resolved:
                        if target.qualified_id not in in_scope:
                            continue
                        params = tuple(f"{target.qualified_id}:{n}" if n else "" for n, _ in target.params)
                        index.bindings.append(
                            CallBinding(fid, target.qualified_id, args, params, targets, bool(target.returns))
                        )
    return index
