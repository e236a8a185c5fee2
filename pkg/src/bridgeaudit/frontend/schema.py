"""Canonical AST documents: serialization and validated ingestion.

Document layout::

    {"schema_version": "1", "files": [<SourceUnit node>, ...]}

Every node is ``{"id", "kind", "attrs", "children"}``. Ingestion checks the
kind-specific attributes the analyses rely on and reports the first
violation with its path.
"""

from __future__ import annotations

import copy
from typing import Any, Iterable

from ..errors import SchemaError
from .nodes import CONTRACT_KINDS, KINDS, VISIBILITIES, AstNode, CanonicalAst, SourceFile, build_source_file

SCHEMA_VERSION = "1"

FUNCTION_KINDS = ("function", "constructor", "modifier", "fallback", "receive")

_STR = (str,)
_OPT_STR = (str, type(None))
_OPT_INT = (int, type(None))

# kind -> {attr: allowed python types}
_REQUIRED: dict[str, dict[str, tuple]] = {
    "SourceUnit": {"file_id": _STR},
    "ContractDef": {"name": _STR, "kind": _STR, "inherits": (list,)},
    "StateVarDecl": {"name": _STR, "type": _STR, "visibility": _STR, "initializer_text": _OPT_STR},
    "EventDecl": {"name": _STR, "params": (list,)},
    "FunctionDef": {
        "name": _STR,
        "kind": _STR,
        "visibility": _STR,
        "modifiers": (list,),
        "returns": (list,),
        "body": _OPT_INT,
    },
    "ParamList": {"params": (list,)},
    "If": {"condition": (int,), "body": (int,)},
    "While": {"condition": (int,), "body": (int,)},
    "For": {"condition": (int,), "body": (int,)},
    "VarDeclStmt": {"decls": (list,)},
    "Assignment": {"operator": _STR},
    "BinaryOp": {"operator": _STR},
    "UnaryOp": {"operator": _STR},
    "FunctionCall": {"callee": _STR},
    "MemberAccess": {"member": _STR},
    "Identifier": {"name": _STR},
    "Literal": {"value": _STR},
    "EmitStatement": {"event": _STR},
    "Opaque": {"text": _STR},
}

_ARITY = {"BinaryOp": 2, "Assignment": 2, "UnaryOp": 1, "MemberAccess": 1, "ExprStmt": 1}


def node_to_dict(node: AstNode) -> dict:
    return {
        "id": node.node_id,
        "kind": node.kind,
        "attrs": copy.deepcopy(node.attrs),
        "children": [node_to_dict(c) for c in node.children],
    }


def to_document(files: Iterable[SourceFile]) -> dict:
    if isinstance(files, CanonicalAst):
        files = files.files
    return {"schema_version": SCHEMA_VERSION, "files": [node_to_dict(f.root) for f in files]}


def _check_params(params: Any, path: str) -> None:
    for i, p in enumerate(params):
        if not isinstance(p, dict):
            raise SchemaError(f"{path}[{i}]", "parameter must be an object")
        for key in ("name", "type"):
            if not isinstance(p.get(key), str):
                raise SchemaError(f"{path}[{i}].{key}", "missing or not a string")


def _node_from_dict(doc: Any, path: str, seen_ids: set) -> AstNode:
    if not isinstance(doc, dict):
        raise SchemaError(path, "node must be an object")
    for key in ("id", "kind", "attrs", "children"):
        if key not in doc:
            raise SchemaError(f"{path}.{key}", "missing mandatory field")
    node_id, kind, attrs, children = doc["id"], doc["kind"], doc["attrs"], doc["children"]
    if not isinstance(node_id, str) or not node_id:
        raise SchemaError(f"{path}.id", "must be a non-empty string")
    if node_id in seen_ids:
        raise SchemaError(f"{path}.id", f"duplicate node id {node_id!r}")
    seen_ids.add(node_id)
    if kind not in KINDS:
        raise SchemaError(f"{path}.kind", f"unknown kind {kind!r}")
    if not isinstance(attrs, dict):
        raise SchemaError(f"{path}.attrs", "must be an object")
    if not isinstance(children, list):
        raise SchemaError(f"{path}.children", "must be a list")
    for attr, types in _REQUIRED.get(kind, {}).items():
        if attr not in attrs:
            raise SchemaError(f"{path}.attrs.{attr}", f"required for {kind}")
        value = attrs[attr]
        if not isinstance(value, types) or isinstance(value, bool) and bool not in types:
            raise SchemaError(f"{path}.attrs.{attr}", f"wrong type {type(value).__name__}")
    kids = tuple(_node_from_dict(c, f"{path}.children[{i}]", seen_ids) for i, c in enumerate(children))
    if kind in _ARITY and len(kids) != _ARITY[kind]:
        raise SchemaError(f"{path}.children", f"{kind} takes {_ARITY[kind]} children, got {len(kids)}")
    if kind == "FunctionCall" and not kids:
        raise SchemaError(f"{path}.children", "FunctionCall needs a callee child")
    for attr in ("condition", "body", "else", "init", "update"):
        idx = attrs.get(attr)
        if kind in ("If", "While", "For", "FunctionDef") and idx is not None:
            if not isinstance(idx, int) or not 0 <= idx < len(kids):
                raise SchemaError(f"{path}.attrs.{attr}", "child index out of range")
            if attr in ("body", "else") and kids[idx].kind != "Block":
                raise SchemaError(f"{path}.children[{idx}]", f"{attr} must be a Block")
    if kind == "ContractDef":
        if attrs["kind"] not in CONTRACT_KINDS:
            raise SchemaError(f"{path}.attrs.kind", f"unknown contract kind {attrs['kind']!r}")
        if not all(isinstance(x, str) for x in attrs["inherits"]):
            raise SchemaError(f"{path}.attrs.inherits", "must list names")
    if kind == "FunctionDef":
        if attrs["kind"] not in FUNCTION_KINDS:
            raise SchemaError(f"{path}.attrs.kind", f"unknown function kind {attrs['kind']!r}")
        if attrs["visibility"] not in VISIBILITIES:
            raise SchemaError(f"{path}.attrs.visibility", f"unknown visibility {attrs['visibility']!r}")
        if not kids or kids[0].kind != "ParamList":
            raise SchemaError(f"{path}.children[0]", "FunctionDef must start with a ParamList")
        _check_params(attrs["returns"], f"{path}.attrs.returns")
    if kind in ("ParamList", "EventDecl"):
        _check_params(attrs["params"], f"{path}.attrs.params")
    if kind == "StateVarDecl" and attrs["visibility"] not in VISIBILITIES:
        raise SchemaError(f"{path}.attrs.visibility", f"unknown visibility {attrs['visibility']!r}")
    return AstNode(node_id, kind, copy.deepcopy(attrs), kids)


def ingest_source_unit(doc: Any, path: str = "file", seen_ids: set | None = None) -> SourceFile:
    root = _node_from_dict(doc, path, set() if seen_ids is None else seen_ids)
    if root.kind != "SourceUnit":
        raise SchemaError(f"{path}.kind", "file root must be a SourceUnit")
    names = set()
    for i, c in enumerate(root.children):
        if c.kind == "ContractDef":
            if c.attrs["name"] in names:
                raise SchemaError(f"{path}.children[{i}].attrs.name", f"duplicate contract {c.attrs['name']!r}")
            names.add(c.attrs["name"])
    return build_source_file(root)


def ingest_ast_json(doc: Any) -> CanonicalAst:
    """Validate a canonical AST document and build the codebase it describes."""
    if not isinstance(doc, dict):
        raise SchemaError("$", "document must be an object")
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise SchemaError("$.schema_version", f"expected {SCHEMA_VERSION!r}, got {doc.get('schema_version')!r}")
    files = doc.get("files")
    if not isinstance(files, list):
        raise SchemaError("$.files", "must be a list")
    seen: set = set()
    out = []
    file_ids = set()
    for i, f in enumerate(files):
        sf = ingest_source_unit(f, f"$.files[{i}]", seen)
        if sf.file_id in file_ids:
            raise SchemaError(f"$.files[{i}].attrs.file_id", f"duplicate file id {sf.file_id!r}")
        file_ids.add(sf.file_id)
        out.append(sf)
    return CanonicalAst(out)
