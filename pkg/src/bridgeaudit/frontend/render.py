"""Render canonical AST nodes back to Solidity source.

Output is canonical: re-parsing rendered text yields a structurally equal
tree. Binary operands are parenthesized only where precedence demands it.
"""

from __future__ import annotations

from .nodes import KINDS, AstNode
from ..errors import UnrenderableKind

INDENT = "    "

BINARY_PRECEDENCE = {
    "||": 1,
    "&&": 2,
    "==": 3,
    "!=": 3,
    "<": 4,
    ">": 4,
    "<=": 4,
    ">=": 4,
    "|": 5,
    "^": 6,
    "&": 7,
    "<<": 8,
    ">>": 8,
    "+": 9,
    "-": 9,
    "*": 10,
    "/": 10,
    "%": 10,
    "**": 11,
}

_ATOMIC = frozenset({"Identifier", "Literal", "FunctionCall", "MemberAccess"})


def _is_index(node: AstNode) -> bool:
    return node.kind == "BinaryOp" and node.attrs["operator"] == "[]"


def _tight(node: AstNode) -> bool:
    """True if ``node`` can be a postfix base without parentheses."""
    if node.kind in _ATOMIC or _is_index(node):
        return True
    return node.kind == "UnaryOp" and node.attrs["operator"] == "new"


def _wrap(text: str, needed: bool) -> str:
    return f"({text})" if needed else text


def _binary(node: AstNode) -> str:
    op = node.attrs["operator"]
    left, right = node.children
    if op == "[]":
        return f"{_wrap(render(left), not _tight(left))}[{render(right)}]"
    prec = BINARY_PRECEDENCE[op]

    def needs(child: AstNode, side: str) -> bool:
        if child.kind in ("Assignment", "Opaque"):
            return True
        if child.kind != "BinaryOp" or _is_index(child):
            return False
        cprec = BINARY_PRECEDENCE[child.attrs["operator"]]
        if cprec != prec:
            return cprec < prec
        # equal precedence: ** is right-associative, everything else left
        return side == ("left" if op == "**" else "right")

    return f"{_wrap(render(left), needs(left, 'left'))} {op} {_wrap(render(right), needs(right, 'right'))}"


def _unary(node: AstNode) -> str:
    op = node.attrs["operator"]
    (operand,) = node.children
    if op == "new":
        return f"new {operand.attrs['name']}"
    if node.attrs.get("prefix", True):
        inner = _wrap(render(operand), not _tight(operand) or operand.kind == "UnaryOp")
        return f"{op} {inner}" if op == "delete" else f"{op}{inner}"
    return f"{_wrap(render(operand), not _tight(operand))}{op}"


def _call(node: AstNode) -> str:
    callee = node.children[0]
    options = node.attrs.get("options", [])
    nopt = len(options)
    opt_vals = node.children[1 : 1 + nopt]
    args = node.children[1 + nopt :]
    text = _wrap(render(callee), not _tight(callee))
    if options:
        text += "{" + ", ".join(f"{k}: {render(v)}" for k, v in zip(options, opt_vals)) + "}"
    return text + "(" + ", ".join(render(a) for a in args) + ")"


def _params(params: list, *, events: bool = False) -> str:
    parts = []
    for p in params:
        bits = [p["type"]]
        if events and p.get("indexed"):
            bits.append("indexed")
        if p.get("name"):
            bits.append(p["name"])
        parts.append(" ".join(bits))
    return "(" + ", ".join(parts) + ")"


def function_header(node: AstNode) -> str:
    """Header of a FunctionDef without its body."""
    a = node.attrs
    kind = a["kind"]
    params = _params(node.children[0].attrs["params"])
    if kind == "function":
        head = f"function {a['name']}{params}"
    elif kind == "modifier":
        head = f"modifier {a['name']}{params}"
    else:
        head = f"{kind}{params}"
    bits = [head]
    if kind != "modifier":
        bits.append(a["visibility"])
    if a.get("mutability"):
        bits.append(a["mutability"])
    bits.extend(a.get("specifiers", []))
    for call in node.children:
        if call.kind != "FunctionCall":
            continue
        bits.append(render(call) if len(call.children) > 1 else call.attrs["callee"])
    if a.get("returns"):
        bits.append("returns " + _params(a["returns"]))
    return " ".join(bits)


def _block(node: AstNode, depth: int) -> str:
    prefix = "unchecked " if node.attrs.get("unchecked") else ""
    if not node.children:
        return prefix + "{}"
    inner = "".join("\n" + INDENT * (depth + 1) + render(s, depth + 1) for s in node.children)
    return prefix + "{" + inner + "\n" + INDENT * depth + "}"


def _var_decl(node: AstNode) -> str:
    decls = node.attrs["decls"]
    init = node.children[0] if node.children else None

    def one(d):
        return "" if d is None else f"{d['type']} {d['name']}"

    if node.attrs.get("tuple"):
        text = "(" + ", ".join(one(d) for d in decls) + ")"
    else:
        text = one(decls[0])
    if init is not None:
        text += " = " + render(init)
    return text + ";"


def for_header(node: AstNode) -> str:
    init = node.child("init")
    update = node.child("update")
    init_text = render(init) if init is not None else ";"
    upd = render(update) if update is not None else ""
    return f"for ({init_text} {render(node.condition)}; {upd})"


def render(node: AstNode, depth: int = 0) -> str:
    """Canonical source text for ``node``.

    Nested blocks are indented relative to ``depth``; the first line of the
    result carries no leading indentation.
    """
    kind = node.kind
    a = node.attrs
    if kind == "Identifier":
        return a["name"]
    if kind == "Literal":
        return a["value"]
    if kind == "BinaryOp":
        return _binary(node)
    if kind == "UnaryOp":
        return _unary(node)
    if kind == "MemberAccess":
        (base,) = node.children
        return f"{_wrap(render(base), not _tight(base))}.{a['member']}"
    if kind == "FunctionCall":
        return _call(node)
    if kind == "Assignment":
        lhs, rhs = node.children
        return f"{render(lhs)} {a['operator']} {render(rhs)}"
    if kind == "Opaque":
        return a["text"]
    if kind == "ExprStmt":
        return render(node.children[0], depth) + ";"
    if kind == "VarDeclStmt":
        return _var_decl(node)
    if kind == "Return":
        return "return " + render(node.children[0]) + ";" if node.children else "return;"
    if kind == "EmitStatement":
        return f"emit {a['event']}(" + ", ".join(render(c) for c in node.children) + ");"
    if kind == "Block":
        return _block(node, depth)
    if kind == "If":
        text = f"if ({render(node.condition)}) {render(node.body, depth)}"
        other = node.child("else")
        if other is not None:
            text += " else " + render(other, depth)
        return text
    if kind == "While":
        return f"while ({render(node.condition)}) {render(node.body, depth)}"
    if kind == "For":
        return f"{for_header(node)} {render(node.body, depth)}"
    if kind == "ParamList":
        return _params(a["params"])
    if kind == "FunctionDef":
        body = node.child("body")
        head = function_header(node)
        return head + (" " + render(body, depth) if body is not None else ";")
    if kind == "StateVarDecl":
        bits = [a["type"], a["visibility"]]
        if a.get("mutability"):
            bits.append(a["mutability"])
        bits.append(a["name"])
        text = " ".join(bits)
        if a.get("initializer_text") is not None:
            text += " = " + a["initializer_text"]
        return text + ";"
    if kind == "EventDecl":
        return f"event {a['name']}{_params(a['params'], events=True)}" + (" anonymous" if a.get("anonymous") else "") + ";"
    if kind == "ContractDef":
        head = ("abstract contract" if a["kind"] == "abstract" else a["kind"]) + " " + a["name"]
        if a["inherits"]:
            head += " is " + ", ".join(a["inherits"])
        if not node.children:
            return head + " {\n" + INDENT * depth + "}"
        members = "\n".join(
            "\n" + INDENT * (depth + 1) + render(m, depth + 1) for m in node.children
        )
        return head + " {" + members + "\n" + INDENT * depth + "}"
    if kind == "SourceUnit":
        return "\n\n".join(render(c) for c in node.children) + "\n"
    if kind not in KINDS:
        raise UnrenderableKind(f"cannot render node kind {kind!r}")
    raise UnrenderableKind(f"no renderer for {kind!r}")
