"""Tolerant recursive-descent parser for a Solidity subset.

Statements and contract members the grammar does not cover are kept as
``Opaque`` nodes carrying their raw source text, so a file always parses.
Node ids are assigned afterwards in pre-order, making them a pure function
of the input bytes.
"""

from __future__ import annotations

import logging
import re
from typing import Optional, Union

from .lexer import ELEMENTARY_TYPES, KEYWORDS, UNITS, Token, decode, tokenize
from .nodes import AstNode, SourceFile, build_source_file
from .render import render

logger = logging.getLogger(__name__)

ASSIGN_OPS = frozenset(["=", "+=", "-=", "*=", "/=", "%=", "|=", "&=", "^=", "<<=", ">>=", ">>>="])
BINARY_OPS = {
    "||": 1, "&&": 2, "==": 3, "!=": 3, "<": 4, ">": 4, "<=": 4, ">=": 4,
    "|": 5, "^": 6, "&": 7, "<<": 8, ">>": 8, "+": 9, "-": 9, "*": 10, "/": 10, "%": 10, "**": 11,
}
PREFIX_OPS = frozenset(["!", "-", "~", "++", "--", "delete", "+"])
VISIBILITY_WORDS = frozenset(["public", "external", "internal", "private"])
MUTABILITY_WORDS = frozenset(["pure", "view", "payable"])
LOCATIONS = frozenset(["memory", "storage", "calldata"])
# keywords that may still appear as expression identifiers
EXPR_NAMES = frozenset(["payable", "revert", "type", "address"])
_CLOSERS = {"(": ")", "[": "]", "{": "}"}


class ParseError(Exception):
    def __init__(self, token: Token, message: str):
        super().__init__(f"offset {token.start}: {message} (at {token.text!r})")
        self.token = token


def _n(kind: str, attrs: Optional[dict] = None, children=()) -> AstNode:
    return AstNode("", kind, attrs or {}, tuple(children))


class Parser:
    def __init__(self, text: str, file_id: str):
        self.text = text
        self.file_id = file_id
        self.toks = tokenize(text)
        self.i = 0
        self.diagnostics: list[str] = []

    # -- token helpers -------------------------------------------------

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def at(self, *texts: str) -> bool:
        return self.tok.kind in ("ident", "punct") and self.tok.text in texts

    def advance(self) -> Token:
        t = self.tok
        if t.kind != "eof":
            self.i += 1
        return t

    def expect(self, text: str) -> Token:
        if not self.at(text):
            raise ParseError(self.tok, f"expected {text!r}")
        return self.advance()

    def ident(self) -> str:
        t = self.tok
        if t.kind != "ident" or (t.text in KEYWORDS and t.text not in EXPR_NAMES):
            raise ParseError(t, "expected identifier")
        self.advance()
        return t.text

    def raw(self, start: int, end: int) -> str:
        """Source text covering tokens ``start`` .. ``end - 1``."""
        if end <= start:
            return ""
        return self.text[self.toks[start].start : self.toks[end - 1].end]

    def _location(self, start: int) -> str:
        t = self.toks[start]
        line = self.text.count("\n", 0, t.start) + 1
        return f"line {line}"

    def skip_balanced(self) -> None:
        """Skip one bracketed group starting at the current opener."""
        opener = self.advance()
        stack = [_CLOSERS[opener.text]]
        while stack:
            t = self.advance()
            if t.kind == "eof":
                raise ParseError(t, f"unbalanced {opener.text!r}")
            if t.kind == "punct" and t.text in _CLOSERS:
                stack.append(_CLOSERS[t.text])
            elif t.kind == "punct" and t.text == stack[-1]:
                stack.pop()

    def skip_item(self) -> None:
        """Skip to the end of the current statement or member.

        Stops after a ``;`` at depth zero, after a braced group closes at
        depth zero, or before a ``}`` closing the enclosing scope.
        """
        depth = 0
        while True:
            t = self.tok
            if t.kind == "eof":
                return
            if t.kind == "punct":
                if t.text in ("(", "[", "{"):
                    depth += 1
                elif t.text in (")", "]", "}"):
                    if depth == 0:
                        return
                    depth -= 1
                    if depth == 0 and t.text == "}":
                        self.advance()
                        if self.at("else", "catch"):
                            continue
                        if self.at(";"):
                            self.advance()
                        return
                elif t.text == ";" and depth == 0:
                    self.advance()
                    return
            self.advance()

    def opaque(self, start: int, context: str) -> AstNode:
        return _n("Opaque", {"text": self.raw(start, self.i), "context": context})

    def recover(self, start: int, context: str, exc: Exception) -> AstNode:
        self.i = start
        self.skip_item()
        if self.i == start:  # always make progress
            self.advance()
        node = self.opaque(start, context)
        self.diagnostics.append(f"{self._location(start)}: {context} kept opaque: {exc}")
        return node

    # -- file and contract level ------------------------------------------

    def parse_unit(self) -> AstNode:
        members = []
        while self.tok.kind != "eof":
            start = self.i
            if self.at("contract", "interface", "library") or (
                self.at("abstract") and self.peek().text == "contract"
            ):
                try:
                    members.append(self.parse_contract())
                except ParseError as exc:
                    self.i = start
                    self.skip_item()
                    if self.i == start:
                        self.advance()
                    self.diagnostics.append(
                        f"{self._location(start)}: skipped contract span "
                        f"[{self.toks[start].start}, {self.toks[self.i - 1].end}): {exc}"
                    )
                    members.append(self.opaque(start, "unit"))
            else:
                if self.at("pragma", "import"):
                    while not self.at(";") and self.tok.kind != "eof":
                        self.advance()
                    self.advance()
                else:
                    self.skip_item()
                if self.i == start:
                    self.advance()
                members.append(self.opaque(start, "unit"))
        return _n("SourceUnit", {"file_id": self.file_id, "diagnostics": self.diagnostics}, members)

    def parse_contract(self) -> AstNode:
        kind = self.advance().text
        if kind == "abstract":
            self.expect("contract")
        name = self.ident()
        inherits = []
        if self.at("is"):
            self.advance()
            while True:
                path = self.ident()
                while self.at("."):
                    self.advance()
                    path += "." + self.ident()
                inherits.append(path)
                if self.at("("):
                    self.skip_balanced()
                if not self.at(","):
                    break
                self.advance()
        self.expect("{")
        members = []
        while not self.at("}"):
            if self.tok.kind == "eof":
                self.diagnostics.append(f"{self._location(self.i)}: unterminated body of {name}")
                break
            start = self.i
            try:
                members.append(self.parse_member())
            except ParseError as exc:
                members.append(self.recover(start, "member", exc))
        if self.at("}"):
            self.advance()
        return _n("ContractDef", {"name": name, "kind": kind, "inherits": inherits}, members)

    def parse_member(self) -> AstNode:
        start = self.i
        if self.at("function", "constructor", "modifier", "fallback", "receive"):
            return self.parse_function()
        if self.at("event"):
            return self.parse_event()
        if self.at("struct", "enum", "using", "error"):
            self.skip_item()
            return self.opaque(start, "member")
        return self.parse_state_var()

    def parse_state_var(self) -> AstNode:
        type_text = self.parse_type()
        visibility, mutability, extra = "internal", None, []
        while True:
            if self.at(*VISIBILITY_WORDS):
                visibility = self.advance().text
            elif self.at("constant", "immutable"):
                mutability = self.advance().text
            elif self.at("override"):
                self.advance()
                if self.at("("):
                    self.skip_balanced()
            else:
                break
        name = self.ident()
        attrs = {"name": name, "type": type_text, "visibility": visibility, "mutability": mutability}
        children = []
        if self.at("="):
            self.advance()
            s = self.i
            init = self.parse_expression()
            attrs["initializer_text"] = self.raw(s, self.i)
            children.append(init)
        else:
            attrs["initializer_text"] = None
        self.expect(";")
        return _n("StateVarDecl", attrs, children)

    def parse_event(self) -> AstNode:
        self.expect("event")
        name = self.ident()
        params = self.parse_params(events=True)
        anonymous = False
        if self.at("anonymous"):
            self.advance()
            anonymous = True
        self.expect(";")
        return _n("EventDecl", {"name": name, "params": params, "anonymous": anonymous})

    def parse_function(self) -> AstNode:
        kw = self.advance().text
        if kw in ("function", "modifier"):
            if kw == "function" and self.at("("):
                name = "fallback"
                kind = "fallback"
            else:
                name = self.ident()
                kind = kw
        else:
            name = kind = kw
        params = self.parse_params() if (kind != "modifier" or self.at("(")) else []
        visibility = None
        mutability = None
        specifiers: list[str] = []
        returns: list = []
        mod_calls: list[AstNode] = []
        while not self.at("{", ";"):
            if self.tok.kind == "eof":
                raise ParseError(self.tok, "unterminated function header")
            if self.at(*VISIBILITY_WORDS):
                visibility = self.advance().text
            elif self.at(*MUTABILITY_WORDS):
                mutability = self.advance().text
            elif self.at("virtual"):
                specifiers.append(self.advance().text)
            elif self.at("override"):
                s = self.i
                self.advance()
                if self.at("("):
                    self.skip_balanced()
                specifiers.append(re.sub(r"\s+", "", self.raw(s, self.i)))
            elif self.at("returns"):
                self.advance()
                returns = self.parse_params()
            elif self.tok.kind == "ident":
                callee = _n("Identifier", {"name": self.ident()})
                while self.at("."):
                    self.advance()
                    callee = _n("MemberAccess", {"member": self.ident()}, [callee])
                args = self.parse_args() if self.at("(") else []
                mod_calls.append(_n("FunctionCall", {"callee": render(callee), "options": []}, [callee, *args]))
            else:
                raise ParseError(self.tok, "unexpected token in function header")
        if visibility is None:
            visibility = {"modifier": "internal", "fallback": "external", "receive": "external"}.get(kind, "public")
        children = [_n("ParamList", {"params": params}), *mod_calls]
        attrs = {
            "name": name,
            "kind": kind,
            "visibility": visibility,
            "mutability": mutability,
            "specifiers": specifiers,
            "modifiers": [c.attrs["callee"] for c in mod_calls],
            "returns": returns,
            "body": None,
        }
        if self.at("{"):
            attrs["body"] = len(children)
            children.append(self.parse_block())
        else:
            self.expect(";")
        return _n("FunctionDef", attrs, children)

    def parse_params(self, events: bool = False) -> list:
        self.expect("(")
        params = []
        while not self.at(")"):
            type_text = self.parse_type()
            indexed = False
            while self.at(*LOCATIONS) or self.at("indexed", "payable"):
                word = self.advance().text
                if word == "indexed":
                    indexed = True
                else:
                    type_text += " " + word
            name = ""
            if self.tok.kind == "ident" and not self.at(","):
                name = self.ident()
            p = {"name": name, "type": type_text}
            if events:
                p["indexed"] = indexed
            params.append(p)
            if not self.at(","):
                break
            self.advance()
        self.expect(")")
        return params

    # -- types ---------------------------------------------------------

    def parse_type(self) -> str:
        if self.at("mapping"):
            self.advance()
            self.expect("(")
            key = self.parse_type()
            if self.tok.kind == "ident" and not self.at("=>"):
                self.ident()
            self.expect("=>")
            value = self.parse_type()
            if self.tok.kind == "ident" and not self.at(")"):
                self.ident()
            self.expect(")")
            text = f"mapping({key} => {value})"
        elif self.at("function"):
            raise ParseError(self.tok, "function types are not supported")
        else:
            t = self.tok
            if t.kind != "ident" or (t.text in KEYWORDS and t.text != "address"):
                raise ParseError(t, "expected type name")
            self.advance()
            text = t.text
            while self.at(".") and self.peek().kind == "ident":
                self.advance()
                text += "." + self.advance().text
            if text == "address" and self.at("payable"):
                self.advance()
                text = "address payable"
        while self.at("["):
            s = self.i
            self.skip_balanced()
            inner = self.raw(s + 1, self.i - 1)
            text += f"[{inner}]"
        return text

    def _looks_like_decl(self) -> bool:
        save = self.i
        try:
            self.parse_type()
            t = self.tok
            return t.kind == "ident" and (t.text in LOCATIONS or t.text not in KEYWORDS)
        except ParseError:
            return False
        finally:
            self.i = save

    # -- statements ------------------------------------------------------

    def parse_block(self) -> AstNode:
        attrs = {}
        if self.at("unchecked"):
            self.advance()
            attrs["unchecked"] = True
        self.expect("{")
        stmts = []
        while not self.at("}"):
            if self.tok.kind == "eof":
                raise ParseError(self.tok, "unterminated block")
            stmts.append(self.parse_statement())
        self.advance()
        return _n("Block", attrs, stmts)

    def parse_statement(self) -> AstNode:
        start = self.i
        try:
            return self._statement()
        except ParseError as exc:
            return self.recover(start, "statement", exc)

    def _body(self) -> AstNode:
        """Statement body, normalized to a Block."""
        if self.at("{") or (self.at("unchecked") and self.peek().text == "{"):
            return self.parse_block()
        return _n("Block", {}, [self.parse_statement()])

    def _statement(self) -> AstNode:
        start = self.i
        if self.at("{") or (self.at("unchecked") and self.peek().text == "{"):
            return self.parse_block()
        if self.at("if"):
            self.advance()
            self.expect("(")
            cond = self.parse_expression()
            self.expect(")")
            then = self._body()
            attrs = {"condition": 0, "body": 1}
            children = [cond, then]
            if self.at("else"):
                self.advance()
                attrs["else"] = 2
                children.append(self._body())
            return _n("If", attrs, children)
        if self.at("while"):
            self.advance()
            self.expect("(")
            cond = self.parse_expression()
            self.expect(")")
            return _n("While", {"condition": 0, "body": 1}, [cond, self._body()])
        if self.at("for"):
            return self.parse_for()
        if self.at("return"):
            self.advance()
            children = [] if self.at(";") else [self.parse_expression()]
            self.expect(";")
            return _n("Return", {}, children)
        if self.at("emit"):
            self.advance()
            event = self.ident()
            while self.at("."):
                self.advance()
                event += "." + self.ident()
            if self.peek().text == "{":
                raise ParseError(self.tok, "named event arguments")
            args = self.parse_args()
            self.expect(";")
            return _n("EmitStatement", {"event": event}, args)
        if self.at("do"):
            self.advance()
            self._body()
            self.expect("while")
            self.skip_balanced()
            self.expect(";")
            return self.opaque(start, "statement")
        if self.at("assembly", "try", "break", "continue"):
            self.skip_item()
            return self.opaque(start, "statement")
        if self.at("revert") and self.peek().kind == "ident":
            self.skip_item()
            return self.opaque(start, "statement")
        if self.at("("):
            decl = self._try_tuple_decl()
            if decl is not None:
                return decl
        if self._looks_like_decl():
            return self.parse_var_decl()
        expr = self.parse_expression()
        self.expect(";")
        return _n("ExprStmt", {}, [expr])

    def parse_var_decl(self, terminated: bool = True) -> AstNode:
        type_text = self.parse_type()
        if self.at(*LOCATIONS):
            type_text += " " + self.advance().text
        name = self.ident()
        children = []
        if self.at("="):
            self.advance()
            children.append(self.parse_expression())
        if terminated:
            self.expect(";")
        return _n("VarDeclStmt", {"decls": [{"name": name, "type": type_text}], "tuple": False}, children)

    def _try_tuple_decl(self) -> Optional[AstNode]:
        save = self.i
        try:
            self.expect("(")
            decls: list = []
            while True:
                if self.at(",") or self.at(")"):
                    decls.append(None)
                else:
                    type_text = self.parse_type()
                    if self.at(*LOCATIONS):
                        type_text += " " + self.advance().text
                    decls.append({"name": self.ident(), "type": type_text})
                if self.at(")"):
                    break
                self.expect(",")
            self.expect(")")
            if not any(decls):
                raise ParseError(self.tok, "empty tuple declaration")
            self.expect("=")
            init = self.parse_expression()
            self.expect(";")
            return _n("VarDeclStmt", {"decls": decls, "tuple": True}, [init])
        except ParseError:
            self.i = save
            return None

    def parse_for(self) -> AstNode:
        self.expect("for")
        self.expect("(")
        children: list[AstNode] = []
        attrs: dict = {"init": None, "condition": None, "update": None, "body": None}
        if self.at(";"):
            self.advance()
        else:
            if self._looks_like_decl():
                init = self.parse_var_decl()
            else:
                init = _n("ExprStmt", {}, [self.parse_expression()])
                self.expect(";")
            attrs["init"] = len(children)
            children.append(init)
        cond = _n("Literal", {"value": "true", "type": "bool"}) if self.at(";") else self.parse_expression()
        attrs["condition"] = len(children)
        children.append(cond)
        self.expect(";")
        if not self.at(")"):
            attrs["update"] = len(children)
            children.append(self.parse_expression())
        self.expect(")")
        attrs["body"] = len(children)
        children.append(self._body())
        return _n("For", attrs, children)

    # -- expressions -------------------------------------------------------

    def parse_args(self) -> list:
        self.expect("(")
        if self.at("{"):
            raise ParseError(self.tok, "named call arguments")
        args = []
        while not self.at(")"):
            args.append(self.parse_expression())
            if not self.at(","):
                break
            self.advance()
        self.expect(")")
        return args

    def parse_expression(self) -> AstNode:
        lhs = self.parse_ternary()
        if self.tok.kind == "punct" and self.tok.text in ASSIGN_OPS:
            op = self.advance().text
            rhs = self.parse_expression()
            return _n("Assignment", {"operator": op}, [lhs, rhs])
        return lhs

    def parse_ternary(self) -> AstNode:
        start = self.i
        cond = self.parse_binary(1)
        if self.at("?"):
            self.advance()
            self.parse_expression()
            self.expect(":")
            self.parse_expression()
            return self.opaque(start, "expression")
        return cond

    def parse_binary(self, min_prec: int) -> AstNode:
        left = self.parse_unary()
        while True:
            t = self.tok
            prec = BINARY_OPS.get(t.text) if t.kind == "punct" else None
            if prec is None or prec < min_prec:
                return left
            self.advance()
            right = self.parse_binary(prec if t.text == "**" else prec + 1)
            left = _n("BinaryOp", {"operator": t.text}, [left, right])

    def parse_unary(self) -> AstNode:
        t = self.tok
        if (t.kind == "punct" or t.text == "delete") and t.text in PREFIX_OPS:
            self.advance()
            operand = self.parse_unary()
            return _n("UnaryOp", {"operator": t.text, "prefix": True}, [operand])
        if self.at("new"):
            self.advance()
            type_text = self.parse_type()
            node = _n("UnaryOp", {"operator": "new", "prefix": True}, [_n("Identifier", {"name": type_text})])
            return self.parse_postfix(node, self.i)
        start = self.i
        return self.parse_postfix(self.parse_primary(), start)

    def parse_postfix(self, node: AstNode, start: int) -> AstNode:
        while True:
            if self.at("."):
                self.advance()
                t = self.tok
                if t.kind != "ident":
                    raise ParseError(t, "expected member name")
                self.advance()
                node = _n("MemberAccess", {"member": t.text}, [node])
            elif self.at("["):
                self.advance()
                if self.at("]"):
                    raise ParseError(self.tok, "array type in expression")
                index = self.parse_expression()
                if self.at(":"):
                    raise ParseError(self.tok, "index range")
                self.expect("]")
                node = _n("BinaryOp", {"operator": "[]"}, [node, index])
            elif self.at("{") and self.peek().kind == "ident" and self.peek(2).text == ":":
                self.advance()
                names, values = [], []
                while not self.at("}"):
                    names.append(self.ident())
                    self.expect(":")
                    values.append(self.parse_expression())
                    if not self.at(","):
                        break
                    self.advance()
                self.expect("}")
                if not self.at("("):
                    raise ParseError(self.tok, "call options without call")
                if self.peek().text == "{":
                    self.skip_balanced()
                    node = self.opaque(start, "expression")
                    continue
                args = self.parse_args()
                node = _n("FunctionCall", {"callee": render(node), "options": names}, [node, *values, *args])
            elif self.at("("):
                if self.peek().text == "{":
                    self.skip_balanced()
                    node = self.opaque(start, "expression")
                    continue
                args = self.parse_args()
                node = _n("FunctionCall", {"callee": render(node), "options": []}, [node, *args])
            elif self.at("++", "--"):
                node = _n("UnaryOp", {"operator": self.advance().text, "prefix": False}, [node])
            else:
                return node

    def parse_primary(self) -> AstNode:
        t = self.tok
        start = self.i
        if t.kind == "punct" and t.text == "(":
            if self._is_tuple():
                self.skip_balanced()
                return self.opaque(start, "expression")
            self.advance()
            inner = self.parse_expression()
            self.expect(")")
            return inner
        if t.kind == "punct" and t.text == "[":
            self.skip_balanced()
            return self.opaque(start, "expression")
        if t.kind == "number":
            self.advance()
            value = t.text
            if self.tok.kind == "ident" and self.tok.text in UNITS:
                value += " " + self.advance().text
            return _n("Literal", {"value": value, "type": "number"})
        if t.kind == "string":
            self.advance()
            return _n("Literal", {"value": t.text, "type": "string"})
        if t.kind == "ident" and t.text in ("true", "false"):
            self.advance()
            return _n("Literal", {"value": t.text, "type": "bool"})
        if t.kind == "ident" and (t.text not in KEYWORDS or t.text in EXPR_NAMES or t.text in ELEMENTARY_TYPES):
            self.advance()
            return _n("Identifier", {"name": t.text})
        raise ParseError(t, "expected expression")

    def _is_tuple(self) -> bool:
        """True when the parenthesized group at the cursor is a tuple."""
        depth = 0
        j = self.i
        while j < len(self.toks):
            t = self.toks[j]
            if t.kind == "eof":
                return False
            if t.kind == "punct":
                if t.text in ("(", "[", "{"):
                    depth += 1
                elif t.text in (")", "]", "}"):
                    depth -= 1
                    if depth == 0:
                        return j == self.i + 1
                elif t.text == "," and depth == 1:
                    return True
            j += 1
        return False


def _number(node: AstNode, prefix: str, counter: list) -> AstNode:
    node_id = f"{prefix}:{counter[0]}"
    counter[0] += 1
    children = tuple(_number(c, prefix, counter) for c in node.children)
    return AstNode(node_id, node.kind, node.attrs, children)


def assign_ids(root: AstNode, file_id: str) -> AstNode:
    """Re-number a tree in pre-order with ids ``<file_id>:<n>``."""
    return _number(root, file_id, [0])


def parse_source(text: Union[str, bytes], file_id: str) -> SourceFile:
    """Parse Solidity source into a :class:`SourceFile`.

    Raises :class:`~bridgeaudit.errors.LexError` only for undecodable bytes;
    every other problem degrades to ``Opaque`` nodes plus diagnostics.
    """
    if not file_id:
        raise ValueError("file_id must be non-empty")
    source = decode(text)
    parser = Parser(source, file_id)
    root = assign_ids(parser.parse_unit(), file_id)
    sf = build_source_file(root)
    if sf.diagnostics:
        logger.info("%s: %d diagnostics, %d opaque nodes", file_id, len(sf.diagnostics), sf.opaque_count)
    return sf
