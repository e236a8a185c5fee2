"""Random straight-line-plus-control Solidity programs with known structure.

The generator keeps, for every statement it emits, the plain names the
statement mentions, the calls it makes and the chain of conditions around
it. The oracles in ``oracles.py`` work from this record alone, so they
never touch the package's own identifier resolution.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Optional

FILE = "Gen.sol"
CONTRACT = "Gen"
PREFIX = f"{FILE}::{CONTRACT}"
F, G, H = f"{PREFIX}::f", f"{PREFIX}::g", f"{PREFIX}::h"
STATE = ("s0", "s1", "s2")
PARAMS = ("p0", "p1", "p2")


def key(fid: str, name: str) -> str:
    return f"{PREFIX}::{name}" if name in STATE else f"{fid}:{name}"


@dataclass
class Stmt:
    fid: str
    kind: str  # leaf | if | for | while
    text: str  # leaf: rendered statement; control: rendered condition
    names: set  # plain names of the statement or the control header
    stack: tuple  # enclosing conditions, "!(c)" inside else branches
    call: Optional[tuple] = None  # (callee fid, [arg name sets], result name or None)
    then: list = field(default_factory=list)
    other: Optional[list] = None


@dataclass
class Program:
    source: str
    functions: dict  # fid -> list[Stmt] (top level, nested via then/other)
    seeds: list  # taint keys

    @property
    def scope(self) -> list:
        return [F, G, H]

    def preorder(self, fid: str) -> list:
        out = []

        def go(stmts):
            for s in stmts:
                out.append(s)
                go(s.then)
                if s.other is not None:
                    go(s.other)

        go(self.functions[fid])
        return out


class _Gen:
    def __init__(self, rng: random.Random, max_stmts: int):
        self.rng = rng
        self.budget = max_stmts
        self.counter = 0

    def fresh(self, prefix: str) -> str:
        self.counter += 1
        return f"{prefix}{self.counter}"

    def expr(self, visible: list) -> tuple:
        r = self.rng

        def atom():
            if r.random() < 0.2:
                return str(r.randint(1, 9)), set()
            n = r.choice(visible)
            return n, {n}

        a, na = atom()
        if r.random() < 0.5:
            return a, na
        b, nb = atom()
        return f"{a} {r.choice('+-*')} {b}", na | nb

    def cond(self, visible: list) -> tuple:
        a, na = self.expr(visible)
        b, nb = self.expr(visible)
        return f"{a} {self.rng.choice(['<', '>', '==', '!=', '<='])} {b}", na | nb

    def block(self, visible: list, stack: tuple, depth: int, n: int) -> list:
        visible = list(visible)
        out = []
        for _ in range(n):
            if self.budget <= 0:
                break
            self.budget -= 1
            out.append(self.stmt(visible, stack, depth))
        return out

    def stmt(self, visible: list, stack: tuple, depth: int) -> Stmt:
        r = self.rng
        choices = ["decl", "call_g", "assign", "require", "emit", "call_h"]
        if depth < 2:
            choices += ["if", "for", "while"]
        kind = r.choice(choices)
        if kind == "decl":
            name = self.fresh("l")
            e, ne = self.expr(visible)
            visible.append(name)
            return Stmt(F, "leaf", f"uint256 {name} = {e};", ne | {name}, stack)
        if kind == "call_g":
            name = self.fresh("l")
            (a, na), (b, nb) = self.expr(visible), self.expr(visible)
            visible.append(name)
            return Stmt(F, "leaf", f"uint256 {name} = g({a}, {b});", na | nb | {name}, stack, (G, [na, nb], name))
        if kind == "assign":
            target = r.choice([v for v in visible if v not in PARAMS] or list(STATE))
            e, ne = self.expr(visible)
            return Stmt(F, "leaf", f"{target} {r.choice(['=', '+='])} {e};", ne | {target}, stack)
        if kind == "require":
            c, nc = self.cond(visible)
            return Stmt(F, "leaf", f'require({c}, "m");', nc, stack)
        if kind == "emit":
            e, ne = self.expr(visible)
            return Stmt(F, "leaf", f"emit Ev({e});", ne, stack)
        if kind == "call_h":
            e, ne = self.expr(visible)
            return Stmt(F, "leaf", f"h({e});", ne, stack, (H, [ne], None))
        if kind == "for":
            var = self.fresh("i")
            bound, nb = self.expr(visible)
            c = f"{var} < {bound}"
            s = Stmt(F, "for", c, nb | {var}, stack)
            s.then = self.block(visible + [var], stack + (c,), depth + 1, r.randint(1, 3))
            return s
        c, nc = self.cond(visible)
        s = Stmt(F, kind, c, nc, stack)
        s.then = self.block(visible, stack + (c,), depth + 1, r.randint(1, 3))
        if kind == "if" and r.random() < 0.5:
            s.other = self.block(visible, stack + (f"!({c})",), depth + 1, r.randint(1, 3))
        return s


def _emit(stmts: list, indent: int) -> list:
    pad = "    " * indent
    lines = []
    for s in stmts:
        if s.kind == "leaf":
            lines.append(pad + s.text)
            continue
        if s.kind == "for":
            var = s.text.split(" ", 1)[0]
            head = f"for (uint256 {var} = 0; {s.text}; {var}++) {{"
        else:
            head = f"{s.kind} ({s.text}) {{"
        lines.append(pad + head)
        lines += _emit(s.then, indent + 1)
        if s.other is not None:
            lines.append(pad + "} else {")
            lines += _emit(s.other, indent + 1)
        lines.append(pad + "}")
    return lines


def generate(seed: int, max_stmts: int = 47) -> Program:
    """Program whose three functions hold at most ``max_stmts + 3`` statements."""
    rng = random.Random(seed)
    gen = _Gen(rng, max_stmts)
    body = gen.block(list(PARAMS) + list(STATE), (), 0, rng.randint(3, 14))
    # g and h are fixed so every call site has a well-defined callee
    g_body = [
        Stmt(G, "leaf", "uint256 gt = q0 + q1 + s1;", {"gt", "q0", "q1", "s1"}, ()),
        Stmt(G, "leaf", "return gt;", {"gt"}, ()),
    ]
    h_body = [Stmt(H, "leaf", "s2 = r0;", {"r0", "s2"}, ())]
    lines = [
        "// SPDX-License-Identifier: MIT",
        "pragma solidity ^0.8.0;",
        "",
        f"contract {CONTRACT} {{",
        "    uint256 s0;",
        "    uint256 s1;",
        "    uint256 s2;",
        "    event Ev(uint256 v);",
        "",
        "    function g(uint256 q0, uint256 q1) internal returns (uint256) {",
        *_emit(g_body, 2),
        "    }",
        "",
        "    function h(uint256 r0) internal {",
        *_emit(h_body, 2),
        "    }",
        "",
        "    function f(uint256 p0, uint256 p1, uint256 p2) public {",
        *_emit(body, 2),
        "    }",
        "}",
        "",
    ]
    seed_names = rng.sample(list(PARAMS) + list(STATE), rng.randint(1, 2))
    return Program("\n".join(lines), {F: body, G: g_body, H: h_body}, [key(F, n) for n in seed_names])
