"""Locate functions that emit events matching name patterns."""

from __future__ import annotations

import re
from typing import Iterable, Pattern, Union

from ..errors import InvalidPattern
from .nodes import CanonicalAst

PatternLike = Union[str, Pattern]


def compile_patterns(patterns: Iterable[PatternLike]) -> list[Pattern]:
    compiled = []
    for p in patterns:
        if isinstance(p, re.Pattern):
            compiled.append(p)
            continue
        try:
            compiled.append(re.compile(p))
        except re.error as exc:
            raise InvalidPattern(p, str(exc)) from exc
    return compiled


def find_emit_sites(ast: CanonicalAst, patterns: Iterable[PatternLike]) -> list[tuple[str, str]]:
    """(function id, event name) for every emit whose name matches a pattern.

    Ordered by file, contract, function and emit position; each pair is
    reported once. Modifier bodies are not searched.
    """
    compiled = compile_patterns(patterns)
    sites: list[tuple[str, str]] = []
    for fn in ast.functions.values():
        if fn.body is None:
            continue
        for node in fn.body.walk():
            if node.kind != "EmitStatement":
                continue
            event = node.attrs["event"]
            if any(p.search(event) for p in compiled) and (fn.qualified_id, event) not in sites:
                sites.append((fn.qualified_id, event))
    return sites
