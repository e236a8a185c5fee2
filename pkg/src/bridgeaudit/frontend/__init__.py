"""Solidity front-end: parsing, canonical documents, and emit-site search."""

from .nodes import (
    KINDS,
    AstNode,
    CanonicalAst,
    ContractDecl,
    EventDecl,
    FunctionDecl,
    SourceFile,
    StateVarDecl,
    structurally_equal,
)
from .parser import parse_source
from .render import render

__all__ = [
    "KINDS",
    "AstNode",
    "CanonicalAst",
    "ContractDecl",
    "EventDecl",
    "FunctionDecl",
    "SourceFile",
    "StateVarDecl",
    "parse_source",
    "render",
    "structurally_equal",
]
