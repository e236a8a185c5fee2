"""Taint propagation and context-aware slicing of transaction code."""

from ..frontend.render import render as reconstruct
from .identifiers import ScopeIndex, build_scope_index
from .propagate import TaintSet, propagate_taint, resolve_seed_names
from .slicer import Slice, SliceItem, estimate_tokens, reformat, slice_scope

__all__ = [
    "ScopeIndex",
    "Slice",
    "SliceItem",
    "TaintSet",
    "build_scope_index",
    "estimate_tokens",
    "propagate_taint",
    "reconstruct",
    "reformat",
    "resolve_seed_names",
    "slice_scope",
]
