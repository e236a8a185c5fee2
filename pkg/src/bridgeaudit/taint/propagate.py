"""Fixed-point taint propagation over a transaction's functions.

Three rules are applied until nothing changes:

1. a statement that mentions any tainted key taints every key it mentions;
2. a tainted argument taints the matching parameter of the callee;
3. once anything inside a value-returning callee is tainted, the variables
   the call's result is assigned to become tainted too.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Optional

from ..errors import UnknownSeed
from ..frontend.nodes import CanonicalAst
from .identifiers import ScopeIndex, build_scope_index


@dataclass(frozen=True)
class TaintSet:
    tainted: frozenset
    seeds: frozenset
    passes: int = 0

    def __contains__(self, key: str) -> bool:
        return key in self.tainted

    def touches(self, keys: Iterable[str]) -> bool:
        return not self.tainted.isdisjoint(keys)


PassHook = Callable[[int, frozenset], None]


def run_fixed_point(index: ScopeIndex, seeds: Iterable[str], on_pass: Optional[PassHook] = None) -> TaintSet:
    seeds = frozenset(seeds)
    tainted = set(seeds)
    callee_keys = {b.callee: index.callee_keys(b.callee) for b in index.bindings}
    passes = 0
    while True:
        before = len(tainted)
        for unit in index.units:
            if not tainted.isdisjoint(unit.keys):
                tainted |= unit.keys
        for b in index.bindings:
            for arg, param in zip(b.arg_keys, b.param_keys):
                if param and not tainted.isdisjoint(arg):
                    tainted.add(param)
            if b.returns_value and b.result_targets and not tainted.isdisjoint(callee_keys[b.callee]):
                tainted |= b.result_targets
        passes += 1
        if on_pass is not None:
            on_pass(passes, frozenset(tainted))
        if len(tainted) == before:
            return TaintSet(frozenset(tainted), seeds, passes)


def resolve_seed_names(ast: CanonicalAst, scope: Iterable[str], names: Iterable[str], entry: Optional[str] = None) -> set:
    """Map plain names (usually entrypoint parameter names) to taint keys.

    A name is looked up as a parameter of ``entry``, then as a local of any
    scope function in order, then as a state variable. Anything already
    shaped like a key is checked against the scope as is.
    """
    index = build_scope_index(ast, scope)
    declared = index.declared_keys()
    out = set()
    for name in names:
        if name in declared:
            out.add(name)
            continue
        candidates = []
        if entry is not None:
            candidates.append(f"{entry}:{name}")
        candidates += [f"{fid}:{name}" for fid in index.function_ids]
        for fid in index.function_ids:
            var = ast.find_state_var(index.scopes[fid].contract, name)
            if var is not None:
                candidates.append(var.qualified_id)
        hit = next((c for c in candidates if c in declared), None)
        if hit is None:
            raise UnknownSeed(name)
        out.add(hit)
    return out


def propagate_taint(
    ast: CanonicalAst,
    scope: Iterable[str],
    seeds: Iterable[str],
    on_pass: Optional[PassHook] = None,
) -> TaintSet:
    """Tainted keys reachable from ``seeds`` within ``scope``.

    Seeds are identifier keys (see :mod:`.identifiers`); each must name a
    declaration visible in the scope. ``on_pass`` receives the tainted set
    after every full pass, which lets callers check monotonicity.
    """
    seeds = list(seeds)
    if not seeds:
        raise ValueError("at least one seed is required")
    index = build_scope_index(ast, scope)
    declared = index.declared_keys()
    for s in seeds:
        if s not in declared:
            raise UnknownSeed(s)
    return run_fixed_point(index, seeds, on_pass)
