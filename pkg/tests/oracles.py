"""Reference computations written straight from the definitions.

None of these import the code under test; they take plain data (edge
lists, generator records, raw chain values) and compute the expected
answer by the most direct route available, usually a boolean matrix
closure.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from progen import F, G, H, PARAMS, Program, key


def transitive_closure(nodes: list, edges) -> dict:
    """Reachability (reflexive) as ``{node: set of nodes}`` via Warshall on numpy."""
    pos = {n: i for i, n in enumerate(nodes)}
    m = np.eye(len(nodes), dtype=bool)
    for a, b in edges:
        m[pos[a], pos[b]] = True
    for k in range(len(nodes)):
        m |= np.outer(m[:, k], m[k, :])
    return {n: {nodes[j] for j in np.flatnonzero(m[pos[n]])} for n in nodes}


# ---------------------------------------------------------------- taint


def unit_keys(stmt) -> set:
    return {key(stmt.fid, n) for n in stmt.names}


def taint_oracle(prog: Program) -> set:
    """Keys reachable from the seeds over the three propagation edge kinds."""
    units = [unit_keys(s) for fid in (F, G, H) for s in prog.preorder(fid)]
    edges = set()
    for keys in units:
        edges.update((a, b) for a in keys for b in keys)
    callee_keys = {fid: set().union(*(unit_keys(s) for s in prog.preorder(fid))) for fid in (G, H)}
    params = {G: ["q0", "q1"], H: ["r0"]}
    for s in prog.preorder(F):
        if s.call is None:
            continue
        callee, arg_names, result = s.call
        for names, p in zip(arg_names, params[callee]):
            edges.update((key(F, n), key(callee, p)) for n in names)
        if result is not None:
            edges.update((k, key(F, result)) for k in callee_keys[callee])
    nodes = sorted(set().union(*units) | set(prog.seeds) | {key(F, p) for p in PARAMS})
    reach = transitive_closure(nodes, edges)
    return set().union(*(reach[s] for s in prog.seeds))


def slice_oracle(prog: Program, tainted: set) -> dict:
    """``{statement record id: context stack}`` for every record in the slice.

    Records are identified by ``id()``; the caller pairs them with AST
    nodes by walking both in pre-order.
    """
    kept = {}

    def visit(stmts, force) -> bool:
        any_kept = False
        for s in stmts:
            hot = bool(unit_keys(s) & tainted)
            if s.kind == "leaf":
                if force or hot:
                    kept[id(s)] = s.stack
                    any_kept = True
                continue
            inner = visit(s.then, force or hot)
            if s.other is not None:
                inner = visit(s.other, force or hot) or inner
            if inner or hot or force:
                kept[id(s)] = s.stack
                any_kept = True
        return any_kept

    if tainted:
        for fid in (G, H, F):
            visit(prog.functions[fid], False)
    return kept


# ---------------------------------------------------------------- predicates


def source_truth(st: dict) -> dict:
    """Per-check truth for a source-side state given as raw values."""
    return {
        "receiver_nonzero": st["receiver"] != 0,
        "amount_positive": st["amount"] > 0,
        "dest_not_current": st["dest"] != st["chain_id"],
        "token_whitelisted": st["token"] in st["addr_wl"],
        # an unrecorded sender starts at nonce 0
        "nonce_expected": st["nonce"] == (st["nonce_next"] or 0),
        "dest_supported": st["dest"] in st["supported"],
        "ext_addr_whitelisted": st["ext_addr"] in st["addr_wl"],
        "ext_func_whitelisted": st["ext_func"] in st["func_wl"],
        "locked_correct": st["before"] - st["after"] == st["amount"],
        "min_execution_bounded": st["actual_out"] is not None and st["actual_out"] >= st["min_out"],
        "reference_price_bounded": st["exec_price"] is not None
        and abs(Fraction(st["exec_price"]) - st["ref"]) / st["ref"] <= Fraction(st["bps"], 10000),
    }


def dest_truth(st: dict) -> dict:
    return {
        "receiver_nonzero": st["receiver"] != 0,
        "amount_positive": st["amount"] > 0,
        "dest_is_current": st["dest"] == st["chain_id"],
        "nonce_unused": (st["source_chain"], st["nonce"]) not in st["used"],
        "source_supported": st["source_chain"] in st["supported"],
        "proof_valid": st["sig_ok"],
        "ext_addr_whitelisted": st["ext_addr"] in st["addr_wl"],
        "ext_func_whitelisted": st["ext_func"] in st["func_wl"],
        "unlocked_correct": st["mapped"] is not None and st["after"] - st["before"] == st["amount"],
    }


SOURCE_RULES = {
    "Ps1": ("receiver_nonzero", "amount_positive", "dest_not_current"),
    "Ps2": ("token_whitelisted", "nonce_expected", "dest_supported"),
    "Ps3": (
        "ext_addr_whitelisted",
        "ext_func_whitelisted",
        "locked_correct",
        "min_execution_bounded",
        "reference_price_bounded",
    ),
}

DEST_RULES = {
    "Pd1": ("receiver_nonzero", "amount_positive", "dest_is_current"),
    "Pd2": ("nonce_unused", "source_supported", "proof_valid"),
    "Pd3": ("ext_addr_whitelisted", "ext_func_whitelisted", "unlocked_correct"),
}


def rule_truth(rules: dict, checks: dict) -> dict:
    return {rid: all(checks[c] for c in cs) for rid, cs in rules.items()}
