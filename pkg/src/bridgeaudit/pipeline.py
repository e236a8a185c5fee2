"""Layer-by-layer audit driver.

Layers 1 and 3 are static analysis: transaction extraction, then one taint
slice per mapped entry parameter. Layers 2, 4 and 5 ask the model ensemble
(generate, aggregate, evaluate) to map properties to parameters, check the
security rules, and look for bypasses. Each layer is a barrier; within a
layer nodes run concurrently and are joined back in parent order, so the
resulting graph does not depend on scheduling.
"""

from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

from .callgraph import TransactionNode, build_call_graph, extract_transaction_nodes
from .config import PipelineConfig
from .errors import AllProducersFailed, AuditError
from .frontend.nodes import CanonicalAst
from .metrics import reference_prices
from .orchestrator.operators import Runtime, aggregate, default_similarity, evaluate, generate
from .orchestrator.prompts import bypass_prompt, mapping_prompt, rule_prompt, score_prompt
from .orchestrator.schemas import BYPASS, MAPPING, RULE
from .predicates import RULES, PredicateId, properties_for_side, rules_for_side
from .semantic.context import state_context
from .semantic.embed import FeatureHashEmbedder
from .semantic.kb import VectorIndex, load_kb, retrieve, seed_kb
from .taint import propagate_taint, reformat, resolve_seed_names, slice_scope
from .thoughts import AuditGraph, AuditThought, Pruned

log = logging.getLogger(__name__)

ROOT_ID = "L0:root"
GRAPH_SCHEMA_VERSION = "1"


@dataclass
class AuditContext:
    ast: CanonicalAst
    cfg: PipelineConfig
    kb: VectorIndex
    runtime: Runtime
    calls: object = None
    graph: Optional[AuditGraph] = None
    pruned: list = field(default_factory=list)
    diagnostics: list = field(default_factory=list)
    similarity: Callable = field(default_factory=default_similarity)


def _entry_side(side: str) -> list:
    if side in ("source", "destination"):
        return properties_for_side(side)
    seen, out = set(), []
    for p in properties_for_side("source") + properties_for_side("destination"):
        if p.name not in seen:
            seen.add(p.name)
            out.append(p)
    return out


def _llm_node(ctx: AuditContext, schema, prompt: str, grounding, score_of, thought_id: str, parent: AuditThought, label: str):
    try:
        cands = generate(prompt, ctx.cfg.ensemble, ctx.cfg.k_G, schema, grounding, ctx.runtime, label)
    except AllProducersFailed as exc:
        return Pruned(parent.thought_id, schema.layer, "AllProducersFailed", None, (str(exc),), label)
    merged = aggregate(cands, ctx.similarity, ctx.cfg.prune_sim, schema)
    return evaluate(
        merged,
        ctx.cfg.evaluator,
        ctx.cfg.confidence_threshold,
        score_of,
        schema,
        ctx.runtime,
        thought_id,
        parent.thought_id,
        label,
    )


# ---------------------------------------------------------------- per-layer work


def _layer1(ctx: AuditContext, root: AuditThought) -> list:
    diags: list = []
    nodes = extract_transaction_nodes(ctx.ast, ctx.cfg.event_patterns, graph=ctx.calls, diagnostics=diags)
    ctx.diagnostics += [str(d) for d in diags]
    return [
        AuditThought(f"L1:n{i}", 1, root.thought_id, n.to_document(), None, (), "sa") for i, n in enumerate(nodes)
    ]


def _layer2(ctx: AuditContext, parent: AuditThought):
    tx = TransactionNode.from_document(parent.content)
    fn = ctx.ast.functions[tx.entrypoint]
    prompt = mapping_prompt(MAPPING, tx.side_hint, tx.entrypoint, list(fn.param_names), _entry_side(tx.side_hint), tx.code_text)
    tid = "L2:" + parent.thought_id.split(":", 1)[1]
    return _llm_node(
        ctx,
        MAPPING,
        prompt,
        tx.code_text,
        lambda f: score_prompt(2, f, tx.code_text),
        tid,
        parent,
        f"mapping {tx.entrypoint}",
    )


def _mapping_of(thought: AuditThought) -> dict:
    return {f["property_name"]: f["parameter_name"] for f in thought.content["findings"] if f["parameter_name"]}


def _layer3(ctx: AuditContext, parent: AuditThought) -> list:
    tx = TransactionNode.from_document(ctx_lookup(ctx, parent, 1).content)
    mapping = _mapping_of(parent)
    params = list(dict.fromkeys(mapping.values()))
    out = []
    for param in params:
        label = f"slice {tx.entrypoint}:{param}"
        try:
            seeds = resolve_seed_names(ctx.ast, tx.members, [param], entry=tx.entrypoint)
            taint = propagate_taint(ctx.ast, tx.members, seeds)
            raw = slice_scope(ctx.ast, tx.members, taint)
        except AuditError as exc:
            ctx.pruned.append(Pruned(parent.thought_id, 3, type(exc).__name__, None, (str(exc),), label))
            continue
        content = {
            "parameter": param,
            "properties": sorted(p for p, v in mapping.items() if v == param),
            "seeds": sorted(seeds),
            "tainted": sorted(taint.tainted),
            "passes": taint.passes,
            "covered_node_ids": sorted(raw.covered_node_ids),
            "slice": reformat(raw, ctx.ast),
        }
        out.append(AuditThought(f"L3:{parent.thought_id.split(':', 1)[1]}.{param}", 3, parent.thought_id, content, None, (), "sa"))
    return out


def _layer4(ctx: AuditContext, parent: AuditThought):
    tx = TransactionNode.from_document(ctx_lookup(ctx, parent, 1).content)
    mapping = _mapping_of(ctx_lookup(ctx, parent, 2))
    code = parent.content["slice"]
    rules = rules_for_side(tx.side_hint)
    checks = {r.rule_id: RULES[PredicateId(r.rule_id)].checks for r in rules}
    prompt = rule_prompt(RULE, tx.side_hint, parent.content["parameter"], mapping, rules, checks, code)
    context = {"mapping": mapping}
    return _llm_node(
        ctx,
        RULE,
        prompt,
        code,
        lambda f: score_prompt(4, f, code, context),
        "L4:" + parent.thought_id.split(":", 1)[1],
        parent,
        f"rules {tx.entrypoint}:{parent.content['parameter']}",
    )


def _layer5(ctx: AuditContext, parent: AuditThought):
    l3 = ctx_lookup(ctx, parent, 3)
    tx = TransactionNode.from_document(ctx_lookup(ctx, parent, 1).content)
    code = l3.content["slice"]
    verdicts = [
        {k: f[k] for k in ("rule_id", "checklist_item", "status", "snippet")} for f in parent.content["findings"]
    ]
    state = state_context(tx.entrypoint, ctx.ast, ctx.calls)
    hits = retrieve(ctx.kb, code, ctx.cfg.kb_sim, ctx.cfg.top_k, FeatureHashEmbedder(ctx.kb.dims))
    prompt = bypass_prompt(
        BYPASS,
        tx.side_hint,
        l3.content["parameter"],
        verdicts,
        [h.pattern.prompt_view() for h in hits],
        [v.to_document() for v in state.state_vars],
        code,
        ctx.cfg.k_G,
    )
    return _llm_node(
        ctx,
        BYPASS,
        prompt,
        None,
        lambda f: score_prompt(5, f, code),
        "L5:" + parent.thought_id.split(":", 1)[1],
        parent,
        f"bypass {tx.entrypoint}:{l3.content['parameter']}",
    )


def ctx_lookup(ctx: AuditContext, thought: AuditThought, layer: int) -> AuditThought:
    return ctx.graph.ancestor(thought.thought_id, layer)


# ---------------------------------------------------------------- driver


def run_layer(t: int, parents: list, ctx: AuditContext) -> list:
    """Thoughts of layer ``t`` grown from ``parents``; failures land in ``ctx.pruned``."""
    if not 1 <= t <= 5:
        raise ValueError(f"layer must be 1..5, got {t}")
    for p in parents:
        if p.layer != t - 1:
            raise ValueError(f"{p.thought_id} is at layer {p.layer}, expected {t - 1}")
    if t == 1:
        return [th for p in parents for th in _layer1(ctx, p)]
    if t == 3:
        return [th for p in parents for th in _layer3(ctx, p)]
    work = {2: _layer2, 4: _layer4, 5: _layer5}[t]
    workers = max(1, min(len(parents), ctx.cfg.in_flight_cap))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(lambda p: work(ctx, p), parents))
    out = []
    for r in results:
        if isinstance(r, Pruned):
            ctx.pruned.append(r)
        else:
            out.append(r)
    return out


def _root(ast: CanonicalAst) -> AuditThought:
    content = {
        "files": [f.file_id for f in ast.files],
        "contracts": len(ast.contracts),
        "functions": len(ast.functions),
    }
    return AuditThought(ROOT_ID, 0, None, content, None, (), "root")


def run_audit(
    codebase: CanonicalAst,
    cfg: PipelineConfig,
    *,
    kb: Optional[VectorIndex] = None,
    dry_run: bool = False,
    clock: Optional[Callable[[], float]] = None,
    project_id: str = "",
) -> AuditGraph:
    """Run all five layers (or only the static ones with ``dry_run``).

    Provider failures prune the affected node and never abort the audit.
    ``clock`` supplies barrier timestamps; pass ``lambda: 0.0`` for
    byte-stable output.
    """
    cfg.check()
    if not codebase.files:
        raise ValueError("codebase is empty")
    clock = clock or time.perf_counter
    if kb is None:
        kb = load_kb(cfg.kb_path) if cfg.kb_path else seed_kb()
    ctx = AuditContext(codebase, cfg, kb, Runtime(cfg.in_flight_cap))
    ctx.calls = build_call_graph(codebase)
    graph = AuditGraph()
    ctx.graph = graph
    root = _root(codebase)
    graph.add(root)
    frontier = [root]
    timings = {}
    layers = (1, 3) if dry_run else (1, 2, 3, 4, 5)
    for t in range(1, 6):
        start = clock()
        if t in layers:
            frontier = run_layer(t, frontier, ctx)
        elif dry_run and t == 2:
            # no mapping in a dry run: slice every entry parameter instead
            frontier = [_dry_mapping(ctx, p) for p in frontier]
        else:
            frontier = []
        for th in frontier:
            graph.add(th)
        timings[str(t)] = round(clock() - start, 6)
    graph.pruned = ctx.pruned
    graph.meta = {
        "schema_version": GRAPH_SCHEMA_VERSION,
        "project_id": project_id,
        "dry_run": dry_run,
        "diagnostics": ctx.diagnostics,
        "events": ctx.runtime.events,
        "layer_seconds": timings,
        "calls": [r.to_document() for r in sorted(ctx.runtime.records, key=_record_key)],
        "prices": {
            k: {"input_usd_per_mtok": v.input_usd_per_mtok, "output_usd_per_mtok": v.output_usd_per_mtok}
            for k, v in sorted((cfg.price_table or reference_prices()).items())
        },
    }
    return graph


def _record_key(r):
    return (r.layer, r.binding, r.role, r.input_tokens, r.output_tokens, r.estimated, r.ok)


def _dry_mapping(ctx: AuditContext, parent: AuditThought) -> AuditThought:
    tx = TransactionNode.from_document(parent.content)
    params = ctx.ast.functions[tx.entrypoint].param_names
    findings = [{"property_name": p, "parameter_name": p, "code_location": None} for p in params]
    return AuditThought("L2:" + parent.thought_id.split(":", 1)[1], 2, parent.thought_id, {"findings": findings}, None, (), "sa")
