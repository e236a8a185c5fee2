"""Audit report assembly from an audit graph.

The report groups everything by transaction flow: the property mapping,
then per mapped parameter its slice summary, rule verdicts and bypasses.
Every finding carries the id of the thought it came from, the path from
that thought to the root, and the producers behind it. Both output formats
are pure functions of the graph.
"""

from __future__ import annotations

import json
from typing import Union

from .metrics import Prediction, account_usage, prices_from_document
from .predicates import check_for_item
from .thoughts import AuditGraph, AuditThought

REPORT_SCHEMA_VERSION = "1"


def _findings(graph: AuditGraph, thought: AuditThought) -> dict:
    path = graph.path_to_root(thought.thought_id)
    return {
        "thought_id": thought.thought_id,
        "score": thought.score,
        "provenance": list(thought.provenance),
        "findings": [{**f, "thought_id": thought.thought_id, "path": path} for f in thought.content["findings"]],
    }


def _only_child(graph: AuditGraph, thought: AuditThought):
    kids = graph.children(thought.thought_id)
    return kids[0] if kids else None


def _parameter_section(graph: AuditGraph, l3: AuditThought) -> dict:
    c = l3.content
    l4 = _only_child(graph, l3)
    l5 = _only_child(graph, l4) if l4 is not None else None
    return {
        "parameter": c["parameter"],
        "properties": c["properties"],
        "slice": {
            "thought_id": l3.thought_id,
            "tainted_keys": len(c["tainted"]),
            "passes": c["passes"],
            "statements": len(c["covered_node_ids"]),
            "text": c["slice"],
        },
        "rule_findings": _findings(graph, l4) if l4 is not None else None,
        "bypasses": _findings(graph, l5) if l5 is not None else None,
    }


def _flow(graph: AuditGraph, l1: AuditThought) -> dict:
    tx = l1.content
    l2 = _only_child(graph, l1)
    return {
        "thought_id": l1.thought_id,
        "anchor_event": tx["anchor_event"],
        "anchor_function": tx["anchor_function"],
        "entrypoint": tx["entrypoint"],
        "side_hint": tx["side_hint"],
        "members": tx["members"],
        "mappings": _findings(graph, l2) if l2 is not None and l2.kind == "llm" else None,
        "parameters": [_parameter_section(graph, t) for t in graph.children(l2.thought_id)] if l2 is not None else [],
    }


def report_document(graph: AuditGraph) -> dict:
    meta = graph.meta
    prices = prices_from_document(meta.get("prices", {}))
    usage = account_usage(meta.get("calls", []), meta.get("layer_seconds"))
    flows = [_flow(graph, t) for t in graph.layer(1)]
    doc = {
        "schema_version": REPORT_SCHEMA_VERSION,
        "project_id": meta.get("project_id", ""),
        "dry_run": bool(meta.get("dry_run", False)),
        "summary": {
            "transaction_flows": len(flows),
            "slices": len(graph.layer(3)),
            "rule_nodes": len(graph.layer(4)),
            "bypass_nodes": len(graph.layer(5)),
            "bypasses": sum(len(t.content["findings"]) for t in graph.layer(5)),
            "missing_checks": sum(
                1 for t in graph.layer(4) for f in t.content["findings"] if f["status"] == "missing"
            ),
            "pruned": len(graph.pruned),
        },
        "transaction_flows": flows,
        "pruned_subtrees": [p.to_document() for p in graph.pruned],
        "diagnostics": list(meta.get("diagnostics", [])),
        "events": list(meta.get("events", [])),
        "usage": usage.to_document(prices),
    }
    if not flows:
        doc["diagnostics"].append("zero transaction nodes")
    return doc


# ---------------------------------------------------------------- text


def _text(doc: dict) -> str:
    out = [f"Audit report {doc['project_id'] or '(unnamed project)'}", ""]
    s = doc["summary"]
    out.append(
        f"{s['transaction_flows']} transaction flows, {s['slices']} parameter slices, "
        f"{s['missing_checks']} missing checks, {s['bypasses']} bypasses, {s['pruned']} pruned nodes"
    )
    for flow in doc["transaction_flows"]:
        out += ["", f"== {flow['entrypoint']} [{flow['side_hint']}] emits {flow['anchor_event']}"]
        m = flow["mappings"]
        if m is not None:
            for f in m["findings"]:
                out.append(f"  map {f['property_name']:<13} -> {f['parameter_name'] or '-'} ({f['score']})")
        for p in flow["parameters"]:
            out.append(f"  -- parameter {p['parameter']} ({p['slice']['statements']} statements in slice)")
            r = p["rule_findings"]
            if r is not None:
                for f in r["findings"]:
                    out.append(f"     [{f['status']:<11}] {f['rule_id']}: {f['checklist_item']}")
            b = p["bypasses"]
            if b is not None:
                for f in b["findings"]:
                    out.append(f"     BYPASS {f['severity'].upper()} ({f['score']}): {f['bypass_title']}")
                    for i, step in enumerate(f["steps"], 1):
                        out.append(f"        {i}. {step}")
    if doc["pruned_subtrees"]:
        out += ["", "Pruned:"]
        for p in doc["pruned_subtrees"]:
            out.append(f"  L{p['layer']} under {p['parent_id']} ({p['label']}): {p['reason']}")
    for d in doc["diagnostics"]:
        out.append(f"note: {d}")
    t = doc["usage"]["total"]
    out += [
        "",
        f"usage: {t['calls']} calls, {t['input_tokens']} input / {t['output_tokens']} output tokens, cost {t['cost_display']}",
    ]
    return "\n".join(out) + "\n"


def render_report(graph: Union[AuditGraph, dict], fmt: str = "document") -> bytes:
    """``document``: indented JSON; ``text``: a plain listing."""
    doc = graph if isinstance(graph, dict) else report_document(graph)
    if fmt == "document":
        return (json.dumps(doc, indent=2, sort_keys=True, ensure_ascii=False) + "\n").encode("utf-8")
    if fmt == "text":
        return _text(doc).encode("utf-8")
    raise ValueError(f"unknown report format {fmt!r}")


# ---------------------------------------------------------------- re-ingestion


def predictions_from_report(doc: dict) -> list[Prediction]:
    """Flatten a report document into the predictions the evaluator scores."""
    out = []
    for flow in doc["transaction_flows"]:
        entry = flow["entrypoint"]
        if flow["mappings"] is not None:
            for i, f in enumerate(flow["mappings"]["findings"]):
                payload = {"entrypoint": entry, **{k: f[k] for k in ("property_name", "parameter_name")}}
                out.append(Prediction(f"{f['thought_id']}#{i}", "mapping", payload))
        for p in flow["parameters"]:
            for key, layer, fields in (
                ("rule_findings", "rule", ("rule_id", "checklist_item", "status")),
                ("bypasses", "bypass", ("bypass_title", "severity")),
            ):
                sec = p[key]
                if sec is None:
                    continue
                for i, f in enumerate(sec["findings"]):
                    payload = {"entrypoint": entry, "parameter": p["parameter"], **{k: f[k] for k in fields}}
                    if layer == "rule":
                        payload["check_id"] = check_for_item(f["rule_id"], f["checklist_item"])
                    out.append(Prediction(f"{f['thought_id']}#{i}", layer, payload))
    return out
