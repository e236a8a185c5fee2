"""Command-line entry point.

Exit codes: 0 success, 1 audit finished with at least one bypass,
2 usage error, 3 runtime error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional

from .callgraph import EventPattern, build_call_graph, extract_transaction_nodes, forward_closure
from .config import CACHE_ENV, config_from_document, load_config, offline_config_document
from .errors import AuditError, ConfigError
from .frontend.loader import load_codebase
from .fsutil import atomic_write_bytes
from .metrics import Adjudication, compute_metrics, load_truth
from .orchestrator.providers import cache_entries
from .pipeline import run_audit
from .report import predictions_from_report, render_report, report_document
from .semantic.kb import build_kb, load_kb, load_pattern_sources, retrieve, save_kb
from .taint import propagate_taint, reformat, resolve_seed_names, slice_scope
from .thoughts import AuditGraph

EXIT_OK, EXIT_FINDINGS, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2, 3


def _emit(data: bytes, out: Optional[str]) -> None:
    if out:
        atomic_write_bytes(Path(out), data)
    else:
        sys.stdout.buffer.write(data)
        sys.stdout.flush()


def _json_bytes(doc) -> bytes:
    return (json.dumps(doc, indent=2, sort_keys=True, ensure_ascii=False) + "\n").encode("utf-8")


def _event_pattern(text: str) -> EventPattern:
    regex, sep, side = text.rpartition(":")
    if not sep or side not in ("source", "destination", "unknown"):
        raise argparse.ArgumentTypeError(f"expected REGEX:SIDE with side source|destination|unknown, got {text!r}")
    return EventPattern(regex, side)


# ---------------------------------------------------------------- subcommands


def cmd_audit(args) -> int:
    if args.config:
        cfg = load_config(args.config)
    else:
        cfg = config_from_document(offline_config_document())
    overrides = {
        k: v
        for k, v in (
            ("k_G", args.k_g),
            ("confidence_threshold", args.confidence_threshold),
            ("prune_sim", args.prune_sim),
            ("kb_sim", args.kb_sim),
            ("top_k", args.top_k),
            ("in_flight_cap", args.in_flight_cap),
        )
        if v is not None
    }
    if args.event_pattern:
        overrides["event_patterns"] = list(args.event_pattern)
    if overrides:
        cfg = replace(cfg, **overrides)
    if args.replay_cache:
        cfg = cfg.with_cache(args.replay_cache)
    kb = load_kb(args.kb) if args.kb else None
    ast = load_codebase(args.codebase)
    deterministic = bool(args.replay_cache or cfg.cache_dir)
    graph = run_audit(
        ast,
        cfg,
        kb=kb,
        dry_run=args.dry_run,
        clock=(lambda: 0.0) if deterministic else None,
        project_id=args.project_id or Path(args.codebase).name,
    )
    doc = report_document(graph)
    out = Path(args.out)
    atomic_write_bytes(out / "graph.json", _json_bytes(graph.to_document()))
    atomic_write_bytes(out / "report.json", render_report(doc, "document"))
    atomic_write_bytes(out / "report.txt", render_report(doc, "text"))
    if args.format == "text":
        sys.stdout.write(render_report(doc, "text").decode("utf-8"))
    else:
        sys.stdout.write(json.dumps(doc["summary"], sort_keys=True) + "\n")
    return EXIT_FINDINGS if doc["summary"]["bypasses"] else EXIT_OK


def cmd_extract(args) -> int:
    ast = load_codebase(args.codebase)
    diags: list = []
    nodes = extract_transaction_nodes(ast, args.event_pattern or None, diagnostics=diags)
    if args.format == "text":
        lines = [f"{n.entrypoint} [{n.side_hint}] {n.anchor_event}: {len(n.members)} functions" for n in nodes]
        lines += [f"note: {d}" for d in diags]
        _emit(("\n".join(lines) + "\n").encode("utf-8"), args.out)
    else:
        _emit(_json_bytes({"nodes": [n.to_document() for n in nodes], "diagnostics": [str(d) for d in diags]}), args.out)
    return EXIT_OK


def cmd_slice(args) -> int:
    ast = load_codebase(args.codebase)
    graph = build_call_graph(ast)
    scope = graph.sorted_ids(forward_closure(graph, args.entrypoint))
    seeds = resolve_seed_names(ast, scope, args.param, entry=args.entrypoint)
    taint = propagate_taint(ast, scope, seeds)
    text = reformat(slice_scope(ast, scope, taint), ast)
    if args.format == "text":
        _emit(text.encode("utf-8"), args.out)
    else:
        _emit(_json_bytes({"entrypoint": args.entrypoint, "seeds": sorted(seeds), "tainted": sorted(taint.tainted), "passes": taint.passes, "slice": text}), args.out)
    return EXIT_OK


def cmd_kb_build(args) -> int:
    save_kb(build_kb(load_pattern_sources(args.patterns)), args.out)
    return EXIT_OK


def cmd_kb_query(args) -> int:
    query = Path(args.query_file).read_text(encoding="utf-8") if args.query_file else args.query
    if query is None:
        raise ConfigError("kb query needs --query or --query-file")
    hits = retrieve(load_kb(args.kb), query, args.threshold, args.top_k)
    if args.format == "text":
        _emit("".join(f"{h.score:.4f} {h.pattern.pattern_id} {h.pattern.title}\n" for h in hits).encode("utf-8"), None)
    else:
        _emit(_json_bytes([{"pattern_id": h.pattern.pattern_id, "title": h.pattern.title, "score": h.score} for h in hits]), None)
    return EXIT_OK


def cmd_eval(args) -> int:
    report = json.loads(Path(args.report).read_text(encoding="utf-8"))
    truth = load_truth(args.truth)
    adj = None
    if args.adjudication:
        adj = Adjudication.from_document(json.loads(Path(args.adjudication).read_text(encoding="utf-8")))
    m = compute_metrics(predictions_from_report(report), truth, adjudication=adj)
    if args.format == "text":
        d = m.display
        text = f"tp {m.tp} fn {m.fn} fp {m.fp}\nrecall {d['recall']}\nprecision {d['precision']}\nf1 {d['f1']}\n"
        _emit(text.encode("utf-8"), args.out)
    else:
        _emit(_json_bytes(m.to_document()), args.out)
    return EXIT_OK


def cmd_report_render(args) -> int:
    doc = json.loads(Path(args.graph).read_text(encoding="utf-8"))
    source = doc if "transaction_flows" in doc else AuditGraph.from_document(doc)
    _emit(render_report(source, args.format), args.out)
    return EXIT_OK


def cmd_config_validate(args) -> int:
    cfg = load_config(args.config)
    sys.stdout.write(f"ok: {len(cfg.ensemble)} generators, evaluator {cfg.evaluator.name}, k_G {cfg.k_G}\n")
    return EXIT_OK


def _cache_dir(args) -> Path:
    d = args.dir or os.environ.get(CACHE_ENV)
    if not d:
        raise ConfigError(f"no cache directory: pass --dir or set {CACHE_ENV}")
    return Path(d)


def cmd_cache_list(args) -> int:
    for p in cache_entries(_cache_dir(args)):
        doc = json.loads(p.read_text(encoding="utf-8"))
        sys.stdout.write(f"{p.stem[:16]} {doc['binding']}\n")
    return EXIT_OK


def cmd_cache_clear(args) -> int:
    root = _cache_dir(args)
    entries = cache_entries(root)
    for p in entries:
        p.unlink()
    for d in sorted({p.parent for p in entries}):
        if d != root and not any(d.iterdir()):
            d.rmdir()
    sys.stdout.write(f"removed {len(entries)} entries\n")
    return EXIT_OK


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bridgeaudit", description="Layered security audit of cross-chain bridge contracts.")
    p.add_argument("--verbose", action="store_true", help="log progress to standard error")
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def fmt(sp, default="document"):
        sp.add_argument("--format", choices=("document", "text"), default=default, help="output format")

    a = sub.add_parser("audit", help="run the full five-layer audit")
    a.add_argument("--codebase", required=True, help="directory of .sol / .ast.json files")
    a.add_argument("--out", required=True, help="output directory for graph.json, report.json, report.txt")
    a.add_argument("--config", help="pipeline config JSON (default: offline rule-based ensemble)")
    a.add_argument("--kb", help="knowledge base built with 'kb build' (default: bundled seed patterns)")
    a.add_argument("--replay-cache", help="record/replay provider responses in this directory; fixes timestamps")
    a.add_argument("--dry-run", action="store_true", help="static layers only, no provider calls")
    a.add_argument("--project-id")
    a.add_argument("--event-pattern", action="append", type=_event_pattern, metavar="REGEX:SIDE")
    a.add_argument("--k-g", type=int, dest="k_g", help="generators per node")
    a.add_argument("--confidence-threshold", type=int)
    a.add_argument("--prune-sim", type=float)
    a.add_argument("--kb-sim", type=float)
    a.add_argument("--top-k", type=int)
    a.add_argument("--in-flight-cap", type=int)
    fmt(a)
    a.set_defaults(func=cmd_audit)

    e = sub.add_parser("extract", help="list transaction nodes (layer 1)")
    e.add_argument("--codebase", required=True)
    e.add_argument("--event-pattern", action="append", type=_event_pattern, metavar="REGEX:SIDE")
    e.add_argument("--out")
    fmt(e)
    e.set_defaults(func=cmd_extract)

    s = sub.add_parser("slice", help="taint slice of one entrypoint for given parameters")
    s.add_argument("--codebase", required=True)
    s.add_argument("--entrypoint", required=True, help="qualified id, e.g. Router.sol::Router::relay")
    s.add_argument("--param", action="append", required=True, help="seed name (repeatable)")
    s.add_argument("--out")
    fmt(s, "text")
    s.set_defaults(func=cmd_slice)

    kb = sub.add_parser("kb", help="bypass knowledge base")
    kbs = kb.add_subparsers(dest="kb_command", required=True, metavar="ACTION")
    kbb = kbs.add_parser("build", help="embed pattern sources into an index file")
    kbb.add_argument("--patterns", required=True)
    kbb.add_argument("--out", required=True)
    kbb.set_defaults(func=cmd_kb_build)
    kbq = kbs.add_parser("query", help="retrieve patterns for a code snippet")
    kbq.add_argument("--kb", required=True)
    kbq.add_argument("--query")
    kbq.add_argument("--query-file")
    kbq.add_argument("--threshold", type=float, default=0.5)
    kbq.add_argument("--top-k", type=int, default=3)
    fmt(kbq)
    kbq.set_defaults(func=cmd_kb_query)

    ev = sub.add_parser("eval", help="score a report against ground truth")
    ev.add_argument("--report", required=True)
    ev.add_argument("--truth", required=True)
    ev.add_argument("--adjudication")
    ev.add_argument("--out")
    fmt(ev, "text")
    ev.set_defaults(func=cmd_eval)

    r = sub.add_parser("report", help="report utilities")
    rs = r.add_subparsers(dest="report_command", required=True, metavar="ACTION")
    rr = rs.add_parser("render", help="render a graph.json or report.json")
    rr.add_argument("--graph", required=True)
    rr.add_argument("--out")
    fmt(rr, "text")
    rr.set_defaults(func=cmd_report_render)

    c = sub.add_parser("config", help="configuration utilities")
    cs = c.add_subparsers(dest="config_command", required=True, metavar="ACTION")
    cv = cs.add_parser("validate", help="check a config file")
    cv.add_argument("--config", required=True)
    cv.set_defaults(func=cmd_config_validate)

    ca = sub.add_parser("cache", help="replay cache management")
    cas = ca.add_subparsers(dest="cache_command", required=True, metavar="ACTION")
    for name, func in (("list", cmd_cache_list), ("clear", cmd_cache_clear)):
        x = cas.add_parser(name, help=f"{name} cached transcripts")
        x.add_argument("--dir", help=f"cache directory (default ${CACHE_ENV})")
        x.set_defaults(func=func)
    return p


def main(argv: Optional[list] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr)
    try:
        return args.func(args)
    except (AuditError, OSError, ValueError, KeyError) as exc:
        sys.stderr.write(f"bridgeaudit: error: {exc}\n")
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
