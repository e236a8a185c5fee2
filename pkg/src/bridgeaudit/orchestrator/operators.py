"""Generation, aggregation and evaluation over an ensemble of model bindings.

``generate`` asks up to k bindings the same question in parallel and keeps
every answer that validates, re-prompting with the error appended when it
does not. ``aggregate`` merges the surviving answers into one list of
distinct findings. ``evaluate`` has a single evaluator score each finding
and keeps the best one per group, pruning the node when nothing reaches
the confidence threshold.
"""

from __future__ import annotations

import json
import logging
import math
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

from ..errors import AllProducersFailed, EmptyInput, ProviderUnavailable, TransportError
from ..semantic.embed import FeatureHashEmbedder, reaches, similarity
from ..thoughts import AuditThought, Pruned
from .providers import ModelBinding, ProviderResponse, estimate_tokens, prompt_text
from .schemas import SCORE, ErrorReport, LayerSchema, normalize_ws, validate_output

log = logging.getLogger(__name__)

CORRECTION_TEMPLATE = (
    "[System Error]: The previous generation failed with error: {error_msg}. "
    "Please strictly follow the format requirements, ensure the output is valid JSON, "
    "and the required fields contain valid and correct information."
)

DISCARDED = object()


def correction_prompt(original_prompt: str, error_msg: str) -> str:
    return original_prompt + "\n\n" + CORRECTION_TEMPLATE.format(error_msg=error_msg)


# ---------------------------------------------------------------- bookkeeping


@dataclass(frozen=True)
class CallRecord:
    layer: int
    binding: str
    role: str
    input_tokens: int
    output_tokens: int
    estimated: bool
    ok: bool

    def to_document(self) -> dict:
        return {
            "layer": self.layer,
            "binding": self.binding,
            "role": self.role,
            "input_tokens": self.input_tokens,
            "output_tokens": self.output_tokens,
            "estimated": self.estimated,
            "ok": self.ok,
        }


class Runtime:
    """Shared state for one audit: in-flight cap, call records, event log."""

    def __init__(self, in_flight_cap: int = 8):
        if in_flight_cap < 1:
            raise ValueError("in_flight_cap must be at least 1")
        self.in_flight_cap = in_flight_cap
        self._slots = threading.BoundedSemaphore(in_flight_cap)
        self._lock = threading.Lock()
        self.records: list[CallRecord] = []
        self.events: list[str] = []

    def call(self, binding: ModelBinding, prompt: str, layer: int) -> ProviderResponse:
        messages = binding.messages(prompt)
        with self._slots:
            try:
                resp = binding.provider.complete(messages, binding.sampling)
            except (TransportError, ProviderUnavailable):
                self._record(CallRecord(layer, binding.name, binding.role, estimate_tokens(prompt_text(messages)), 0, True, False))
                raise
        estimated = resp.input_tokens is None or resp.output_tokens is None
        tin = resp.input_tokens if resp.input_tokens is not None else estimate_tokens(prompt_text(messages))
        tout = resp.output_tokens if resp.output_tokens is not None else estimate_tokens(resp.text)
        self._record(CallRecord(layer, binding.name, binding.role, tin, tout, estimated, True))
        return resp

    def _record(self, rec: CallRecord) -> None:
        with self._lock:
            self.records.append(rec)

    def event(self, message: str) -> None:
        log.info("%s", message)
        with self._lock:
            self.events.append(message)


# ---------------------------------------------------------------- generation


@dataclass(frozen=True)
class ThoughtCandidate:
    layer: int
    producer: str
    payload: dict
    raw_text: str
    attempts: int = 1
    confidence: Optional[int] = None
    embedding: Optional[tuple] = None

    @property
    def findings(self) -> list:
        return self.payload.get("findings", [])


@dataclass
class Outcome:
    producer: str
    payload: Optional[dict]
    raw_text: str = ""
    attempts: int = 0
    errors: list = field(default_factory=list)


def self_correct(
    binding: ModelBinding,
    original_prompt: str,
    error: ErrorReport,
    attempts_left: int,
    runtime: Optional[Runtime] = None,
    layer: int = 0,
):
    """Re-ask with the error appended; ``DISCARDED`` once the budget is spent."""
    if attempts_left <= 0:
        return DISCARDED
    runtime = runtime or Runtime()
    return runtime.call(binding, correction_prompt(original_prompt, error.message()), layer).text


def produce(
    binding: ModelBinding,
    prompt: str,
    schema: LayerSchema,
    grounding: Optional[str] = None,
    runtime: Optional[Runtime] = None,
    layer: int = 0,
) -> Outcome:
    """Query one binding until its answer validates or its attempts run out.

    Transport failures use up an attempt like invalid answers do.
    """
    runtime = runtime or Runtime()
    out = Outcome(binding.name, None)
    report: Optional[ErrorReport] = None
    while out.attempts < binding.max_attempts:
        out.attempts += 1
        try:
            if report is None:
                text = runtime.call(binding, prompt, layer).text
            else:
                text = self_correct(binding, prompt, report, binding.max_attempts - out.attempts + 1, runtime, layer)
        except (TransportError, ProviderUnavailable) as exc:
            out.errors.append(f"attempt {out.attempts}: {exc}")
            continue
        result = validate_output(text, schema, grounding)
        if result.ok:
            out.payload = result.payload
            out.raw_text = text
            return out
        report = result
        out.errors.append(f"attempt {out.attempts}: {report.message()}")
    return out


def generate(
    prompt: str,
    ensemble: Sequence[ModelBinding],
    k: int,
    schema: LayerSchema,
    grounding: Optional[str] = None,
    runtime: Optional[Runtime] = None,
    label: str = "",
) -> list[ThoughtCandidate]:
    """Up to ``k`` validated candidates, in ensemble order."""
    if k < 1:
        raise ValueError("k must be at least 1")
    if len(ensemble) < k:
        raise ValueError(f"ensemble has {len(ensemble)} bindings, need {k}")
    runtime = runtime or Runtime()
    bindings = list(ensemble)[:k]
    with ThreadPoolExecutor(max_workers=k) as pool:
        outcomes = list(pool.map(lambda b: produce(b, prompt, schema, grounding, runtime, schema.layer), bindings))
    candidates = []
    for o in outcomes:
        if o.payload is None:
            runtime.event(f"{label or schema.name}: discarded {o.producer} after {o.attempts} attempts")
            continue
        candidates.append(ThoughtCandidate(schema.layer, o.producer, o.payload, o.raw_text, o.attempts))
    if not candidates:
        raise AllProducersFailed(f"{label or schema.name}: no producer returned a valid answer")
    return candidates


# ---------------------------------------------------------------- aggregation


@dataclass
class MergedFinding:
    payload: dict
    provenance: list


@dataclass
class MergedThought:
    layer: int
    findings: list
    producers: list
    dropped: list = field(default_factory=list)

    @property
    def provenance(self) -> list:
        return self.producers


def finding_text(finding: dict) -> str:
    """Stable prose view of a finding used for similarity."""
    parts = []
    for key in sorted(finding):
        value = finding[key]
        if isinstance(value, list):
            value = " ".join(str(v) for v in value)
        parts.append(f"{key}: {'' if value is None else value}")
    return "\n".join(parts)


def _structural_key(finding: dict) -> str:
    def norm(v):
        if isinstance(v, str):
            return normalize_ws(v).lower()
        if isinstance(v, list):
            return [norm(x) for x in v]
        return v

    return json.dumps({k: norm(v) for k, v in finding.items()}, sort_keys=True)


def default_similarity() -> Callable[[str, str], float]:
    embedder = FeatureHashEmbedder()
    cache: dict[str, object] = {}
    lock = threading.Lock()

    def sim(a: str, b: str) -> float:
        with lock:
            for t in (a, b):
                if t not in cache:
                    cache[t] = embedder.embed(t)
            return similarity(cache[a], cache[b])

    return sim


def aggregate(
    candidates: Sequence[ThoughtCandidate],
    sim: Optional[Callable[[str, str], float]] = None,
    threshold: float = 0.85,
    schema: Optional[LayerSchema] = None,
) -> MergedThought:
    """Union of distinct findings across candidates with merged provenance.

    Identical findings (after whitespace/case normalization) merge first;
    then a finding merges into an earlier one of the same merge group when
    their similarity reaches ``threshold``. Candidates with no findings are
    dropped.
    """
    if not candidates:
        raise EmptyInput("aggregate needs at least one candidate")
    layers = {c.layer for c in candidates}
    if len(layers) != 1:
        raise ValueError(f"candidates span layers {sorted(layers)}")
    sim = sim or default_similarity()
    merge_fields = schema.merge_fields if schema is not None else ()
    merged: list[MergedFinding] = []
    keys: list[str] = []
    producers: list[str] = []
    dropped: list[str] = []
    for cand in candidates:
        if not cand.findings:
            dropped.append(cand.producer)
            continue
        if cand.producer not in producers:
            producers.append(cand.producer)
        for f in cand.findings:
            key = _structural_key(f)
            target = None
            if key in keys:
                target = merged[keys.index(key)]
            else:
                group = tuple(f.get(x) for x in merge_fields)
                text = finding_text(f)
                for m in merged:
                    if tuple(m.payload.get(x) for x in merge_fields) == group and reaches(sim(text, finding_text(m.payload)), threshold):
                        target = m
                        break
            if target is None:
                merged.append(MergedFinding(dict(f), [cand.producer]))
                keys.append(key)
            elif cand.producer not in target.provenance:
                target.provenance.append(cand.producer)
    return MergedThought(candidates[0].layer, merged, producers, dropped)


# ---------------------------------------------------------------- evaluation


def evaluate(
    merged: MergedThought,
    evaluator: ModelBinding,
    threshold: int,
    score_prompt: Callable[[dict], str],
    schema: Optional[LayerSchema] = None,
    runtime: Optional[Runtime] = None,
    thought_id: str = "",
    parent_id: Optional[str] = None,
    label: str = "",
):
    """Score each finding independently and keep the best per group.

    Returns an :class:`AuditThought` whose findings carry their scores, or a
    :class:`Pruned` marker when no group winner reaches ``threshold`` or the
    evaluator cannot produce a valid score.
    """
    runtime = runtime or Runtime()
    if not merged.findings:
        return Pruned(parent_id or "", merged.layer, "no findings to evaluate", None, tuple(merged.dropped), label)
    scores: list[int] = []
    for mf in merged.findings:
        outcome = produce(evaluator, score_prompt(mf.payload), SCORE, None, runtime, merged.layer)
        if outcome.payload is None:
            runtime.event(f"{label}: evaluator failed ({'; '.join(outcome.errors)})")
            return Pruned(parent_id or "", merged.layer, "EvaluatorFailed", None, tuple(outcome.errors), label)
        scores.append(int(outcome.payload["score"]))
    select = schema.select_fields if schema is not None else ()
    winners: dict[tuple, int] = {}
    for i, mf in enumerate(merged.findings):
        group = tuple(mf.payload.get(x) for x in select)
        if group not in winners or scores[i] > scores[winners[group]]:
            winners[group] = i
    kept = sorted(i for i in winners.values() if scores[i] >= threshold)
    best = max(scores)
    if not kept:
        return Pruned(parent_id or "", merged.layer, f"best score {best} below threshold {threshold}", best, (), label)
    findings = []
    provenance: list[str] = []
    for i in kept:
        mf = merged.findings[i]
        findings.append({**mf.payload, "score": scores[i], "provenance": list(mf.provenance)})
        provenance += [p for p in mf.provenance if p not in provenance]
    order = {p: n for n, p in enumerate(merged.producers)}
    provenance.sort(key=lambda p: order.get(p, math.inf))
    return AuditThought(
        thought_id=thought_id,
        layer=merged.layer,
        parent_id=parent_id,
        content={"findings": findings},
        score=max(scores[i] for i in kept),
        provenance=tuple(provenance),
    )
