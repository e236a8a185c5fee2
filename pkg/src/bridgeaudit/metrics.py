"""Benchmark metrics and token/cost accounting.

Recall is TP/(TP+FN), precision TP/(TP+FP), and F1 their harmonic mean.
A zero denominator yields 0 and raises a flag instead of failing. Values
are kept at full precision, with a two-decimal display field rounded half
up, which is how benchmark tables usually print them.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path
from typing import Callable, Iterable, Optional, Sequence, Union

from .errors import ConfigError, DuplicatePointId
from .orchestrator.schemas import normalize_ws

LAYER_NAMES = ("mapping", "rule", "bypass")


def display2(x: float) -> str:
    return str(Decimal(repr(x)).quantize(Decimal("0.01"), rounding=ROUND_HALF_UP))


@dataclass(frozen=True)
class Metrics:
    tp: int
    fn: int
    fp: int
    recall: float
    precision: float
    f1: float
    flags: tuple = ()

    @property
    def display(self) -> dict:
        return {"recall": display2(self.recall), "precision": display2(self.precision), "f1": display2(self.f1)}

    def to_document(self) -> dict:
        return {
            "tp": self.tp,
            "fn": self.fn,
            "fp": self.fp,
            "recall": self.recall,
            "precision": self.precision,
            "f1": self.f1,
            "display": self.display,
            "flags": list(self.flags),
        }


def metrics_from_counts(tp: int, fn: int, fp: int) -> Metrics:
    if min(tp, fn, fp) < 0:
        raise ValueError("counts must be non-negative")
    flags = []
    if tp + fn + fp == 0:
        flags.append("empty-input")
    recall = tp / (tp + fn) if tp + fn else 0.0
    precision = tp / (tp + fp) if tp + fp else 0.0
    if tp + fn == 0:
        flags.append("recall-undefined")
    if tp + fp == 0:
        flags.append("precision-undefined")
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return Metrics(tp, fn, fp, recall, precision, f1, tuple(flags))


# ---------------------------------------------------------------- ground truth


@dataclass(frozen=True)
class AuditPoint:
    point_id: str
    layer: str
    expected: dict
    allow_none: bool = False


@dataclass(frozen=True)
class GroundTruth:
    points: tuple
    project_id: str = ""

    def __post_init__(self):
        seen = set()
        for p in self.points:
            if p.point_id in seen:
                raise DuplicatePointId(p.point_id)
            seen.add(p.point_id)
            if p.layer not in LAYER_NAMES:
                raise ValueError(f"{p.point_id}: unknown layer {p.layer!r}")
            if not p.allow_none and any(v is None for v in p.expected.values()):
                raise ValueError(f"{p.point_id}: expects None but allow_none is false")

    @classmethod
    def from_document(cls, doc: dict) -> "GroundTruth":
        points = tuple(
            AuditPoint(p["point_id"], p["layer"], dict(p["expected"]), bool(p.get("allow_none", False)))
            for p in doc["points"]
        )
        return cls(points, doc.get("project_id", ""))

    def to_document(self) -> dict:
        return {
            "schema_version": "1",
            "project_id": self.project_id,
            "points": [
                {"point_id": p.point_id, "layer": p.layer, "expected": p.expected, "allow_none": p.allow_none}
                for p in self.points
            ],
        }


@dataclass(frozen=True)
class Prediction:
    prediction_id: str
    layer: str
    payload: dict

    @property
    def asserts_nothing(self) -> bool:
        """A mapping to no parameter claims nothing that could be wrong on its own."""
        return self.layer == "mapping" and self.payload.get("parameter_name") is None


Matcher = Callable[[AuditPoint, Prediction], bool]


def _norm(v):
    return normalize_ws(v).lower() if isinstance(v, str) else v


def exact_matcher(point: AuditPoint, pred: Prediction) -> bool:
    """Every expected field equals the predicted one (strings compared loosely)."""
    if point.layer != pred.layer:
        return False
    for key, want in point.expected.items():
        if key not in pred.payload:
            return False
        if _norm(pred.payload[key]) != _norm(want):
            return False
    return True


@dataclass(frozen=True)
class Adjudication:
    """Expert overrides: force a point to TP/FN, or a prediction to TP/FP."""

    points: dict = field(default_factory=dict)
    predictions: dict = field(default_factory=dict)

    @classmethod
    def from_document(cls, doc: dict) -> "Adjudication":
        pts = doc.get("points", {})
        preds = doc.get("predictions", {})
        for k, v in pts.items():
            if v not in ("tp", "fn"):
                raise ConfigError(f"adjudication for point {k} must be 'tp' or 'fn'")
        for k, v in preds.items():
            if v not in ("tp", "fp"):
                raise ConfigError(f"adjudication for prediction {k} must be 'tp' or 'fp'")
        return cls(dict(pts), dict(preds))


def compute_metrics(
    predictions: Sequence[Prediction],
    truth: GroundTruth,
    matcher: Matcher = exact_matcher,
    adjudication: Optional[Adjudication] = None,
) -> Metrics:
    """Count hits of ``predictions`` against ``truth``.

    A point is a TP when at least one prediction matches it, else an FN.
    A prediction matching no point is an FP, except mappings to no
    parameter. Adjudication verdicts override the mechanical ones.
    """
    adj = adjudication or Adjudication()
    matched_preds = set()
    tp = fn = 0
    for point in truth.points:
        hits = [p.prediction_id for p in predictions if matcher(point, p)]
        matched_preds.update(hits)
        verdict = adj.points.get(point.point_id, "tp" if hits else "fn")
        if verdict == "tp":
            tp += 1
        else:
            fn += 1
    fp = 0
    for p in predictions:
        verdict = adj.predictions.get(p.prediction_id)
        if verdict is None:
            verdict = "tp" if (p.prediction_id in matched_preds or p.asserts_nothing) else "fp"
        fp += verdict == "fp"
    return metrics_from_counts(tp, fn, fp)


def load_truth(path: Union[str, Path]) -> GroundTruth:
    return GroundTruth.from_document(json.loads(Path(path).read_text(encoding="utf-8")))


# ---------------------------------------------------------------- usage


@dataclass(frozen=True)
class Price:
    input_usd_per_mtok: float
    output_usd_per_mtok: float


@dataclass(frozen=True)
class BindingUsage:
    calls: int = 0
    failed_calls: int = 0
    estimated_calls: int = 0
    input_tokens: int = 0
    output_tokens: int = 0

    def __add__(self, other: "BindingUsage") -> "BindingUsage":
        return BindingUsage(
            self.calls + other.calls,
            self.failed_calls + other.failed_calls,
            self.estimated_calls + other.estimated_calls,
            self.input_tokens + other.input_tokens,
            self.output_tokens + other.output_tokens,
        )

    def to_document(self) -> dict:
        return {
            "calls": self.calls,
            "failed_calls": self.failed_calls,
            "estimated_calls": self.estimated_calls,
            "input_tokens": self.input_tokens,
            "output_tokens": self.output_tokens,
        }


def _add_maps(a: dict, b: dict, zero) -> dict:
    return {k: a.get(k, zero) + b.get(k, zero) for k in sorted(set(a) | set(b))}


@dataclass(frozen=True)
class UsageSummary:
    """Token totals per binding and per layer, wall time per layer.

    Cost is computed on demand from a price table so that summaries stay
    additive: ``(a + b).cost(p) == a.cost(p) + b.cost(p)``.
    """

    per_binding: dict = field(default_factory=dict)
    per_layer: dict = field(default_factory=dict)
    layer_seconds: dict = field(default_factory=dict)

    def __add__(self, other: "UsageSummary") -> "UsageSummary":
        return UsageSummary(
            _add_maps(self.per_binding, other.per_binding, BindingUsage()),
            _add_maps(self.per_layer, other.per_layer, BindingUsage()),
            _add_maps(self.layer_seconds, other.layer_seconds, 0.0),
        )

    @property
    def total(self) -> BindingUsage:
        out = BindingUsage()
        for u in self.per_binding.values():
            out = out + u
        return out

    def binding_cost(self, name: str, prices: dict) -> float:
        price = prices.get(name) or prices.get("*")
        if price is None:
            return 0.0
        u = self.per_binding[name]
        return (u.input_tokens * price.input_usd_per_mtok + u.output_tokens * price.output_usd_per_mtok) / 1e6

    def cost(self, prices: dict) -> float:
        return math.fsum(self.binding_cost(n, prices) for n in self.per_binding)

    def to_document(self, prices: Optional[dict] = None) -> dict:
        prices = prices or {}
        total = self.total
        cost = self.cost(prices)
        return {
            "per_binding": {
                n: {**u.to_document(), "cost_usd": round(self.binding_cost(n, prices), 9)}
                for n, u in sorted(self.per_binding.items())
            },
            "per_layer": {str(k): u.to_document() for k, u in sorted(self.per_layer.items())},
            "layer_seconds": {str(k): v for k, v in sorted(self.layer_seconds.items())},
            "total": {**total.to_document(), "cost_usd": round(cost, 9), "cost_display": "$" + display2(cost)},
        }


def _record_fields(r) -> tuple:
    if isinstance(r, dict):
        return r["layer"], r["binding"], r["input_tokens"], r["output_tokens"], r.get("estimated", False), r.get("ok", True)
    return r.layer, r.binding, r.input_tokens, r.output_tokens, r.estimated, r.ok


def account_usage(records: Iterable, layer_seconds: Optional[dict] = None) -> UsageSummary:
    """Exact token sums over call records (objects or their documents)."""
    per_binding: dict = {}
    per_layer: dict = {}
    for r in records:
        layer, binding, tin, tout, estimated, ok = _record_fields(r)
        u = BindingUsage(1, 0 if ok else 1, 1 if estimated else 0, tin, tout)
        per_binding[binding] = per_binding.get(binding, BindingUsage()) + u
        per_layer[layer] = per_layer.get(layer, BindingUsage()) + u
    seconds = {int(k): float(v) for k, v in (layer_seconds or {}).items()}
    return UsageSummary(dict(sorted(per_binding.items())), dict(sorted(per_layer.items())), dict(sorted(seconds.items())))


def prices_from_document(doc: dict) -> dict:
    return {k: Price(float(v["input_usd_per_mtok"]), float(v["output_usd_per_mtok"])) for k, v in doc.items()}


def reference_prices() -> dict:
    """Bundled blended price table (USD per million tokens)."""
    from importlib import resources

    doc = json.loads(resources.files("bridgeaudit.data").joinpath("price_table.json").read_text(encoding="utf-8"))
    return prices_from_document(doc["prices"])
