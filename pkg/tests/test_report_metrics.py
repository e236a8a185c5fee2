import json
import math

import pytest
from hypothesis import given, settings, strategies as st

from bridgeaudit.config import config_from_document, offline_config_document
from bridgeaudit.errors import DuplicatePointId
from bridgeaudit.metrics import (
    Adjudication,
    AuditPoint,
    GroundTruth,
    Prediction,
    Price,
    account_usage,
    compute_metrics,
    display2,
    metrics_from_counts,
)
from bridgeaudit.pipeline import run_audit
from bridgeaudit.report import predictions_from_report, render_report, report_document

counts = st.integers(min_value=0, max_value=10_000)


@pytest.mark.parametrize("x,shown", [(0.125, "0.13"), (0.115, "0.12"), (0.8260869565, "0.83"), (1.0, "1.00")])
def test_display_rounds_half_up(x, shown):
    assert display2(x) == shown


def test_zero_denominators_are_flagged():
    m = metrics_from_counts(0, 0, 0)
    assert (m.recall, m.precision, m.f1) == (0.0, 0.0, 0.0)
    assert set(m.flags) == {"empty-input", "recall-undefined", "precision-undefined"}
    with pytest.raises(ValueError):
        metrics_from_counts(-1, 0, 0)


@settings(max_examples=300)
@given(counts, counts, counts)
def test_f1_is_harmonic_mean(tp, fn, fp):
    m = metrics_from_counts(tp, fn, fp)
    assert 0.0 <= m.f1 <= 1.0
    if m.precision + m.recall:
        assert math.isclose(m.f1, 2 * m.precision * m.recall / (m.precision + m.recall), abs_tol=1e-12)
        assert min(m.precision, m.recall) - 1e-12 <= m.f1 <= max(m.precision, m.recall) + 1e-12


def truth():
    return GroundTruth(
        (
            AuditPoint("m1", "mapping", {"entrypoint": "E", "property_name": "amount", "parameter_name": "amt"}),
            AuditPoint("m2", "mapping", {"entrypoint": "E", "property_name": "sender", "parameter_name": None}, allow_none=True),
            AuditPoint("r1", "rule", {"entrypoint": "E", "rule_id": "Ps1", "check_id": "dest_not_current", "status": "missing"}),
        )
    )


def test_compute_metrics_counts():
    preds = [
        Prediction("a", "mapping", {"entrypoint": "E", "property_name": "Amount", "parameter_name": "amt"}),
        Prediction("b", "mapping", {"entrypoint": "E", "property_name": "nonce", "parameter_name": None}),
        Prediction("c", "rule", {"entrypoint": "E", "rule_id": "Ps1", "check_id": "dest_not_current", "status": "implemented"}),
    ]
    m = compute_metrics(preds, truth())
    # m1 hit; m2 and r1 missed; the null mapping asserts nothing; c is wrong
    assert (m.tp, m.fn, m.fp) == (1, 2, 1)
    adj = Adjudication.from_document({"points": {"r1": "tp"}, "predictions": {"c": "tp"}})
    m = compute_metrics(preds, truth(), adjudication=adj)
    assert (m.tp, m.fn, m.fp) == (2, 1, 0)


def test_truth_validation():
    with pytest.raises(DuplicatePointId):
        GroundTruth((AuditPoint("x", "bypass", {}), AuditPoint("x", "bypass", {})))
    with pytest.raises(ValueError):
        GroundTruth((AuditPoint("x", "mapping", {"parameter_name": None}),))
    doc = truth().to_document()
    assert GroundTruth.from_document(doc) == truth()


def records(n, seed=0):
    import random

    rng = random.Random(seed)
    return [
        {"layer": rng.randint(2, 5), "binding": rng.choice("abc"), "input_tokens": rng.randint(0, 900), "output_tokens": rng.randint(0, 300)}
        for _ in range(n)
    ]


@settings(max_examples=100)
@given(st.integers(min_value=0, max_value=60), st.integers(min_value=0, max_value=999))
def test_usage_is_additive(n, seed):
    recs = records(n, seed)
    prices = {"*": Price(0.2, 0.8), "a": Price(3.0, 15.0)}
    cut = seed % (n + 1)
    whole = account_usage(recs)
    parts = account_usage(recs[:cut]) + account_usage(recs[cut:])
    assert parts.per_binding == whole.per_binding
    assert parts.per_layer == whole.per_layer
    assert math.isclose(parts.cost(prices), whole.cost(prices), abs_tol=1e-12)
    assert whole.total.input_tokens == sum(r["input_tokens"] for r in recs)


def test_cost_without_price_is_zero():
    u = account_usage([{"layer": 2, "binding": "x", "input_tokens": 10**6, "output_tokens": 0}])
    assert u.cost({}) == 0.0
    assert u.cost({"x": Price(1.5, 0)}) == 1.5


@pytest.fixture(scope="module")
def report(bridge_ast):
    cfg = config_from_document(offline_config_document())
    return report_document(run_audit(bridge_ast, cfg, clock=lambda: 0.0, project_id="p"))


def test_report_findings_carry_provenance(report):
    for flow in report["transaction_flows"]:
        for f in flow["mappings"]["findings"]:
            assert f["path"][0] == f["thought_id"] and f["path"][-1] == "L0:root"
            assert f["provenance"]
        for p in flow["parameters"]:
            for f in p["bypasses"]["findings"]:
                assert f["severity"] in ("low", "medium", "high", "critical")


def test_report_renders_deterministically(report):
    assert render_report(report) == render_report(json.loads(render_report(report)))
    text = render_report(report, "text").decode()
    assert text.startswith("Audit report p")
    with pytest.raises(ValueError):
        render_report(report, "pdf")


def test_predictions_from_report(report):
    preds = predictions_from_report(report)
    layers = {p.layer for p in preds}
    assert layers == {"mapping", "rule", "bypass"}
    assert len({p.prediction_id for p in preds}) == len(preds)
    rules = [p for p in preds if p.layer == "rule"]
    assert all(p.payload["check_id"] for p in rules)
