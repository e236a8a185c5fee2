import json
import threading
import time

import httpx
import pytest
from hypothesis import given, settings, strategies as st

from bridgeaudit.errors import AllProducersFailed, EmptyInput, ProviderUnavailable, TransportError
from bridgeaudit.orchestrator.heuristic import HeuristicProvider
from bridgeaudit.orchestrator.operators import (
    DISCARDED,
    MergedFinding,
    MergedThought,
    Runtime,
    ThoughtCandidate,
    aggregate,
    correction_prompt,
    evaluate,
    generate,
    produce,
    self_correct,
)
from bridgeaudit.orchestrator.prompts import mapping_prompt, parse_code, parse_task, score_prompt
from bridgeaudit.orchestrator.providers import (
    HttpChatProvider,
    ModelBinding,
    ProviderResponse,
    ReplayCache,
    Sampling,
    ScriptedProvider,
    api_key_env,
    cache_entries,
)
from bridgeaudit.orchestrator.schemas import BYPASS, MAPPING, RULE, validate_output
from bridgeaudit.predicates import properties_for_side
from bridgeaudit.thoughts import AuditThought, Pruned


def mapping(*pairs, loc=None):
    return {"findings": [{"property_name": p, "parameter_name": q, "code_location": loc} for p, q in pairs]}


def scored(score):
    return ModelBinding("judge", ScriptedProvider([json.dumps({"score": score})]), role="evaluator")


# ---------------------------------------------------------------- validation


def test_validation_accepts_fenced_json():
    raw = "```json\n" + json.dumps(mapping(("amount", "amt"))) + "\n```"
    assert validate_output(raw, MAPPING).ok


def test_validation_reports_paths():
    bad = {"findings": [{"property_name": "colour", "parameter_name": "x", "code_location": None}]}
    report = validate_output(json.dumps(bad), MAPPING)
    assert not report.ok
    assert "$.findings[0].property_name" in report.message()
    assert not validate_output("{nope", MAPPING).ok


def test_grounding_ignores_whitespace_but_not_content():
    code = "require(amount  >  0,\n   'zero');"
    ok = mapping(("amount", "amount"), loc="require(amount > 0, 'zero');")
    assert validate_output(json.dumps(ok), MAPPING, code).ok
    bad = mapping(("amount", "amount"), loc="require(amount > 1, 'zero');")
    report = validate_output(json.dumps(bad), MAPPING, code)
    assert "does not occur" in report.message()


def test_correction_template_is_verbatim():
    text = correction_prompt("ORIGINAL", "boom")
    assert text == (
        "ORIGINAL\n\n[System Error]: The previous generation failed with error: boom. "
        "Please strictly follow the format requirements, ensure the output is valid JSON, "
        "and the required fields contain valid and correct information."
    )


def test_self_correct_without_budget_discards():
    report = validate_output("x", MAPPING)
    assert self_correct(ModelBinding("m", ScriptedProvider(["{}"])), "p", report, 0) is DISCARDED


# ---------------------------------------------------------------- produce / generate


@settings(max_examples=40, deadline=None)
@given(st.integers(min_value=1, max_value=6), st.integers(min_value=0, max_value=8))
def test_attempts_never_exceed_budget(budget, failures_first):
    script = ["garbage"] * failures_first + [json.dumps(mapping(("amount", "a")))]
    provider = ScriptedProvider(script)
    out = produce(ModelBinding("m", provider, max_attempts=budget), "p", MAPPING)
    assert provider.calls == out.attempts <= budget
    assert (out.payload is not None) == (failures_first < budget)


def test_transport_errors_use_attempts():
    provider = ScriptedProvider([TransportError("down"), json.dumps(mapping(("amount", "a")))])
    runtime = Runtime()
    out = produce(ModelBinding("m", provider, max_attempts=2), "p", MAPPING, runtime=runtime)
    assert out.payload is not None and out.attempts == 2
    assert [r.ok for r in runtime.records] == [False, True]


def test_generate_all_fail():
    ens = [ModelBinding(f"m{i}", ScriptedProvider(["no"]), max_attempts=1) for i in range(3)]
    with pytest.raises(AllProducersFailed):
        generate("p", ens, 3, MAPPING)
    with pytest.raises(ValueError):
        generate("p", ens, 4, MAPPING)


def test_in_flight_cap_is_respected():
    active = 0
    peak = 0
    lock = threading.Lock()

    def slow(_):
        nonlocal active, peak
        with lock:
            active += 1
            peak = max(peak, active)
        time.sleep(0.02)
        with lock:
            active -= 1
        return json.dumps(mapping(("amount", "a")))

    ens = [ModelBinding(f"m{i}", ScriptedProvider([slow])) for i in range(4)]
    generate("p", ens, 4, MAPPING, runtime=Runtime(in_flight_cap=2))
    assert peak <= 2


def test_token_usage_prefers_reported_counts():
    runtime = Runtime()
    b = ModelBinding("m", ScriptedProvider([ProviderResponse(json.dumps(mapping(("amount", "a"))), 11, 7)]))
    produce(b, "p", MAPPING, runtime=runtime)
    (rec,) = runtime.records
    assert (rec.input_tokens, rec.output_tokens, rec.estimated) == (11, 7, False)


# ---------------------------------------------------------------- aggregate / evaluate


def cand(producer, payload, layer=2):
    return ThoughtCandidate(layer, producer, payload, json.dumps(payload))


def test_aggregate_merges_identical_findings():
    a = cand("m0", mapping(("amount", "amt"), ("receiver", "to")))
    b = cand("m1", mapping(("Amount", "AMT")))
    c = cand("m2", {"findings": []})
    merged = aggregate([a, b, c], schema=MAPPING)
    assert len(merged.findings) == 2
    assert merged.findings[0].provenance == ["m0", "m1"]
    assert merged.dropped == ["m2"]
    with pytest.raises(EmptyInput):
        aggregate([])


def test_aggregate_similarity_merge_respects_groups():
    def always_same(a, b):
        return 1.0

    a = cand("m0", mapping(("amount", "amt")))
    b = cand("m1", mapping(("amount", "value")))
    merged = aggregate([a, b], sim=always_same, schema=MAPPING)
    assert len(merged.findings) == 2  # different parameter names never merge
    merged = aggregate([a, b], sim=always_same)
    assert len(merged.findings) == 1


def test_evaluate_keeps_best_per_group_and_prunes():
    merged = MergedThought(
        2,
        [
            MergedFinding({"property_name": "amount", "parameter_name": "a", "code_location": None}, ["m0"]),
            MergedFinding({"property_name": "amount", "parameter_name": "b", "code_location": None}, ["m1"]),
        ],
        ["m0", "m1"],
    )
    scores = iter([70, 90])
    judge = ModelBinding("judge", ScriptedProvider([lambda _: json.dumps({"score": next(scores)})]), role="evaluator")
    out = evaluate(merged, judge, 60, lambda f: score_prompt(2, f, ""), MAPPING, thought_id="t", parent_id="p")
    assert isinstance(out, AuditThought)
    assert [f["parameter_name"] for f in out.content["findings"]] == ["b"]
    assert out.score == 90 and out.provenance == ("m1",)
    pruned = evaluate(merged, scored(59), 60, lambda f: "x", MAPPING, parent_id="p")
    assert isinstance(pruned, Pruned) and pruned.best_score == 59
    failed = evaluate(merged, ModelBinding("j", ScriptedProvider(["?"]), role="evaluator", max_attempts=1), 60, lambda f: "x")
    assert isinstance(failed, Pruned) and failed.reason == "EvaluatorFailed"


# ---------------------------------------------------------------- providers


def test_replay_cache_records_then_replays(tmp_path):
    inner = ScriptedProvider(["first", "second"])
    cache = ReplayCache(tmp_path, "m", inner)
    msgs = [{"role": "user", "content": "hi"}]
    assert cache.complete(msgs, Sampling()).text == "first"
    assert cache.complete(msgs, Sampling()).text == "first"
    assert (cache.hits, cache.misses, inner.calls) == (1, 1, 1)
    assert len(cache_entries(tmp_path)) == 1
    assert cache.complete(msgs, Sampling(temperature=0.1)).text == "second"
    offline = ReplayCache(tmp_path, "other")
    with pytest.raises(ProviderUnavailable):
        offline.complete(msgs, Sampling())


def test_http_provider_with_mock_transport(monkeypatch):
    seen = {}

    def handler(request: httpx.Request) -> httpx.Response:
        seen["auth"] = request.headers.get("authorization")
        seen["body"] = json.loads(request.content)
        return httpx.Response(
            200,
            json={"choices": [{"message": {"content": "ok"}}], "usage": {"prompt_tokens": 3, "completion_tokens": 1}},
        )

    monkeypatch.setenv(api_key_env("gen-a"), "sekret")
    client = httpx.Client(transport=httpx.MockTransport(handler))
    p = HttpChatProvider("gen-a", "https://example.invalid/v1/chat", "m", client=client)
    resp = p.complete([{"role": "user", "content": "q"}], Sampling())
    assert (resp.text, resp.input_tokens, resp.output_tokens) == ("ok", 3, 1)
    assert seen["auth"] == "Bearer sekret"
    assert seen["body"]["temperature"] == 0.7
    assert api_key_env("gen-a") == "GOATX_PROVIDER_GEN_A_KEY"

    failing = HttpChatProvider(
        "x", "https://example.invalid", "m", client=httpx.Client(transport=httpx.MockTransport(lambda r: httpx.Response(500)))
    )
    with pytest.raises(TransportError):
        failing.complete([], Sampling())


def test_heuristic_answers_validate(bridge_ast):
    from bridgeaudit.callgraph import extract_transaction_nodes

    node = next(n for n in extract_transaction_nodes(bridge_ast) if n.side_hint == "destination")
    params = list(bridge_ast.functions[node.entrypoint].param_names)
    prompt = mapping_prompt(MAPPING, "destination", node.entrypoint, params, properties_for_side("destination"), node.code_text)
    assert parse_task(prompt)["task"] and node.code_text.strip() in parse_code(prompt)
    for persona in range(3):
        text = HeuristicProvider(f"h{persona}", persona).complete([{"role": "user", "content": prompt}], Sampling()).text
        result = validate_output(text, MAPPING, node.code_text)
        assert result.ok, result.message()
        found = {f["property_name"]: f["parameter_name"] for f in result.payload["findings"]}
        assert found["signature"] == "signature"
        assert found["nonce"] == "nonce"


def test_schemas_have_expected_groups():
    assert MAPPING.select_fields == ("property_name",)
    assert RULE.select_fields == ("rule_id", "checklist_item")
    assert BYPASS.select_fields == ()
