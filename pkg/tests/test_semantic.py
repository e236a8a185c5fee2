import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bridgeaudit.errors import DimMismatch, DuplicatePatternId, ProviderUnavailable, SchemaError
from bridgeaudit.semantic.context import state_context
from bridgeaudit.semantic.embed import FallbackEmbedder, FeatureHashEmbedder, prune_candidates, similarity
from bridgeaudit.semantic.kb import (
    KnowledgePattern,
    build_kb,
    kb_from_document,
    load_pattern_sources,
    retrieve,
    seed_kb,
    seed_patterns,
)

code_text = st.text(alphabet="abcdefgh_()[];=+-<> 0123456789\n", min_size=1, max_size=120).filter(
    lambda s: any(c.isalnum() or c in "()[];=+-<>" for c in s)
)


@settings(max_examples=80, deadline=None)
@given(code_text)
def test_embeddings_are_unit_and_deterministic(text):
    e = FeatureHashEmbedder()
    v = e.embed(text)
    assert abs(float(np.linalg.norm(v)) - 1.0) < 1e-9
    assert np.array_equal(v, FeatureHashEmbedder().embed(text))


@settings(max_examples=60, deadline=None)
@given(st.lists(code_text, min_size=1, max_size=8), st.floats(min_value=0.0, max_value=1.0))
def test_pruning_keeps_a_pairwise_dissimilar_prefix_closed_set(snippets, threshold):
    e = FeatureHashEmbedder()
    kept = prune_candidates(snippets, threshold, e)
    assert kept[0] == 0
    vecs = [e.embed(s) for s in snippets]
    for i, a in enumerate(kept):
        for b in kept[i + 1 :]:
            assert similarity(vecs[a], vecs[b]) < threshold + 1e-9
    for j in set(range(len(snippets))) - set(kept):
        assert any(similarity(vecs[j], vecs[k]) >= threshold - 1e-9 for k in kept if k < j)


def test_prune_rejects_bad_threshold():
    with pytest.raises(ValueError):
        prune_candidates(["a"], 1.5)


def test_dimension_checks():
    with pytest.raises(DimMismatch):
        similarity(np.ones(3), np.ones(4))
    with pytest.raises(DimMismatch):
        FallbackEmbedder(FeatureHashEmbedder(8), FeatureHashEmbedder(16))
    with pytest.raises(DimMismatch):
        seed_kb().scores(np.ones(3))


def test_fallback_embedder_switches_on_unavailable():
    class Down:
        dims = 256

        def embed(self, text):
            raise ProviderUnavailable("down")

    fb = FallbackEmbedder(Down(), FeatureHashEmbedder())
    assert np.array_equal(fb.embed("x = 1"), FeatureHashEmbedder().embed("x = 1"))


def test_seed_patterns_are_code_free_in_prompts():
    pats = seed_patterns()
    assert len(pats) == 10
    assert len({p.pattern_id for p in pats}) == 10
    for p in pats:
        assert "exemplar_snippet" not in p.prompt_view()


def test_duplicate_pattern_ids():
    p = KnowledgePattern("X", "t", "b", "r", "other", "x = 1;")
    with pytest.raises(DuplicatePatternId):
        build_kb([p, p])
    with pytest.raises(ValueError):
        KnowledgePattern("Y", "t", "b", "r", "weird", "x")


def test_retrieval_order_and_top_k():
    kb = seed_kb()
    query = "require(!usedNonces[srcChainId][nonce]); usedNonces[srcChainId][nonce] = true;"
    all_hits = retrieve(kb, query, -1.0, 100)
    assert len(all_hits) == len(kb)
    scores = [h.score for h in all_hits]
    assert scores == sorted(scores, reverse=True)
    assert retrieve(kb, query, -1.0, 2) == all_hits[:2]
    assert retrieve(kb, query, 0.5, 0) == []


def test_kb_document_validation(tmp_path):
    doc = seed_kb().to_document()
    doc["patterns"][0].pop("title")
    with pytest.raises(SchemaError):
        kb_from_document(doc)
    src = tmp_path / "patterns.json"
    src.write_text(json.dumps([p.to_document() for p in seed_patterns()]))
    assert [p.pattern_id for p in load_pattern_sources(src)] == [p.pattern_id for p in seed_patterns()]


def test_state_context_lists_router_state(bridge_ast):
    ctx = state_context("Router.sol::Router::relay", bridge_ast).to_document()
    names = {v["name"] for v in ctx["state_vars"]}
    assert {"usedNonces", "validator", "chainId"} <= names
