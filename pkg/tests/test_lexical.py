import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from colmatch.errors import EmptyCorpusError, SchemaError
from colmatch.lexical import Bm25Params, LexicalDoc, LexicalIndex, bm25_idf, build_lexical_index, lexical_search
from colmatch.schema import ColumnRef

from oracles import bm25_brute_force, name, random_corpus


def _index(*docs, **kw):
    return build_lexical_index([LexicalDoc(i, ColumnRef("T", f"c{i}"), name(d)) for i, d in enumerate(docs)], **kw)


def test_single_document_by_hand():
    index = _index(["location", "id"])
    [hit] = lexical_search(index, ["location"], threshold=0.0)
    # N=1, df=1: idf = ln(1 + 0.5/1.5); |d| = avgdl so the length norm is 1
    expected = math.log(1 + 0.5 / 1.5) * 1 * 2.2 / (1 + 1.2)
    assert hit.score == pytest.approx(expected, abs=1e-12)


def test_statistics_counting():
    index = _index(["a", "b", "a"], ["b"], ["c", "d"])
    assert index.df == {"a": 1, "b": 2, "c": 1, "d": 1}
    assert index.avgdl == pytest.approx(2.0)
    assert index.doc_len == (3, 1, 2)
    assert index.idf["b"] == pytest.approx(bm25_idf(3, 2))


def test_idf_is_positive_even_for_common_terms():
    assert bm25_idf(10, 10) > 0


def test_repeated_query_tokens_count_per_occurrence():
    index = _index(["a", "b"], ["b", "c"], ["d"])
    once = lexical_search(index, ["a"], threshold=0.0)[0].score
    twice = lexical_search(index, ["a", "a"], threshold=0.0)[0].score
    assert twice == pytest.approx(2 * once)


def test_no_shared_token_no_hit():
    index = _index(["a"], ["b"])
    assert lexical_search(index, ["z"], threshold=0.0) == []
    assert lexical_search(index, [], threshold=0.0) == []


def test_ties_break_by_doc_id():
    index = _index(["x", "y"], ["x", "y"], ["x", "y"])
    hits = lexical_search(index, ["x"], threshold=0.0)
    assert [h.matched_doc for h in hits] == [0, 1, 2]


def test_top_k_and_threshold():
    index = _index(*[["x", f"{'q' * (i + 1)}"] for i in range(10)], ["zz"])
    assert len(lexical_search(index, ["x"], top_k=3, threshold=0.0)) == 3
    assert lexical_search(index, ["x"], threshold=100.0) == []


def test_errors():
    with pytest.raises(EmptyCorpusError):
        build_lexical_index([])
    with pytest.raises(SchemaError):
        build_lexical_index([LexicalDoc(3, ColumnRef("T", "c"), name(["a"]))])
    with pytest.raises(ValueError):
        Bm25Params(b=1.5)


def test_round_trip():
    index = _index(["a", "b"], ["b", "c"])
    again = LexicalIndex.from_dict(index.to_dict())
    assert again.df == index.df
    assert lexical_search(again, ["b"], threshold=0.0) == lexical_search(index, ["b"], threshold=0.0)


def test_round_trip_detects_tampering():
    data = _index(["a", "b"]).to_dict()
    data["stats"]["df"]["a"] = 7
    with pytest.raises(SchemaError):
        LexicalIndex.from_dict(data)


@pytest.mark.parametrize("seed", range(10))
def test_matches_brute_force(seed):
    rng = random.Random(seed)
    docs, lexical_docs, query = random_corpus(rng)
    hits = lexical_search(build_lexical_index(lexical_docs), query, top_k=len(docs), threshold=0.0)
    expected = bm25_brute_force(docs, query)
    assert [h.matched_doc for h in hits] == [d for d, _ in expected]
    for hit, (_, score) in zip(hits, expected):
        assert abs(hit.score - score) <= 1e-9


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.0, 5.0), st.floats(0.0, 5.0))
def test_raising_threshold_only_removes_hits(seed, low, extra):
    docs, lexical_docs, query = random_corpus(random.Random(seed), max_docs=40)
    index = build_lexical_index(lexical_docs)
    loose = lexical_search(index, query, top_k=1000, threshold=low)
    strict = lexical_search(index, query, top_k=1000, threshold=low + extra)
    assert {h.matched_doc for h in strict} <= {h.matched_doc for h in loose}
    assert all(h.score >= low + extra for h in strict)
