import random

import pytest

from colmatch.errors import EvaluationError, MissingGroundTruthError, SchemaMismatchError
from colmatch.evaluation import NaPolicy, build_report, evaluate_manifest, hit_rate_at_k, recall_at_k
from colmatch.manifest import RunManifest
from colmatch.pipeline import RankedPrediction
from colmatch.schema import ColumnRef, GroundTruth

from oracles import hit_rate_recount, recall_recount

T = [ColumnRef("T", f"t{i}") for i in range(10)]
S = [ColumnRef("S", f"s{i}") for i in range(10)]


def pred(src, *targets):
    return RankedPrediction(src, tuple(targets))


def test_two_queries_one_hit():
    gt = GroundTruth({S[0]: frozenset({T[0]}), S[1]: frozenset({T[1]})})
    preds = [pred(S[0], T[0], T[5]), pred(S[1], T[5], T[6])]
    assert hit_rate_at_k(preds, gt, 1) == 0.5
    assert recall_at_k(preds, gt, 1) == 0.5


def test_m_to_n_recall_is_partial():
    gt = GroundTruth({S[0]: frozenset({T[0], T[1]})})
    preds = [pred(S[0], T[0], T[5], T[1])]
    assert hit_rate_at_k(preds, gt, 1) == 1.0
    assert recall_at_k(preds, gt, 1) == 0.5
    assert recall_at_k(preds, gt, 3) == 1.0


def test_hit_rate_monotone_in_k():
    gt = GroundTruth({S[0]: frozenset({T[3]})})
    preds = [pred(S[0], T[0], T[1], T[2], T[3])]
    assert [hit_rate_at_k(preds, gt, k) for k in (1, 3, 4, 5)] == [0.0, 0.0, 1.0, 1.0]


def test_na_excluded_by_default_and_scored_on_request():
    gt = GroundTruth({S[0]: frozenset({T[0]}), S[1]: frozenset()})
    preds = [pred(S[0], T[0]), pred(S[1])]
    assert hit_rate_at_k(preds, gt, 1) == 1.0
    assert hit_rate_at_k(preds, gt, 1, NaPolicy.SCORE) == 1.0
    preds_wrong = [pred(S[0], T[0]), pred(S[1], T[2])]
    assert hit_rate_at_k(preds_wrong, gt, 1, NaPolicy.SCORE) == 0.5


def test_all_na_is_error():
    gt = GroundTruth({S[0]: frozenset()})
    with pytest.raises(EvaluationError):
        hit_rate_at_k([pred(S[0])], gt, 1)


def test_missing_ground_truth():
    with pytest.raises(MissingGroundTruthError):
        hit_rate_at_k([pred(S[0], T[0])], GroundTruth({}), 1)


def test_k_must_be_positive():
    gt = GroundTruth({S[0]: frozenset({T[0]})})
    with pytest.raises(ValueError):
        hit_rate_at_k([pred(S[0], T[0])], gt, 0)


def _random_fixture(rng, one_to_one):
    gt, preds = {}, []
    for s in S[: rng.randint(1, 10)]:
        size = 1 if one_to_one else rng.randint(0, 4)
        gt[s] = frozenset(rng.sample(T, size))
        preds.append(pred(s, *rng.sample(T, rng.randint(0, 6))))
    if not any(gt.values()):
        gt[S[0]] = frozenset({T[0]})
    return GroundTruth(gt), preds


@pytest.mark.parametrize("seed", range(30))
def test_matches_recount(seed):
    rng = random.Random(seed)
    gt, preds = _random_fixture(rng, one_to_one=seed % 2 == 0)
    as_lists = {p.source: list(p.ranked_targets) for p in preds}
    for k in (1, 3, 5):
        assert hit_rate_at_k(preds, gt, k) == hit_rate_recount(as_lists, gt.entries, k)
        assert recall_at_k(preds, gt, k) == recall_recount(as_lists, gt.entries, k)


def test_report_suppresses_hit_rate_for_m_to_n():
    gt = GroundTruth({S[0]: frozenset({T[0], T[1]}), S[1]: frozenset({T[2]})})
    preds = [pred(S[0], T[0]), pred(S[1], T[2])]
    report = build_report(preds, gt, (1,))
    assert report.hit_rate_suppressed
    assert report.to_dict()["hit_rate"] is None
    assert "HitRate" not in report.render_table()
    assert "m:n" in report.render_table()
    forced = build_report(preds, gt, (1,), force_hit_rate=True)
    assert "HitRate" in forced.render_table()


def test_report_table_and_detail():
    gt = GroundTruth({S[0]: frozenset({T[0]}), S[1]: frozenset({T[1]}), S[2]: frozenset()})
    preds = [pred(S[0], T[0], T[1]), pred(S[1], T[0], T[1]), pred(S[2])]
    report = build_report(preds, gt, (1, 3), dataset="demo")
    table = report.render_table()
    assert "50.00%" in table and "100.00%" in table
    assert "1 NA source column(s) excluded" in table
    lines = report.detail_csv().splitlines()
    assert lines[0] == "source,target,prediction_1,prediction_2"
    assert lines[1] == "S.s0,T.t0,T.t0,T.t1"
    assert report.excluded == (S[2],)


def _manifest(**schemas):
    return RunManifest(
        mode="pipeline",
        config_hash="c",
        config={},
        providers={},
        source_schema=schemas.get("source", {"name": "s", "hash": "hs"}),
        target_schema=schemas.get("target", {"name": "t", "hash": "ht"}),
        predictions=(pred(S[0], T[0]),),
    )


def test_evaluate_manifest_checks_schema_hashes():
    gt = GroundTruth({S[0]: frozenset({T[0]})}, source_hash="hs", target_hash="ht")
    assert evaluate_manifest(_manifest(), gt).hit_rate[1] == 1.0
    with pytest.raises(SchemaMismatchError):
        evaluate_manifest(_manifest(target={"name": "t", "hash": "other"}), gt)
