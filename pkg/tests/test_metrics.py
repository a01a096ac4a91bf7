import json
from pathlib import Path

import numpy as np
import pytest

import oracles
from conftest import make_doc
from evrel.corpus import Prediction
from evrel.metrics import (
    average_f, b_cubed, baseline_matching, baseline_singleton, blanc, ceaf_e, clustering, coref_report,
    harmonic_f, muc, score_predictions, sequencing_report, tempeval,
)
from evrel.relgraph import EventDag

CASES = json.loads((Path(__file__).parent / "fixtures" / "metric_cases.json").read_text())
SCORERS = {"MUC": muc, "B3": b_cubed, "CEAF-E": ceaf_e, "BLANC": blanc}


def parts(*blocks):
    return clustering([set(b) for b in blocks])


@pytest.mark.parametrize("case", CASES["coref"], ids=lambda c: c["metric"])
def test_coref_fixtures(case):
    got = SCORERS[case["metric"]](clustering(case["gold"]), clustering(case["sys"]))
    exp = case["expected"]
    assert (round(got.precision, 2), round(got.recall, 2), round(got.f1, 2)) == (
        exp["precision"], exp["recall"], exp["f1"])


@pytest.mark.parametrize("case", CASES["tempeval"], ids=lambda c: str(c["sys"]))
def test_tempeval_fixtures(case):
    got = tempeval(EventDag.from_edges(map(tuple, case["gold"])), EventDag.from_edges(map(tuple, case["sys"])))
    exp = case["expected"]
    assert (round(got.precision, 2), round(got.recall, 2), round(got.f1, 2)) == (
        exp["precision"], exp["recall"], exp["f1"])


@pytest.mark.parametrize("case", CASES["average_f"], ids=lambda c: str(c["expected"]))
def test_average_fixtures(case):
    assert average_f(*case["values"]) == pytest.approx(case["expected"], abs=case["tolerance"])


@pytest.mark.parametrize("case", CASES["harmonic_f"], ids=lambda c: str(c["expected"]))
def test_harmonic_fixtures(case):
    assert harmonic_f(case["precision"], case["recall"]) == pytest.approx(case["expected"], abs=case["tolerance"])


def test_average_of_equal_values():
    assert average_f(63.5, 63.5, 63.5, 63.5) == pytest.approx(63.5)
    with pytest.raises(ValueError):
        average_f(1, 2, 3)


def test_identity_scores_100():
    g = parts("ab", "cde", "f")
    for scorer in SCORERS.values():
        s = scorer(g, g)
        assert (s.precision, s.recall, s.f1) == (100.0, 100.0, 100.0)
    d = EventDag.from_edges([(1, 2), (2, 3), (1, 4)])
    assert tempeval(d, d).f1 == 100.0


def test_singleton_system_zero_muc():
    gold = parts("abc", "de", "f")
    assert muc(gold, parts(*"abcdef")).f1 == 0.0


def test_against_oracles_on_random_partitions():
    rng = np.random.default_rng(0)
    for _ in range(300):
        n = int(rng.integers(1, 8))
        items = [f"m{k}" for k in range(n)]
        gold = [list(c) for c in _random_partition(rng, items)]
        sys = [list(c) for c in _random_partition(rng, items)]
        g, s = clustering(gold), clustering(sys)
        for name, oracle in (("MUC", oracles.muc_oracle), ("B3", oracles.b3_oracle), ("CEAF-E", oracles.ceaf_oracle)):
            p, r, f = oracles.prf(*oracle(gold, sys))
            got = SCORERS[name](g, s)
            assert (got.precision, got.recall, got.f1) == pytest.approx((p, r, f)), name
        p, r, f = (float(x) for x in oracles.blanc_oracle(gold, sys))
        got = blanc(g, s)
        assert (got.precision, got.recall, got.f1) == pytest.approx((p, r, f))
        if len(gold) <= 5 and len(sys) <= 5:
            best = oracles.ceaf_permutation_oracle(gold, sys)
            assert ceaf_e(g, s).recall == pytest.approx(100 * best / len(gold))


def _random_partition(rng, items):
    labels = rng.integers(0, max(1, len(items)), size=len(items))
    return [[m for m, lab in zip(items, labels) if lab == k] for k in sorted(set(labels.tolist()))]


def test_blanc_symmetry():
    rng = np.random.default_rng(1)
    for _ in range(100):
        items = [f"m{k}" for k in range(int(rng.integers(2, 7)))]
        a, b = clustering(_random_partition(rng, items)), clustering(_random_partition(rng, items))
        ab, ba = blanc(a, b), blanc(b, a)
        assert ab.precision == pytest.approx(ba.recall) and ab.recall == pytest.approx(ba.precision)


def test_tempeval_against_oracle():
    rng = np.random.default_rng(2)
    for _ in range(300):
        n = int(rng.integers(1, 9))
        gn, ge = oracles.random_dag(rng, n, float(rng.uniform(0.1, 0.6)))
        sn, se = oracles.random_dag(rng, n, float(rng.uniform(0.1, 0.6)))
        got = tempeval(EventDag(frozenset(gn), frozenset(ge)), EventDag(frozenset(sn), frozenset(se)))
        p, r, f = oracles.prf(*oracles.tempeval_oracle(gn, ge, sn, se))
        assert (got.precision, got.recall, got.f1) == pytest.approx((p, r, f))
        assert all(0 <= v <= 100 for v in (got.precision, got.recall, got.f1))


def test_clustering_validation():
    assert clustering([["a"]], universe=["a", "b"]) == parts("a", "b")
    with pytest.raises(ValueError):
        clustering([["a", "b"], ["b"]])
    with pytest.raises(ValueError):
        clustering([["z"]], universe=["a"])
    with pytest.raises(ValueError):
        muc(parts("ab"), parts("a"))


def _typed_doc(specs):
    return make_doc([["w"] * len(specs)], [(f"m{k}", 0, k, t, r) for k, (t, r) in enumerate(specs)])


def test_baselines():
    distinct = _typed_doc([("Life.Die", "Actual"), ("Life.Marry", "Actual"), ("Justice.Sue", "Actual")])
    assert baseline_singleton(distinct) == baseline_matching(distinct)
    doc = _typed_doc([("Life.Die", "Actual"), ("Life.Die", "Actual"), ("Life.Die", "Generic")])
    assert frozenset({1, 2}) in baseline_matching(doc)
    assert frozenset({1, 2}) not in baseline_singleton(doc)
    match = baseline_matching(doc)
    for block in baseline_singleton(doc):
        assert any(block <= m for m in match)


def test_micro_and_macro_reports():
    pairs = [(parts("ab", "c"), parts("a", "b", "c")), (parts("abcd"), parts("abcd"))]
    micro, macro = coref_report(pairs), coref_report(pairs, "macro")
    # MUC micro: recall (0 + 3) / (1 + 3); macro: (0 + 100) / 2
    assert micro.rows["MUC"][1] == 75.0
    assert macro.rows["MUC"][1] == 50.0
    assert micro.avg == round(sum(micro.rows[m][2] for m in SCORERS) / 4, 2)
    assert "AVG" in micro.to_text() and json.loads(micro.to_json())["AVG"] == micro.avg
    with pytest.raises(ValueError):
        coref_report(pairs, "median")
    seq = sequencing_report([(EventDag.from_edges([(1, 2)]), EventDag.from_edges([(1, 2)]))])
    assert seq.rows["TempEval"] == (100.0, 100.0, 100.0) and seq.avg is None


def test_score_predictions_propagates_gold_clusters():
    doc = make_doc([["a", "b", "c"]], [(f"m{k}", 0, k, "Life.Die", "Actual") for k in range(3)],
                   coref=[["m1", "m2"]], after=[["m0", "m1"]])
    # linking m0 to the other mention of the same event is the same prediction
    for link in (("m0", "m1"), ("m0", "m2")):
        report = score_predictions([doc], {doc.doc_id: Prediction(doc.doc_id, after=(link,))}, "sequencing")
        assert report.rows["TempEval"] == (100.0, 100.0, 100.0)
    report = score_predictions([doc], {doc.doc_id: Prediction(doc.doc_id, coref=(("m1", "m2"),))}, "coref")
    assert report.avg == 100.0
    with pytest.raises(ValueError):
        score_predictions([doc], {}, "coref")
