import itertools

import numpy as np
import pytest

from conftest import make_doc, random_doc, random_scores
from oracles import acyclic_kahn, best_structure_score, reduction_by_definition
from evrel.decoder import (
    AntecedentSets, DecodeError, decode, decode_coref, decode_gold, decode_lag, gold_antecedents,
    gold_graph, select_latent_mentions,
)
from evrel.features import ArcScores, ArcTable, WeightVector
from evrel.relgraph import Arc, Label, RelationGraph, Task, coref_partition, event_ids, matches
from evrel.synth import ScriptGrammar, generate

F, B, C, R = Label.FORWARD, Label.BACKWARD, Label.COREF, Label.ROOT


def words_doc(lemmas, coref=None, after=None):
    sent = [(lem + "ed", lem, "VBD") for lem in lemmas]
    mentions = [(f"m{k + 1}", 0, k, "Life.Die", "Actual") for k in range(len(lemmas))]
    return make_doc([sent], mentions, coref=coref, after=after)


def coref_scores(n, root, pairs):
    """Coreference scores from a root vector and a {(i, j): score} map (others -inf)."""
    pair = np.full((n + 1, n + 1, 1), -np.inf)
    for (i, j), s in pairs.items():
        pair[i, j, 0] = s
    return ArcScores(np.asarray([0.0] + list(root)), pair, (C,))


def seq_scores(n, root, pairs):
    pair = np.full((n + 1, n + 1, 2), -np.inf)
    for j in range(2, n + 1):
        for i in range(1, j):
            pair[i, j] = 0.0
    for (i, j, lab), s in pairs.items():
        pair[i, j, 0 if lab is F else 1] = s
    return ArcScores(np.asarray([0.0] + list(root)), pair, (F, B))


def links(g):
    return {(a.source, a.target, a.label) for a in g.link_arcs()}


# ---------------------------------------------------------------- coreference


def test_root_dominant_weights_give_singletons():
    doc = words_doc(["kill", "kill", "kill"])
    g = decode_coref(doc, {"root_bias": 10.0})
    assert g == RelationGraph.all_root(3, Task.COREF)


def test_same_lemma_weight_links_the_pair():
    # a small root bias breaks the 0-vs-0 tie that would otherwise attach mention 2 to 1
    doc = words_doc(["kill", "attack", "kill"])
    w = WeightVector({"head|same_lemma": 1.0, "root_bias": 0.5})
    g = decode_coref(doc, w)
    assert links(g) == {(1, 3, C)}
    scores = ArcTable(doc, Task.COREF, w, grow=False).scores(w)
    totals = {
        ch: sum(scores(Arc(i, j + 1, C if i else R)) for j, i in enumerate(ch))
        for ch in itertools.product(*[range(j) for j in range(1, 4)])
    }
    best = max(totals.values())
    assert [ch for ch, t in totals.items() if t == best] == [(0, 0, 1)]


def test_root_loses_ties():
    doc = words_doc(["kill", "attack"])
    assert links(decode_coref(doc, {"head|same_lemma": 1.0})) == {(1, 2, C)}


def test_coref_ties():
    # two equal antecedents: the closer wins; an antecedent equal to the root wins
    s = coref_scores(3, [0, 0, 1.0], {(1, 3): 1.0, (2, 3): 1.0, (1, 2): 0.0})
    g = decode_coref(words_doc(["a", "b", "c"]), scores=s)
    assert links(g) == {(2, 3, C), (1, 2, C)}


def test_coref_tree_property():
    rng = np.random.default_rng(0)
    for k in range(50):
        doc = random_doc(rng, int(rng.integers(1, 9)))
        _, _, scores = random_scores(doc, Task.COREF, rng)
        g = decode_coref(doc, scores=scores)
        assert sorted(a.target for a in g.arcs) == list(range(1, doc.n + 1))


# ---------------------------------------------------------------- sequencing


@pytest.mark.parametrize("search", ["greedy", "refine"])
def test_zero_weights_give_no_links(search):
    doc = words_doc(["kill", "attack", "meet", "sell"])
    g = decode_lag(doc, WeightVector(), search=search)
    assert not g.link_arcs()
    assert g == RelationGraph.all_root(4, Task.SEQUENCING)


@pytest.mark.parametrize("search", ["greedy", "refine"])
def test_chain_weights_give_minimum_structure(search):
    s = seq_scores(3, [0, 0, 0], {(1, 2, F): 2.0, (2, 3, F): 2.0, (1, 3, F): 1.5})
    g = decode_lag(words_doc(["a", "b", "c"]), scores=s, search=search)
    assert links(g) == {(1, 2, F), (2, 3, F)}


def test_one_label_per_pair():
    s = seq_scores(2, [0, 0], {(1, 2, F): 1.0, (1, 2, B): 2.0})
    assert links(decode_lag(words_doc(["a", "b"]), scores=s, search="greedy")) == {(1, 2, B)}


def test_unknown_search():
    with pytest.raises(ValueError):
        decode_lag(words_doc(["kill"]), WeightVector(), search="beam")


def _valid(g, clusters=()):
    ev = event_ids(g.n, clusters)
    edges = [(ev[a], ev[b]) if lab is F else (ev[b], ev[a]) for a, b, lab in links(g)]
    nodes = sorted(set(ev[1:]))
    return (
        acyclic_kahn(nodes, edges)
        and len(set(edges)) == len(edges)
        and reduction_by_definition(nodes, edges) == set(edges)
        and sorted({a.target for a in g.arcs}) == list(range(1, g.n + 1))
    )


def test_refine_structure_and_score():
    rng = np.random.default_rng(1)
    for k in range(60):
        doc = random_doc(rng, int(rng.integers(1, 9)), coref=True)
        clusters = doc.cluster_sets() if k % 2 else ()
        _, _, scores = random_scores(doc, Task.SEQUENCING, rng)
        greedy = decode_lag(doc, scores=scores, clusters=clusters, search="greedy")
        refined = decode_lag(doc, scores=scores, clusters=clusters)
        for g in (greedy, refined):
            assert _valid(g, clusters)
            assert scores.graph_score(g) >= scores.graph_score(RelationGraph.all_root(doc.n, Task.SEQUENCING)) - 1e-9
        assert scores.graph_score(refined) >= scores.graph_score(greedy) - 1e-9


def test_refine_never_beats_the_optimum():
    rng = np.random.default_rng(2)
    hits = 0
    for _ in range(100):
        doc = random_doc(rng, 4)
        _, _, scores = random_scores(doc, Task.SEQUENCING, rng)
        got = scores.graph_score(decode_lag(doc, scores=scores))
        best = best_structure_score(4, scores.root, scores.pair)
        assert got <= best + 1e-9
        hits += got >= best - 1e-9
    assert hits >= 90


def test_decode_dispatch():
    doc = words_doc(["kill", "kill"])
    assert decode(doc, {}, Task.COREF).task is Task.COREF
    assert decode(doc, {}, "sequencing").task is Task.SEQUENCING


# ---------------------------------------------------------------- gold-constrained


def test_gold_singletons_give_all_root():
    doc = words_doc(["kill", "kill", "kill"], coref=[], after=[])
    rng = np.random.default_rng(3)
    for task in Task:
        _, _, scores = random_scores(doc, task, rng, scale=5.0)
        assert decode_gold(doc, task=task, scores=scores) == RelationGraph.all_root(3, task)


def test_gold_cluster_always_spans():
    doc = words_doc(["kill", "kill", "kill"], coref=[["m1", "m2", "m3"]])
    rng = np.random.default_rng(4)
    for _ in range(50):
        _, _, scores = random_scores(doc, Task.COREF, rng, scale=5.0)
        g = decode_gold(doc, task=Task.COREF, scores=scores)
        assert coref_partition(g) == frozenset({frozenset({1, 2, 3})})


def test_gold_tree_prefers_adjacent_links():
    doc = words_doc(["kill", "kill", "kill"], coref=[["m1", "m2", "m3"]])
    s = coref_scores(3, [0, 0, 0], {(1, 2): 1.0, (1, 3): 0.5, (2, 3): 1.0})
    assert links(decode_gold(doc, task=Task.COREF, scores=s)) == {(1, 2, C), (2, 3, C)}
    s = coref_scores(3, [0, 0, 0], {(1, 2): 1.0, (1, 3): 1.0, (2, 3): 0.5})
    assert links(decode_gold(doc, task=Task.COREF, scores=s)) == {(1, 2, C), (1, 3, C)}


def test_gold_decode_matches_gold_for_any_weights():
    docs = generate(ScriptGrammar(seed=5), 15)
    rng = np.random.default_rng(5)
    for doc in docs:
        for task in Task:
            _, _, scores = random_scores(doc, task, rng, scale=3.0)
            g = decode_gold(doc, task=task, scores=scores)
            assert matches(g, gold_graph(doc, task), doc.cluster_sets())


def test_gold_decode_needs_gold():
    with pytest.raises(DecodeError):
        decode_gold(words_doc(["kill"]), {}, Task.COREF)


def test_gold_antecedent_sets():
    doc = words_doc(["a", "b", "c", "d"], coref=[["m1", "m3"]], after=[["m2", "m4"]])
    co = gold_antecedents(doc, Task.COREF)
    assert co.sets[1:] == ((0,), (0,), (1,), (0,))
    sq = gold_antecedents(doc, Task.SEQUENCING)
    assert sq.sets[4] == (2,) and sq.labels[(2, 4)] is F
    with pytest.raises(ValueError):
        AntecedentSets(((), (1,)))


# ---------------------------------------------------------------- latent mentions


def test_latent_selection_identity_for_singletons():
    doc = words_doc(["a", "b", "c"], after=[["m1", "m2"], ["m2", "m3"]])
    assert select_latent_mentions(doc, {}) == [1, 2, 3]


def test_latent_selection_follows_weights():
    # event {m2, m5} follows m1; arcs from m1 into m5 score higher
    doc = words_doc(["a", "b", "c", "d", "b"], coref=[["m2", "m5"]], after=[["m1", "m2"]])
    s = seq_scores(5, [0] * 5, {(1, 2, F): 0.5, (1, 5, F): 2.0})
    assert select_latent_mentions(doc, scores=s) == [1, 5]
    s = seq_scores(5, [0] * 5, {(1, 2, F): 0.5, (1, 5, F): 0.5})
    assert select_latent_mentions(doc, scores=s) == [1, 2]


def test_latent_selection_one_per_linked_event():
    for doc in generate(ScriptGrammar(seed=6), 10):
        ev = event_ids(doc.n, doc.cluster_sets())
        linked = {ev[m] for pair in doc.after_pairs() for m in pair}
        picked = select_latent_mentions(doc, {})
        assert sorted(ev[m] for m in picked) == sorted(linked)
