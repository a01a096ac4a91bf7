"""Coreference and sequencing scores, baselines and score reports.

Every metric returns raw counts so that corpus scores can pool them (micro)
or average per-document values (macro). Precision, recall and F are in
percent; 0/0 is 0 unless a metric says otherwise.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from itertools import combinations
from typing import Hashable, Iterable, Mapping, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .corpus import Document, Prediction
from .relgraph import (
    EventDag,
    Label,
    RelationGraph,
    Task,
    _event_edges,
    event_ids,
    to_event_dag,
    transitive_closure,
    transitive_reduction,
)

Clustering = frozenset  # of frozensets of mention keys, singletons explicit

COREF_METRICS = ("MUC", "B3", "CEAF-E", "BLANC")
AGGREGATES = ("micro", "macro")


def _ratio(num: float, den: float) -> float:
    return 100.0 * num / den if den else 0.0


def harmonic_f(p: float, r: float) -> float:
    return 2 * p * r / (p + r) if p + r else 0.0


# ---------------------------------------------------------------- score containers


@dataclass(frozen=True)
class Score:
    """Precision and recall as pooled fractions."""

    p_num: float = 0.0
    p_den: float = 0.0
    r_num: float = 0.0
    r_den: float = 0.0

    def __add__(self, other: "Score") -> "Score":
        return Score(self.p_num + other.p_num, self.p_den + other.p_den,
                     self.r_num + other.r_num, self.r_den + other.r_den)

    @property
    def precision(self) -> float:
        return _ratio(self.p_num, self.p_den)

    @property
    def recall(self) -> float:
        return _ratio(self.r_num, self.r_den)

    @property
    def f1(self) -> float:
        return harmonic_f(self.precision, self.recall)


@dataclass(frozen=True)
class BlancScore:
    """Pair counts: right/wrong coreference links, right/wrong non-links."""

    rc: int = 0
    wc: int = 0
    wn: int = 0
    rn: int = 0

    def __add__(self, other: "BlancScore") -> "BlancScore":
        return BlancScore(self.rc + other.rc, self.wc + other.wc, self.wn + other.wn, self.rn + other.rn)

    def _component(self, right, sys_wrong, gold_wrong):
        if right + sys_wrong == 0 and right + gold_wrong == 0:
            return 100.0, 100.0  # neither side has pairs of this kind
        p = _ratio(right, right + sys_wrong)
        r = _ratio(right, right + gold_wrong)
        return p, r

    @property
    def link(self) -> tuple[float, float]:
        return self._component(self.rc, self.wc, self.wn)

    @property
    def nonlink(self) -> tuple[float, float]:
        return self._component(self.rn, self.wn, self.wc)

    @property
    def precision(self) -> float:
        return (self.link[0] + self.nonlink[0]) / 2

    @property
    def recall(self) -> float:
        return (self.link[1] + self.nonlink[1]) / 2

    @property
    def f1(self) -> float:
        return (harmonic_f(*self.link) + harmonic_f(*self.nonlink)) / 2


# ---------------------------------------------------------------- clusterings


def clustering(clusters: Iterable[Iterable[Hashable]], universe: Iterable[Hashable] | None = None) -> Clustering:
    """Normalize to a partition; mentions of ``universe`` left out become singletons."""
    blocks = [frozenset(c) for c in clusters]
    blocks = [b for b in blocks if b]
    seen: set = set()
    for b in blocks:
        if seen & b:
            raise ValueError(f"mentions {sorted(seen & b, key=str)} are in more than one cluster")
        seen |= b
    if universe is not None:
        universe = set(universe)
        extra = seen - universe
        if extra:
            raise ValueError(f"clustered mentions outside the document: {sorted(extra, key=str)}")
        blocks += [frozenset([m]) for m in universe - seen]
    return frozenset(blocks)


def _mentions(c: Clustering) -> set:
    return {m for block in c for m in block}


def _same_universe(gold: Clustering, sys: Clustering) -> None:
    if _mentions(gold) != _mentions(sys):
        raise ValueError("gold and system clusterings cover different mentions")


def muc(gold: Clustering, sys: Clustering) -> Score:
    _same_universe(gold, sys)

    def side(key: Clustering, resp: Clustering):
        owner = {m: k for k, block in enumerate(resp) for m in block}
        num = sum(len(K) - len({owner[m] for m in K}) for K in key)
        den = sum(len(K) - 1 for K in key)
        return num, den

    r_num, r_den = side(gold, sys)
    p_num, p_den = side(sys, gold)
    return Score(p_num, p_den, r_num, r_den)


def b_cubed(gold: Clustering, sys: Clustering) -> Score:
    _same_universe(gold, sys)
    g = {m: block for block in gold for m in block}
    s = {m: block for block in sys for m in block}
    p = sum(len(g[m] & s[m]) / len(s[m]) for m in g)
    r = sum(len(g[m] & s[m]) / len(g[m]) for m in g)
    return Score(p, len(g), r, len(g))


def _phi4(k: frozenset, r: frozenset) -> float:
    return 2 * len(k & r) / (len(k) + len(r))


def ceaf_e(gold: Clustering, sys: Clustering) -> Score:
    _same_universe(gold, sys)
    keys, resps = sorted(gold, key=sorted), sorted(sys, key=sorted)
    if not keys or not resps:
        return Score(0.0, len(resps), 0.0, len(keys))
    sim = np.array([[_phi4(k, r) for r in resps] for k in keys])
    rows, cols = linear_sum_assignment(sim, maximize=True)
    best = float(sim[rows, cols].sum())
    return Score(best, len(resps), best, len(keys))


def blanc(gold: Clustering, sys: Clustering) -> BlancScore:
    _same_universe(gold, sys)
    g = {m: k for k, block in enumerate(gold) for m in block}
    s = {m: k for k, block in enumerate(sys) for m in block}
    rc = wc = wn = rn = 0
    for a, b in combinations(sorted(g, key=str), 2):
        in_gold, in_sys = g[a] == g[b], s[a] == s[b]
        if in_gold and in_sys:
            rc += 1
        elif in_sys:
            wc += 1
        elif in_gold:
            wn += 1
        else:
            rn += 1
    return BlancScore(rc, wc, wn, rn)


COREF_SCORERS = {"MUC": muc, "B3": b_cubed, "CEAF-E": ceaf_e, "BLANC": blanc}


def average_f(*values) -> float:
    """Mean of the MUC, B³, CEAF-E and BLANC F1 values (a report or four numbers)."""
    if len(values) == 1 and isinstance(values[0], ScoreReport):
        values = tuple(values[0].rows[m][2] for m in COREF_METRICS)
    if len(values) == 1 and not isinstance(values[0], (int, float)):
        values = tuple(values[0])
    if len(values) != 4:
        raise ValueError(f"average_f needs 4 F1 values, got {len(values)}")
    return sum(float(v) for v in values) / 4


# ---------------------------------------------------------------- sequencing


def _as_dag(g, clusters, strict: bool) -> EventDag:
    if isinstance(g, EventDag):
        return g
    if not isinstance(g, RelationGraph):
        raise TypeError(f"expected EventDag or RelationGraph, got {type(g).__name__}")
    if strict:
        return to_event_dag(g, clusters)
    ev = event_ids(g.n, clusters)
    edges, _ = _event_edges(g, ev)
    return EventDag(frozenset(ev[1:]), frozenset(edges))


def tempeval(gold, sys, clusters: Iterable[Iterable[int]] = ()) -> Score:
    """TempEval-style P/R between two event DAGs.

    P = |reduction(sys) ∩ closure(gold)| / |reduction(sys)| and R symmetric.
    Relation graphs are first propagated through ``clusters``; system arcs
    that turn into self-loops or cycles are dropped.
    """
    clusters = [set(c) for c in clusters]
    gold_dag = _as_dag(gold, clusters, strict=True)
    sys_dag = _as_dag(sys, clusters, strict=False)
    g_red, g_clo = transitive_reduction(gold_dag).edges, transitive_closure(gold_dag).edges
    s_red, s_clo = transitive_reduction(sys_dag).edges, transitive_closure(sys_dag).edges
    return Score(len(s_red & g_clo), len(s_red), len(g_red & s_clo), len(g_red))


# ---------------------------------------------------------------- baselines


def baseline_singleton(doc: Document) -> Clustering:
    return frozenset(frozenset([m.discourse_index]) for m in doc.mentions)


def baseline_matching(doc: Document) -> Clustering:
    """Cluster mentions that share event type and realis."""
    groups: dict[tuple[str, str], set[int]] = {}
    for m in doc.mentions:
        groups.setdefault((m.event_type, m.realis), set()).add(m.discourse_index)
    return frozenset(frozenset(g) for g in groups.values())


def gold_clustering(doc: Document) -> Clustering:
    return clustering(doc.cluster_sets(), range(1, doc.n + 1))


def prediction_clustering(doc: Document, pred: Prediction) -> Clustering:
    if pred.coref is None:
        raise ValueError(f"prediction for {doc.doc_id!r} has no coref field")
    return clustering(([doc.index_of(m) for m in c] for c in pred.coref), range(1, doc.n + 1))


def prediction_graph(doc: Document, pred: Prediction) -> RelationGraph:
    """System After links as a sequencing graph over discourse indices."""
    if pred.after is None:
        raise ValueError(f"prediction for {doc.doc_id!r} has no after field")
    arcs = set()
    for a, b in pred.after:
        i, j = doc.index_of(a), doc.index_of(b)
        if i == j:
            raise ValueError(f"prediction for {doc.doc_id!r} links mention {a!r} to itself")
        arcs.add((i, j, Label.FORWARD) if i < j else (j, i, Label.BACKWARD))
    return RelationGraph(doc.n, frozenset(arcs), Task.SEQUENCING)


def prediction_dag(doc: Document, pred: Prediction, clusters) -> EventDag:
    """System After links propagated through ``clusters``, dropping self-loops and cycles."""
    return _as_dag(prediction_graph(doc, pred), [set(c) for c in clusters], strict=False)


def gold_dag(doc: Document) -> EventDag:
    ev = event_ids(doc.n, doc.cluster_sets())
    return EventDag(frozenset(ev[1:]), frozenset((ev[a], ev[b]) for a, b in doc.after_pairs()))


# ---------------------------------------------------------------- reports


def _aggregate(scores: Sequence, aggregate: str) -> tuple[float, float, float]:
    if aggregate not in AGGREGATES:
        raise ValueError(f"aggregate must be one of {AGGREGATES}")
    if not scores:
        return 0.0, 0.0, 0.0
    if aggregate == "micro":
        total = scores[0]
        for s in scores[1:]:
            total = total + s
        return total.precision, total.recall, total.f1
    k = len(scores)
    return (sum(s.precision for s in scores) / k, sum(s.recall for s in scores) / k,
            sum(s.f1 for s in scores) / k)


@dataclass
class ScoreReport:
    """Per-metric (P, R, F1) in percent, rounded to 2 decimals."""

    task: Task
    rows: dict
    documents: int = 0
    aggregate: str = "micro"

    @property
    def avg(self) -> float | None:
        if self.task is not Task.COREF:
            return None
        return round(average_f(*(self.rows[m][2] for m in COREF_METRICS)), 2)

    def to_dict(self) -> dict:
        out = {
            "task": self.task.value,
            "aggregate": self.aggregate,
            "documents": self.documents,
            "metrics": {m: {"precision": p, "recall": r, "f1": f} for m, (p, r, f) in self.rows.items()},
        }
        if self.avg is not None:
            out["AVG"] = self.avg
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_text(self) -> str:
        lines = [f"{'metric':<8} {'P':>7} {'R':>7} {'F1':>7}"]
        for m, (p, r, f) in self.rows.items():
            lines.append(f"{m:<8} {p:7.2f} {r:7.2f} {f:7.2f}")
        if self.avg is not None:
            lines.append(f"{'AVG':<8} {'':>7} {'':>7} {self.avg:7.2f}")
        return "\n".join(lines)


def _rounded(p, r, f):
    return (round(p, 2), round(r, 2), round(f, 2))


def coref_report(pairs: Iterable[tuple[Clustering, Clustering]], aggregate: str = "micro") -> ScoreReport:
    """Score (gold, system) clustering pairs, one per document."""
    pairs = list(pairs)
    rows = {}
    for name in COREF_METRICS:
        scorer = COREF_SCORERS[name]
        rows[name] = _rounded(*_aggregate([scorer(g, s) for g, s in pairs], aggregate))
    return ScoreReport(Task.COREF, rows, len(pairs), aggregate)


def sequencing_report(pairs: Iterable[tuple[EventDag, EventDag]], aggregate: str = "micro") -> ScoreReport:
    """Score (gold, system) event DAG pairs, one per document."""
    pairs = list(pairs)
    scores = [tempeval(g, s) for g, s in pairs]
    return ScoreReport(Task.SEQUENCING, {"TempEval": _rounded(*_aggregate(scores, aggregate))},
                       len(pairs), aggregate)


def score_predictions(docs: Sequence[Document], preds: Mapping[str, Prediction], task: Task | str,
                      aggregate: str = "micro") -> ScoreReport:
    """Score predictions against gold documents; sequencing uses gold clusters."""
    task = Task(task)
    missing = [d.doc_id for d in docs if d.doc_id not in preds]
    if missing:
        raise ValueError(f"no prediction for documents {missing[:5]}")
    if task is Task.COREF:
        return coref_report(((gold_clustering(d), prediction_clustering(d, preds[d.doc_id])) for d in docs),
                            aggregate)
    return sequencing_report(((gold_dag(d), prediction_dag(d, preds[d.doc_id], d.cluster_sets())) for d in docs),
                             aggregate)
