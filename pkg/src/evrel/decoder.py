"""Antecedent decoding: latent trees for coreference, latent graphs for sequencing."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from . import _kernels
from .corpus import Document
from .features import ArcScores, ArcTable, WeightVector
from .relgraph import Arc, Label, RelationGraph, Task, event_ids


class DecodeError(RuntimeError):
    pass


@dataclass(frozen=True)
class AntecedentSets:
    """Candidate antecedents per mention; ``sets[j]`` for j in 1..n (``sets[0]`` unused).

    ``labels`` optionally pins the label allowed on a pair ``(i, j)``.
    """

    sets: tuple[tuple[int, ...], ...]
    labels: dict = field(default_factory=dict)

    def __post_init__(self):
        for j, cands in enumerate(self.sets):
            if j == 0:
                continue
            for i in cands:
                if not 0 <= i < j:
                    raise ValueError(f"antecedent {i} of mention {j} outside 0..{j - 1}")

    @property
    def n(self) -> int:
        return len(self.sets) - 1

    @classmethod
    def full(cls, n: int) -> "AntecedentSets":
        return cls(tuple([()] + [tuple(range(j)) for j in range(1, n + 1)]))


def _event_index(doc: Document, clusters=None) -> list[int]:
    return event_ids(doc.n, doc.cluster_sets() if clusters is None else clusters)


def gold_event_edges(doc: Document) -> set[tuple[int, int]]:
    ev = _event_index(doc)
    return {(ev[a], ev[b]) for a, b in doc.after_pairs()}


def gold_graph(doc: Document, task: Task | str) -> RelationGraph:
    """The annotated relations written as a decoding graph."""
    task = Task(task)
    arcs = set()
    if task is Task.COREF:
        for cluster in doc.cluster_sets():
            members = sorted(cluster)
            arcs.update(Arc(a, b, Label.COREF) for a, b in zip(members, members[1:]))
    else:
        for a, b in doc.after_pairs():
            if a < b:
                arcs.add(Arc(a, b, Label.FORWARD))
            else:
                arcs.add(Arc(b, a, Label.BACKWARD))
    return RelationGraph(doc.n, frozenset(arcs), task).with_roots()


def _scores(doc, w, task, table, scores) -> ArcScores:
    if scores is not None:
        return scores
    if table is None:
        if not isinstance(w, WeightVector):
            w = WeightVector(dict(w))
        table = ArcTable(doc, task, w, grow=False)
    return table.scores(w)


# ---------------------------------------------------------------- coreference


def _lat(n: int, scores: ArcScores, cands: AntecedentSets) -> RelationGraph:
    arcs = []
    for j in range(1, n + 1):
        allowed = cands.sets[j]
        best, best_i = -np.inf, None
        for i in sorted((x for x in allowed if x > 0), reverse=True):
            s = scores.pair[i, j, 0]
            if s > best:
                best, best_i = s, i
        if 0 in allowed and (best_i is None or scores.root[j] > best):
            arcs.append(Arc(0, j, Label.ROOT))
        elif best_i is None:
            raise DecodeError(f"mention {j} has no candidate antecedent")
        else:
            arcs.append(Arc(best_i, j, Label.COREF))
    return RelationGraph(n, frozenset(arcs), Task.COREF)


def decode_coref(doc: Document, w=None, candidates: AntecedentSets | None = None, *,
                 table: ArcTable | None = None, scores: ArcScores | None = None) -> RelationGraph:
    """Attach each mention to its best antecedent or to the root.

    Ties go to the closest antecedent; the root loses ties.
    """
    scores = _scores(doc, w, Task.COREF, table, scores)
    return _lat(doc.n, scores, candidates or AntecedentSets.full(doc.n))


# ---------------------------------------------------------------- sequencing


def _edge(i: int, j: int, label: Label, ev: list[int]) -> tuple[int, int]:
    return (ev[i], ev[j]) if label is Label.FORWARD else (ev[j], ev[i])


def _lag(n: int, scores: ArcScores, cands: AntecedentSets, ev: list[int]) -> RelationGraph:
    return _graph(n, _greedy(n, scores, cands, ev))


def _graph(n: int, chosen: dict) -> RelationGraph:
    arcs = frozenset(Arc(i, j, label) for (i, j), label in chosen.items())
    return RelationGraph(n, arcs, Task.SEQUENCING).with_roots()


def _greedy(n: int, scores: ArcScores, cands: AntecedentSets, ev: list[int]) -> dict:
    """Left-to-right best-first pass; returns ``{(i, j): label}``."""
    events = sorted(set(ev[1:]))
    pos = {e: k for k, e in enumerate(events)}
    reach = np.zeros((len(events), len(events)), dtype=np.bool_)
    accepted: list[tuple[Arc, tuple[int, int]]] = []
    for j in range(1, n + 1):
        allowed = cands.sets[j]
        threshold = scores.root[j] if 0 in allowed else -np.inf
        options = []
        for i in allowed:
            if i == 0:
                continue
            pinned = cands.labels.get((i, j))
            best, best_label = -np.inf, None
            for slot, label in enumerate(scores.labels):
                if pinned is not None and label is not pinned:
                    continue
                s = scores.pair[i, j, slot]
                if best_label is None or s > best:
                    best, best_label = s, label
            if best_label is not None and best > threshold:
                options.append((best, i, best_label))
        # best first; equal scores prefer the closer antecedent
        options.sort(key=lambda o: (-o[0], -o[1]))
        for _, i, label in options:
            a, b = _edge(i, j, label, ev)
            pa, pb = pos[a], pos[b]
            if a == b or reach[pb, pa]:
                continue  # cycle
            if reach[pa, pb]:
                continue  # already implied
            _kernels.add_edge(reach, pa, pb)
            accepted.append((Arc(i, j, label), (a, b)))
    kept = _kernels.reduce_closed(reach)
    return {(arc.source, arc.target): arc.label for arc, (a, b) in accepted if kept[pos[a], pos[b]]}


class _Search:
    """Score bookkeeping and structure checks for the improvement pass."""

    def __init__(self, n: int, scores: ArcScores, cands: AntecedentSets, ev: list[int]):
        self.n, self.scores, self.ev = n, scores, ev
        self.slot = {label: k for k, label in enumerate(scores.labels)}
        events = sorted(set(ev[1:]))
        self.pos = {e: k for k, e in enumerate(events)}
        self.size = len(events)
        self.moves: list[tuple[tuple[int, int], tuple]] = []
        self.edge_of: dict = {}
        for j in range(1, n + 1):
            for i in cands.sets[j]:
                if i == 0:
                    continue
                pinned = cands.labels.get((i, j))
                labels = tuple(scores.labels) if pinned is None else (pinned,)
                self.moves.append(((i, j), (None,) + labels))
                for label in labels:
                    a, b = _edge(i, j, label, ev)
                    self.edge_of[(i, j), label] = (self.pos[a], self.pos[b])
        self.moves_index = {pair: k for k, (pair, _) in enumerate(self.moves)}
        self.root_ok = [True] + [0 in cands.sets[j] for j in range(1, n + 1)]
        self.must_link = [j for j in range(1, n + 1) if not self.root_ok[j]]

    def arc(self, pair, label) -> float:
        return 0.0 if label is None else float(self.scores.pair[pair[0], pair[1], self.slot[label]])

    def total(self, chosen: dict) -> float:
        linked = {j for _, j in chosen}
        s = sum(self.arc(p, label) for p, label in chosen.items())
        return s + sum(float(self.scores.root[j]) for j in range(1, self.n + 1) if j not in linked)

    def edges(self, chosen: dict) -> tuple[np.ndarray, np.ndarray]:
        if not chosen:
            return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
        ab = np.array([self.edge_of[item] for item in chosen.items()], dtype=np.int64)
        return ab[:, 0], ab[:, 1]

    def closure(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        adj = np.zeros((self.size, self.size), dtype=np.bool_)
        adj[xs, ys] = True
        return _kernels.closure(adj)

    def valid(self, chosen: dict) -> bool:
        """Acyclic and transitively reduced at event level, one arc per event edge."""
        if self.must_link:
            linked = {j for _, j in chosen}
            if any(j not in linked for j in self.must_link):
                return False
        xs, ys = self.edges(chosen)
        if (xs == ys).any():
            return False
        adj = np.zeros((self.size, self.size), dtype=np.bool_)
        adj[xs, ys] = True
        if int(adj.sum()) != len(xs):
            return False  # two arcs on one event edge
        closed = _kernels.closure(adj)
        if closed.diagonal().any():
            return False
        return bool((_kernels.reduce_closed(closed) == adj).all())


def _indegree(chosen: dict) -> dict:
    indeg: dict[int, int] = {}
    for _, j in chosen:
        indeg[j] = indeg.get(j, 0) + 1
    return indeg


def _gain_greedy(search: _Search) -> dict:
    """Repeatedly add the arc with the largest net gain, dropping the arcs it makes redundant."""
    chosen: dict = {}
    closed = np.zeros((search.size, search.size), dtype=np.bool_)
    root = search.scores.root
    while True:
        indeg = _indegree(chosen)
        edges = {pair: search.edge_of[pair, label] for pair, label in chosen.items()}
        best, best_move = 1e-9, None
        for pair, labels in search.moves:
            if pair in chosen:
                continue
            for label in labels[1:]:
                a, b = search.edge_of[pair, label]
                if a == b or closed[b, a] or closed[a, b]:
                    continue
                above = closed[:, a].copy()
                above[a] = True
                below = closed[b, :].copy()
                below[b] = True
                dropped = [q for q, (x, y) in edges.items() if above[x] and below[y]]
                lost: dict[int, int] = {}
                gain = search.arc(pair, label)
                for q in dropped:
                    gain -= search.arc(q, chosen[q])
                    lost[q[1]] = lost.get(q[1], 0) + 1
                j = pair[1]
                if not indeg.get(j):
                    gain -= root[j]
                feasible = True
                for m, k in lost.items():
                    if m != j and indeg[m] == k:
                        if not search.root_ok[m]:
                            feasible = False
                        gain += root[m]
                if feasible and gain > best:
                    best, best_move = gain, (pair, label, dropped)
        if best_move is None:
            return chosen
        pair, label, dropped = best_move
        for q in dropped:
            del chosen[q]
        chosen[pair] = label
        closed = search.closure(*search.edges(chosen))


def _climb(search: _Search, chosen: dict) -> dict:
    """Hill-climb over one-pair changes and pairs of changes that touch an existing arc.

    Each round takes the largest strictly improving change that leaves a valid structure.
    """
    chosen = dict(chosen)
    root = np.asarray(search.scores.root, dtype=float)
    while True:
        indeg = np.zeros(search.n + 1, dtype=np.int64)
        for _, j in chosen:
            indeg[j] += 1
        single = [(pair, label) for pair, labels in search.moves
                  for label in labels if chosen.get(pair) is not label]
        if not single:
            return chosen
        pair_of = np.array([search.moves_index[p] for p, _ in single])
        tgt = np.array([p[1] for p, _ in single])
        old = [chosen.get(p) for p, _ in single]
        dscore = np.array([search.arc(p, lab) - search.arc(p, o) for (p, lab), o in zip(single, old)])
        dcount = np.array([(lab is not None) - (o is not None) for (_, lab), o in zip(single, old)])

        def root_adj(j, d):
            before = indeg[j]
            after = before + d
            return np.where((before == 0) & (after > 0), -root[j],
                            np.where((before > 0) & (after == 0), root[j], 0.0))

        own = dscore + root_adj(tgt, dcount)
        cands = [(float(own[k]), (single[k],)) for k in np.flatnonzero(own > 1e-9)]
        for f in np.flatnonzero(np.array([p in chosen for p, _ in single])):
            other = pair_of != pair_of[f]
            same = tgt == tgt[f]
            joint = dscore[f] + dscore + np.where(
                same, root_adj(tgt, dcount + dcount[f]), own - dscore + root_adj(tgt[f], dcount[f]))
            joint = np.where(other, joint, -np.inf)
            cands.extend((float(joint[k]), (single[f], single[k])) for k in np.flatnonzero(joint > 1e-9))
        cands.sort(key=lambda c: -c[0])
        cache: dict = {}
        for _, changes in cands:
            if _fits(search, chosen, changes, cache):
                chosen = _apply(chosen, changes)
                break
        else:
            return chosen


def _fits(search: _Search, chosen: dict, changes, cache: dict) -> bool:
    """Whether applying ``changes`` to a valid structure leaves a valid one.

    Dropping arcs never creates a cycle or a redundant arc, and adding arcs
    never removes one, so it is enough to add the new arcs one at a time to
    the structure left after the removals. Closures are cached per removal set.
    """
    removed = frozenset(p for p, _ in changes if p in chosen)
    added = [(p, lab) for p, lab in changes if lab is not None]
    if search.must_link:
        linked = {j for p, _ in chosen.items() if p not in removed for j in (p[1],)}
        linked.update(p[1] for p, _ in added)
        if any(j not in linked for j in search.must_link):
            return False
    if removed not in cache:
        xs, ys = search.edges({p: lab for p, lab in chosen.items() if p not in removed})
        cache[removed] = (search.closure(xs, ys), xs, ys)
    closed, xs, ys = cache[removed]
    if len(added) > 1:
        closed = closed.copy()
    for k, item in enumerate(added):
        a, b = search.edge_of[item]
        if not _kernels.can_add(closed, xs, ys, a, b):
            return False
        if k + 1 < len(added):
            _kernels.add_edge(closed, a, b)
            xs, ys = np.append(xs, a), np.append(ys, b)
    return True


def _reinsert(search: _Search, chosen: dict) -> dict | None:
    """Best strictly improving re-linking of a single mention, or None.

    For each mention the arcs touching it are removed and added back greedily,
    best first after a forced first arc (each candidate in turn, or none); the
    best feasible prefix over all mentions and first arcs wins.
    """
    root = np.asarray(search.scores.root, dtype=float)
    must = np.zeros(search.n + 1, dtype=np.bool_)
    must[search.must_link] = True
    base = search.total(chosen)
    best, best_state = base + 1e-9, None
    for k in range(1, search.n + 1):
        rest = {p: lab for p, lab in chosen.items() if k not in p}
        opts = sorted(
            ((search.arc(p, lab), p, lab) for p, labels in search.moves if k in p for lab in labels[1:]),
            key=lambda o: (-o[0], -o[1][0], -o[1][1], search.slot[o[2]]),
        )
        if not opts:
            continue
        xs, ys = search.edges(rest)
        ends = np.array([search.edge_of[p, lab] for _, p, lab in opts], dtype=np.int64)
        linked = np.zeros(search.n + 1, dtype=np.bool_)
        linked[[j for _, j in rest]] = True
        score, acc = _kernels.reinsert_scan(
            search.closure(xs, ys), xs, ys, ends[:, 0].copy(), ends[:, 1].copy(),
            np.array([search.moves_index[p] for _, p, _ in opts], dtype=np.int64),
            np.array([o[0] for o in opts]), np.array([p[1] for _, p, _ in opts], dtype=np.int64),
            linked, root, must, search.total(rest), best,
        )
        if score > best:
            best = score
            best_state = {**rest, **{opts[o][1]: opts[o][2] for o in acc.tolist()}}
    if best_state is not None and search.total(best_state) > base + 1e-9:
        return best_state
    return None


def _improve(search: _Search, chosen: dict) -> dict:
    """Alternate hill-climbing with single-mention re-linking until neither improves."""
    while True:
        chosen = _climb(search, chosen)
        nxt = _reinsert(search, chosen)
        if nxt is None:
            return chosen
        chosen = nxt


def _apply(chosen: dict, changes) -> dict:
    out = dict(chosen)
    for pair, label in changes:
        if label is None:
            out.pop(pair, None)
        else:
            out[pair] = label
    return out


SEARCHES = ("greedy", "refine")


def decode_lag(doc: Document, w=None, candidates: AntecedentSets | None = None, *,
               clusters: Iterable[Iterable[int]] = (), table: ArcTable | None = None,
               scores: ArcScores | None = None, search: str = "refine") -> RelationGraph:
    """Decode a minimum After graph.

    The greedy pass visits mentions left to right; every arc scoring strictly
    above the mention's root arc is tried best first and accepted unless it
    closes an event-level cycle or is already implied, and a transitive
    reduction then drops arcs made redundant by later acceptances.

    With ``search="refine"`` the greedy result and a net-gain greedy result
    are both hill-climbed (changes to one pair, or to an existing arc plus one
    other pair) and the higher-scoring one is returned. Every accepted change
    raises the score and keeps the structure acyclic and reduced.
    ``clusters`` sets event identity for the checks (singletons by default).
    """
    if search not in SEARCHES:
        raise ValueError(f"search must be one of {SEARCHES}, got {search!r}")
    scores = _scores(doc, w, Task.SEQUENCING, table, scores)
    ev = event_ids(doc.n, [set(c) for c in clusters])
    cands = candidates or AntecedentSets.full(doc.n)
    first = _greedy(doc.n, scores, cands, ev)
    if search == "greedy":
        return _graph(doc.n, first)
    state = _Search(doc.n, scores, cands, ev)
    best = max(
        (_improve(state, start) for start in (first, _gain_greedy(state))),
        key=state.total,  # max keeps the first on ties: the refined greedy result
    )
    return _graph(doc.n, best)


# ---------------------------------------------------------------- gold-constrained decoding


def _gold_label(ev, edges, a: int, b: int):
    """Label of arc a<b consistent with the gold event edges, or None."""
    if (ev[a], ev[b]) in edges:
        return Label.FORWARD
    if (ev[b], ev[a]) in edges:
        return Label.BACKWARD
    return None


def select_latent_mentions(doc: Document, w=None, *, table: ArcTable | None = None,
                           scores: ArcScores | None = None) -> list[int]:
    """Pick one representative mention per event that takes part in an After link.

    Events are visited in order of their first mention; each takes the mention
    whose gold-labelled arcs to already chosen representatives score highest,
    ties going to the earliest mention.
    """
    scores = _scores(doc, w, Task.SEQUENCING, table, scores)
    ev = _event_index(doc)
    edges = gold_event_edges(doc)
    linked = {e for edge in edges for e in edge}
    members: dict[int, list[int]] = {}
    for m in range(1, doc.n + 1):
        if ev[m] in linked:
            members.setdefault(ev[m], []).append(m)
    chosen: list[int] = []
    for event in sorted(members, key=lambda e: members[e][0]):
        best, best_m = -np.inf, None
        for m in members[event]:
            total = 0.0
            for r in chosen:
                a, b = (r, m) if r < m else (m, r)
                label = _gold_label(ev, edges, a, b)
                if label is not None:
                    total += scores(Arc(a, b, label))
            if best_m is None or total > best:
                best, best_m = total, m
        chosen.append(best_m)
    return sorted(chosen)


def gold_antecedents(doc: Document, task: Task | str,
                     representatives: Iterable[int] | None = None) -> AntecedentSets:
    """Antecedent sets allowed by the gold annotation (root only when nothing else is)."""
    task = Task(task)
    n = doc.n
    sets: list[tuple[int, ...]] = [()]
    labels: dict = {}
    if task is Task.COREF:
        ev = _event_index(doc)
        for j in range(1, n + 1):
            earlier = tuple(i for i in range(1, j) if ev[i] == ev[j])
            sets.append(earlier or (0,))
        return AntecedentSets(tuple(sets))
    ev = _event_index(doc)
    edges = gold_event_edges(doc)
    reps = set(range(1, n + 1) if representatives is None else representatives)
    for j in range(1, n + 1):
        cands = []
        if j in reps:
            for i in range(1, j):
                if i not in reps:
                    continue
                label = _gold_label(ev, edges, i, j)
                if label is not None:
                    cands.append(i)
                    labels[(i, j)] = label
        sets.append(tuple(cands) or (0,))
    return AntecedentSets(tuple(sets), labels)


def decode_gold(doc: Document, w=None, task: Task | str = Task.COREF, *,
                table: ArcTable | None = None, scores: ArcScores | None = None) -> RelationGraph:
    """Highest-scoring structure among those consistent with the gold annotation."""
    task = Task(task)
    if doc.gold is None:
        raise DecodeError(f"doc {doc.doc_id!r} has no gold annotation")
    scores = _scores(doc, w, task, table, scores)
    if task is Task.COREF:
        return _lat(doc.n, scores, gold_antecedents(doc, task))
    reps = select_latent_mentions(doc, scores=scores)
    cands = gold_antecedents(doc, task, reps)
    return _lag(doc.n, scores, cands, _event_index(doc))


def decode(doc: Document, w=None, task: Task | str = Task.COREF, *, clusters=(),
           table: ArcTable | None = None, scores: ArcScores | None = None,
           search: str = "refine") -> RelationGraph:
    task = Task(task)
    if task is Task.COREF:
        return decode_coref(doc, w, table=table, scores=scores)
    return decode_lag(doc, w, clusters=clusters, table=table, scores=scores, search=search)
