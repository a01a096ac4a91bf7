"""Relation graphs over mentions, event-level DAG algebra, matching and loss."""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Hashable, Iterable, NamedTuple

import numpy as np

from . import _kernels


class GraphError(ValueError):
    pass


class Task(str, Enum):
    COREF = "coref"
    SEQUENCING = "sequencing"


class Label(str, Enum):
    COREF = "coref"
    FORWARD = "after.forward"
    BACKWARD = "after.backward"
    ROOT = "root"


_ALLOWED = {
    Task.COREF: {Label.COREF, Label.ROOT},
    Task.SEQUENCING: {Label.FORWARD, Label.BACKWARD, Label.ROOT},
}


class Arc(NamedTuple):
    source: int
    target: int
    label: Label


@dataclass(frozen=True)
class RelationGraph:
    n: int
    arcs: frozenset
    task: Task

    def __post_init__(self):
        object.__setattr__(self, "arcs", frozenset(Arc(a[0], a[1], Label(a[2])) for a in self.arcs))
        object.__setattr__(self, "task", Task(self.task))
        allowed = _ALLOWED[self.task]
        for a in self.arcs:
            if not 0 <= a.source < a.target <= self.n:
                raise GraphError(f"arc {tuple(a)} violates 0 <= source < target <= {self.n}")
            if a.label not in allowed:
                raise GraphError(f"label {a.label.value} not allowed for task {self.task.value}")
            if (a.label is Label.ROOT) != (a.source == 0):
                raise GraphError(f"arc {tuple(a)}: root label iff source is 0")

    @classmethod
    def all_root(cls, n: int, task: Task) -> "RelationGraph":
        return cls(n, frozenset(Arc(0, j, Label.ROOT) for j in range(1, n + 1)), task)

    def incoming(self, j: int) -> list[Arc]:
        return sorted(a for a in self.arcs if a.target == j)

    def with_roots(self) -> "RelationGraph":
        """Attach every mention with no incoming arc to the root."""
        linked = {a.target for a in self.arcs}
        extra = {Arc(0, j, Label.ROOT) for j in range(1, self.n + 1) if j not in linked}
        if not extra:
            return self
        return RelationGraph(self.n, self.arcs | extra, self.task)

    def link_arcs(self) -> list[Arc]:
        return sorted(a for a in self.arcs if a.label is not Label.ROOT)


@dataclass(frozen=True)
class EventDag:
    nodes: frozenset
    edges: frozenset

    def __post_init__(self):
        object.__setattr__(self, "nodes", frozenset(self.nodes))
        object.__setattr__(self, "edges", frozenset(tuple(e) for e in self.edges))
        missing = {x for e in self.edges for x in e} - self.nodes
        if missing:
            object.__setattr__(self, "nodes", self.nodes | missing)

    @classmethod
    def from_edges(cls, edges: Iterable[tuple[Hashable, Hashable]], nodes: Iterable = ()) -> "EventDag":
        edges = frozenset(tuple(e) for e in edges)
        return cls(frozenset(nodes) | {x for e in edges for x in e}, edges)


# ---------------------------------------------------------------- events


def event_ids(n: int, clusters: Iterable[Iterable[int]] = ()) -> list[int]:
    """Map discourse index -> canonical event (smallest index in its cluster).

    Position 0 is the root and maps to itself. Mentions outside every cluster
    are singleton events.
    """
    ev = list(range(n + 1))
    owner: dict[int, int] = {}
    for ci, cluster in enumerate(clusters):
        members = sorted(cluster)
        if not members:
            continue
        rep = members[0]
        for m in members:
            if not 1 <= m <= n:
                raise GraphError(f"cluster member {m} outside 1..{n}")
            if m in owner:
                raise GraphError(f"mention {m} belongs to clusters {owner[m]} and {ci}")
            owner[m] = ci
            ev[m] = rep
    return ev


def _arc_edge(arc: Arc, ev: list[int]) -> tuple[int, int]:
    if arc.label is Label.FORWARD:
        return ev[arc.source], ev[arc.target]
    return ev[arc.target], ev[arc.source]


def _event_edges(g: RelationGraph, ev: list[int]):
    """Propagate After arcs to events; return (edges, arcs dropped as self-loops or cycles)."""
    events = sorted(set(ev[1:]))
    pos = {e: k for k, e in enumerate(events)}
    reach = np.zeros((len(events), len(events)), dtype=np.bool_)
    edges: set[tuple[int, int]] = set()
    bad: list[Arc] = []
    for arc in g.link_arcs():
        a, b = _arc_edge(arc, ev)
        if a == b or reach[pos[b], pos[a]]:
            bad.append(arc)
            continue
        if (a, b) not in edges:
            edges.add((a, b))
            _kernels.add_edge(reach, pos[a], pos[b])
    return edges, bad


def to_event_dag(g: RelationGraph, clusters: Iterable[Iterable[int]] = (), strict: bool = True) -> EventDag:
    """Propagate the After arcs of a sequencing graph through coreference clusters.

    With ``strict`` a propagated self-loop or cycle raises :class:`GraphError`;
    otherwise offending arcs are skipped in sorted arc order.
    """
    if g.task is not Task.SEQUENCING:
        raise GraphError("to_event_dag needs a sequencing graph")
    clusters = [set(c) for c in clusters]
    ev = event_ids(g.n, clusters)
    edges, bad = _event_edges(g, ev)
    if bad and strict:
        arc = bad[0]
        a, b = _arc_edge(arc, ev)
        if a == b:
            members = sorted(m for m in range(1, g.n + 1) if ev[m] == a)
            raise GraphError(f"arc {tuple(arc)[:2]} links two mentions of cluster {members}")
        raise GraphError(f"arc {tuple(arc)[:2]} closes an event-level cycle")
    return EventDag(frozenset(ev[1:]), frozenset(edges))


# ---------------------------------------------------------------- closure / reduction


def _to_matrix(d: EventDag):
    nodes = sorted(d.nodes)
    pos = {x: k for k, x in enumerate(nodes)}
    adj = np.zeros((len(nodes), len(nodes)), dtype=np.bool_)
    for a, b in d.edges:
        adj[pos[a], pos[b]] = True
    return nodes, adj


def _from_matrix(nodes, mat) -> frozenset:
    rows, cols = np.nonzero(mat)
    return frozenset((nodes[r], nodes[c]) for r, c in zip(rows.tolist(), cols.tolist()))


def _closed(d: EventDag):
    nodes, adj = _to_matrix(d)
    closed = _kernels.closure(adj)
    if closed.shape[0] and closed.diagonal().any():
        raise GraphError("graph has a cycle")
    return nodes, closed


def transitive_closure(d: EventDag) -> EventDag:
    nodes, closed = _closed(d)
    return EventDag(d.nodes, _from_matrix(nodes, closed))


def transitive_reduction(d: EventDag) -> EventDag:
    nodes, closed = _closed(d)
    return EventDag(d.nodes, _from_matrix(nodes, _kernels.reduce_closed(closed)))


def is_acyclic(d: EventDag) -> bool:
    try:
        _closed(d)
    except GraphError:
        return False
    return True


# ---------------------------------------------------------------- inference, matching, loss


def coref_partition(g: RelationGraph) -> frozenset:
    """Connected components of the Coref arcs, singletons included."""
    parent = list(range(g.n + 1))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a in g.arcs:
        if a.label is Label.COREF:
            ra, rb = find(a.source), find(a.target)
            if ra != rb:
                parent[max(ra, rb)] = min(ra, rb)
    groups: dict[int, set[int]] = {}
    for m in range(1, g.n + 1):
        groups.setdefault(find(m), set()).add(m)
    return frozenset(frozenset(s) for s in groups.values())


def inferred_graph(g: RelationGraph, clusters: Iterable[Iterable[int]] = ()):
    """Closure of the propagated event DAG (sequencing) or the induced partition (coreference)."""
    if g.task is Task.COREF:
        return coref_partition(g)
    return transitive_closure(to_event_dag(g, clusters))


class _View:
    """What a graph implies, used to decide whether an arc is inferable from it."""

    def __init__(self, g: RelationGraph, ev: list[int] | None):
        self.graph = g.with_roots()
        self.ev = ev
        if g.task is Task.COREF:
            comp = [0] * (g.n + 1)
            for k, block in enumerate(sorted(coref_partition(g), key=min)):
                for m in block:
                    comp[m] = k + 1
            self.comp = comp
            self.clean = True
        else:
            edges, bad = _event_edges(g, ev)
            self.clean = not bad
            closed = transitive_closure(EventDag(frozenset(ev[1:]), frozenset(edges)))
            self.closure = closed.edges

    def implies(self, arc: Arc) -> bool:
        if arc.label is Label.ROOT:
            return False
        if arc.label is Label.COREF:
            return self.comp[arc.source] == self.comp[arc.target]
        a, b = _arc_edge(arc, self.ev)
        return a != b and (a, b) in self.closure

    def signature(self):
        if self.graph.task is Task.COREF:
            return frozenset(
                frozenset(m for m in range(1, len(self.comp)) if self.comp[m] == k)
                for k in set(self.comp[1:])
            )
        return self.closure


def _views(system: RelationGraph, gold: RelationGraph, clusters):
    if system.task is not gold.task or system.n != gold.n:
        raise GraphError("graphs differ in task or mention count")
    ev = event_ids(gold.n, clusters) if gold.task is Task.SEQUENCING else None
    return _View(system, ev), _View(gold, ev)


def matches(system: RelationGraph, gold: RelationGraph, clusters: Iterable[Iterable[int]] = ()) -> bool:
    """True iff both graphs have the same inferred graph.

    A system graph with arcs that propagate into self-loops or cycles never matches.
    """
    sv, gv = _views(system, gold, list(map(set, clusters)))
    return sv.clean and gv.clean and sv.signature() == gv.signature()


def inferable_arcs(system: RelationGraph, gold: RelationGraph, clusters=()) -> set[Arc]:
    """System arcs absent from ``gold`` but implied by its inferred graph."""
    _, gv = _views(system, gold, list(map(set, clusters)))
    return {a for a in system.arcs - gv.graph.arcs if gv.implies(a)}


def loss(gold: RelationGraph, system: RelationGraph, clusters: Iterable[Iterable[int]] = ()) -> int:
    """Count differing arcs; a wrong root attachment costs 2.

    System arcs implied by the gold inferred graph cost nothing, and so do gold
    arcs implied by the system inferred graph, which makes the loss zero
    exactly when the graphs match.
    """
    sv, gv = _views(system, gold, list(map(set, clusters)))
    sys_arcs, gold_arcs = sv.graph.arcs, gv.graph.arcs
    total = 0
    for arc in sorted(sys_arcs - gold_arcs):
        if arc.label is Label.ROOT:
            needed = gv.graph.incoming(arc.target)
            total += 2 if any(not sv.implies(a) for a in needed) else 0
        elif not gv.implies(arc):
            total += 1
    for arc in sorted(gold_arcs - sys_arcs):
        if arc.label is Label.ROOT:
            taken = sv.graph.incoming(arc.target)
            total += 1 if any(not gv.implies(a) for a in taken) else 0
        elif not sv.implies(arc):
            total += 1
    return total
