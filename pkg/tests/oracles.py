"""Slow, obviously-correct reference computations used to check the library."""
from __future__ import annotations

import itertools
from fractions import Fraction
from functools import lru_cache

import numpy as np


# ---------------------------------------------------------------- graphs


def reach_dfs(nodes, edges) -> set:
    """All (a, b) with b reachable from a by a non-empty path, one DFS per node."""
    succ = {v: [] for v in nodes}
    for a, b in edges:
        succ[a].append(b)
    out = set()
    for start in nodes:
        stack = list(succ[start])
        seen = set()
        while stack:
            v = stack.pop()
            if v in seen:
                continue
            seen.add(v)
            out.add((start, v))
            stack.extend(succ[v])
    return out


def acyclic_kahn(nodes, edges) -> bool:
    indeg = {v: 0 for v in nodes}
    succ = {v: [] for v in nodes}
    for a, b in set(edges):
        indeg[b] += 1
        succ[a].append(b)
    ready = [v for v in nodes if indeg[v] == 0]
    done = 0
    while ready:
        v = ready.pop()
        done += 1
        for w in succ[v]:
            indeg[w] -= 1
            if indeg[w] == 0:
                ready.append(w)
    return done == len(nodes)


def reduction_by_definition(nodes, edges) -> set:
    """Closure edges with no intermediate node on any path between the ends."""
    clo = reach_dfs(nodes, edges)
    return {(a, b) for a, b in clo if not any((a, c) in clo and (c, b) in clo for c in nodes)}


def no_proper_subset_keeps_closure(nodes, edges) -> bool:
    edges = list(edges)
    target = reach_dfs(nodes, edges)
    for k in range(len(edges)):
        for sub in itertools.combinations(edges, k):
            if reach_dfs(nodes, sub) == target:
                return False
    return True


def no_single_edge_removable(nodes, edges) -> bool:
    """Minimality via single removals; equivalent to the subset check since closure is monotone."""
    edges = list(edges)
    target = reach_dfs(nodes, edges)
    return all(reach_dfs(nodes, edges[:k] + edges[k + 1:]) != target for k in range(len(edges)))


def all_dags(n: int):
    """Every labeled DAG on nodes 0..n-1 (each pair: none, a->b or b->a; cycles filtered)."""
    nodes = list(range(n))
    pairs = list(itertools.combinations(nodes, 2))
    for choice in itertools.product((0, 1, 2), repeat=len(pairs)):
        edges = [(a, b) if c == 1 else (b, a) for (a, b), c in zip(pairs, choice) if c]
        if acyclic_kahn(nodes, edges):
            yield nodes, edges


def random_dag(rng, n: int, density: float):
    order = list(rng.permutation(n))
    edges = [(order[a], order[b]) for a in range(n) for b in range(a + 1, n) if rng.random() < density]
    return list(range(n)), [(int(a), int(b)) for a, b in edges]


# ---------------------------------------------------------------- partitions


def set_partitions(items):
    items = list(items)
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in set_partitions(rest):
        for k in range(len(part)):
            yield part[:k] + [[first] + part[k]] + part[k + 1:]
        yield [[first]] + part


def _components(members, linked) -> int:
    parent = {m: m for m in members}

    def find(x):
        while parent[x] != x:
            x = parent[x]
        return x

    for a, b in itertools.combinations(members, 2):
        if linked(a, b):
            parent[find(a)] = find(b)
    return len({find(m) for m in members})


def muc_oracle(gold, sys):
    """Recall: for each key cluster, links kept = |K| minus its components under system links."""
    g = {m: k for k, c in enumerate(gold) for m in c}
    s = {m: k for k, c in enumerate(sys) for m in c}

    def side(key, other):
        num = den = 0
        for c in key:
            c = list(c)
            num += len(c) - _components(c, lambda a, b: other[a] == other[b])
            den += len(c) - 1
        return Fraction(num, den) if den else Fraction(0)

    return side(sys, g), side(gold, s)  # precision, recall


def b3_oracle(gold, sys):
    g = {m: set(c) for c in gold for m in c}
    s = {m: set(c) for c in sys for m in c}
    mentions = list(g)
    if not mentions:
        return Fraction(0), Fraction(0)
    p = sum(Fraction(len(g[m] & s[m]), len(s[m])) for m in mentions) / len(mentions)
    r = sum(Fraction(len(g[m] & s[m]), len(g[m])) for m in mentions) / len(mentions)
    return p, r


def ceaf_oracle(gold, sys):
    """Best one-to-one alignment by dynamic programming over subsets of system clusters."""
    keys = [frozenset(c) for c in gold]
    resps = [frozenset(c) for c in sys]
    if not keys or not resps:
        return Fraction(0), Fraction(0)
    phi = [[Fraction(2 * len(k & r), len(k) + len(r)) for r in resps] for k in keys]

    @lru_cache(maxsize=None)
    def best(i, used):
        if i == len(keys):
            return Fraction(0)
        out = best(i + 1, used)  # key i left unaligned
        for j in range(len(resps)):
            if not used >> j & 1:
                out = max(out, phi[i][j] + best(i + 1, used | 1 << j))
        return out

    total = best(0, 0)
    return total / len(resps), total / len(keys)


def ceaf_permutation_oracle(gold, sys):
    keys = [frozenset(c) for c in gold]
    resps = [frozenset(c) for c in sys]
    small, large = (keys, resps) if len(keys) <= len(resps) else (resps, keys)
    best = 0.0
    for perm in itertools.permutations(range(len(large)), len(small)):
        best = max(best, sum(2 * len(small[i] & large[p]) / (len(small[i]) + len(large[p]))
                             for i, p in enumerate(perm)))
    return best


def blanc_oracle(gold, sys):
    """Precision, recall and F from explicit pair sets, in percent."""
    g = {m: k for k, c in enumerate(gold) for m in c}
    s = {m: k for k, c in enumerate(sys) for m in c}
    pairs = set(itertools.combinations(sorted(g), 2))
    gl = {p for p in pairs if g[p[0]] == g[p[1]]}
    sl = {p for p in pairs if s[p[0]] == s[p[1]]}
    gn, sn = pairs - gl, pairs - sl

    def component(gold_set, sys_set):
        if not gold_set and not sys_set:
            return Fraction(1), Fraction(1), Fraction(1)
        p = Fraction(len(gold_set & sys_set), len(sys_set)) if sys_set else Fraction(0)
        r = Fraction(len(gold_set & sys_set), len(gold_set)) if gold_set else Fraction(0)
        f = 2 * p * r / (p + r) if p + r else Fraction(0)
        return p, r, f

    c, n = component(gl, sl), component(gn, sn)
    return tuple(100 * (c[k] + n[k]) / 2 for k in range(3))


def tempeval_oracle(gold_nodes, gold_edges, sys_nodes, sys_edges):
    g_clo = reach_dfs(gold_nodes, gold_edges)
    s_clo = reach_dfs(sys_nodes, sys_edges)
    g_red = reduction_by_definition(gold_nodes, gold_edges)
    s_red = reduction_by_definition(sys_nodes, sys_edges)
    p = Fraction(sum(1 for e in s_red if e in g_clo), len(s_red)) if s_red else Fraction(0)
    r = Fraction(sum(1 for e in g_red if e in s_clo), len(g_red)) if g_red else Fraction(0)
    return p, r


def prf(p, r):
    p, r = float(p) * 100, float(r) * 100
    return p, r, (2 * p * r / (p + r) if p + r else 0.0)


# ---------------------------------------------------------------- decoding


@lru_cache(maxsize=None)
def minimal_structures(n: int):
    """Every sequencing structure on n singleton mentions that is acyclic and reduced.

    Returned as a tuple of ``((i, j, direction), ...)`` arc tuples with direction
    0 for forward and 1 for backward.
    """
    nodes = list(range(1, n + 1))
    pairs = [(i, j) for j in range(1, n + 1) for i in range(1, j)]
    out = []
    for choice in itertools.product((None, 0, 1), repeat=len(pairs)):
        arcs = tuple((i, j, c) for (i, j), c in zip(pairs, choice) if c is not None)
        edges = [(i, j) if c == 0 else (j, i) for i, j, c in arcs]
        if not acyclic_kahn(nodes, edges):
            continue
        if reduction_by_definition(nodes, edges) != set(edges):
            continue
        out.append(arcs)
    return tuple(out)


def best_structure_score(n: int, root: np.ndarray, pair: np.ndarray) -> float:
    """Max over minimal structures of Σ arc scores plus root scores of unlinked mentions."""
    best = -np.inf
    for arcs in minimal_structures(n):
        linked = {j for _, j, _ in arcs}
        s = sum(pair[i, j, c] for i, j, c in arcs)
        s += sum(root[j] for j in range(1, n + 1) if j not in linked)
        best = max(best, s)
    return float(best)
