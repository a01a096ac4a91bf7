"""Numeric inner loops: arc scoring and boolean reachability algebra.

Every kernel has a pure-numpy twin in :data:`numpy_impl`. The numba versions
are used when numba imports cleanly and ``EVREL_DISABLE_NUMBA`` is unset or
``0``; the module-level names always point at the selected backend.
"""
from __future__ import annotations

import os
from types import SimpleNamespace

import numpy as np


def _np_row_sums(indptr, indices, weights):
    n_rows = indptr.shape[0] - 1
    out = np.zeros(n_rows, dtype=np.float64)
    if indices.shape[0] == 0 or n_rows == 0:
        return out
    lengths = np.diff(indptr)
    rows = np.repeat(np.arange(n_rows), lengths)
    np.add.at(out, rows, weights[indices])
    return out


def _np_closure(adj):
    n = adj.shape[0]
    reach = adj.astype(np.bool_).copy()
    if n == 0:
        return reach
    # repeated squaring: log2(n) boolean products
    while True:
        step = reach | ((reach.astype(np.int64) @ reach.astype(np.int64)) > 0)
        if np.array_equal(step, reach):
            return reach
        reach = step


def _np_reduce_closed(closed):
    # a DAG edge survives iff no intermediate node sits on a path between its ends
    c = closed.astype(np.int64)
    return closed & ~((c @ c) > 0)


def _np_add_edge(reach, a, b):
    src = reach[:, a].copy()
    src[a] = True
    dst = reach[b, :].copy()
    dst[b] = True
    reach |= np.outer(src, dst)


def _np_can_add(reach, xs, ys, a, b):
    """Whether edge a -> b keeps the reduced DAG ``xs -> ys`` (reachability ``reach``) reduced.

    The edge must not close a cycle or be implied already, and must not imply
    an existing edge.
    """
    if a == b or reach[b, a] or reach[a, b]:
        return False
    above = reach[xs, a] | (xs == a)
    below = reach[b, ys] | (ys == b)
    return not bool((above & below).any())


def _np_reinsert_scan(reach0, xs0, ys0, ea, eb, pid, gain, tgt, linked0, root, must, score0, best):
    """Greedy re-insertion of one mention's options, once per forced first option.

    Options are tried in the given order (a forced first one, or none) and kept
    when :func:`can_add` allows; ``pid`` stops two labels on one mention pair.
    Returns the best feasible prefix score above ``best`` and the indices of
    its options (empty if nothing beats ``best``).
    """
    m, n0 = ea.shape[0], xs0.shape[0]
    n_pairs = int(pid.max()) + 1 if m else 0
    best_acc = np.zeros(0, dtype=np.int64)
    for first in range(-1, m):
        reach = reach0.copy()
        xs, ys = list(xs0), list(ys0)
        linked = linked0.copy()
        used = np.zeros(n_pairs, dtype=np.bool_)
        score = score0
        acc = []
        if first < 0 and score > best and not (must & ~linked).any():
            best, best_acc = score, np.zeros(0, dtype=np.int64)
        order = range(m) if first < 0 else [first] + [o for o in range(m) if o != first]
        for step, o in enumerate(order):
            if used[pid[o]]:
                continue
            a, b = ea[o], eb[o]
            if not _np_can_add(reach, np.asarray(xs, dtype=np.int64), np.asarray(ys, dtype=np.int64), a, b):
                if first >= 0 and step == 0:
                    break
                continue
            _np_add_edge(reach, a, b)
            xs.append(a)
            ys.append(b)
            used[pid[o]] = True
            acc.append(o)
            score += gain[o]
            if not linked[tgt[o]]:
                score -= root[tgt[o]]
                linked[tgt[o]] = True
            if score > best and not (must & ~linked).any():
                best, best_acc = score, np.asarray(acc, dtype=np.int64)
    return best, best_acc


numpy_impl = SimpleNamespace(
    row_sums=_np_row_sums,
    closure=_np_closure,
    reduce_closed=_np_reduce_closed,
    add_edge=_np_add_edge,
    can_add=_np_can_add,
    reinsert_scan=_np_reinsert_scan,
)


def _build_numba():
    from numba import njit

    @njit(cache=False)
    def row_sums(indptr, indices, weights):
        n_rows = indptr.shape[0] - 1
        out = np.zeros(n_rows, dtype=np.float64)
        for r in range(n_rows):
            s = 0.0
            for k in range(indptr[r], indptr[r + 1]):
                s += weights[indices[k]]
            out[r] = s
        return out

    @njit(cache=False)
    def closure(adj):
        n = adj.shape[0]
        reach = adj.copy()
        for k in range(n):
            for i in range(n):
                if reach[i, k]:
                    for j in range(n):
                        if reach[k, j]:
                            reach[i, j] = True
        return reach

    @njit(cache=False)
    def reduce_closed(closed):
        n = closed.shape[0]
        out = closed.copy()
        for a in range(n):
            for b in range(n):
                if not closed[a, b]:
                    continue
                for x in range(n):
                    if closed[a, x] and closed[x, b]:
                        out[a, b] = False
                        break
        return out

    @njit(cache=False)
    def add_edge(reach, a, b):
        n = reach.shape[0]
        for x in range(n):
            if x == a or reach[x, a]:
                reach[x, b] = True
                for y in range(n):
                    if reach[b, y]:
                        reach[x, y] = True

    @njit(cache=False)
    def can_add(reach, xs, ys, a, b):
        if a == b or reach[b, a] or reach[a, b]:
            return False
        for k in range(xs.shape[0]):
            x, y = xs[k], ys[k]
            if (x == a or reach[x, a]) and (y == b or reach[b, y]):
                return False
        return True

    @njit(cache=False)
    def feasible(linked, must):
        for j in range(must.shape[0]):
            if must[j] and not linked[j]:
                return False
        return True

    @njit(cache=False)
    def reinsert_scan(reach0, xs0, ys0, ea, eb, pid, gain, tgt, linked0, root, must, score0, best):
        m, n0 = ea.shape[0], xs0.shape[0]
        n_pairs = pid.max() + 1 if m else 0
        xs = np.empty(n0 + m, dtype=np.int64)
        ys = np.empty(n0 + m, dtype=np.int64)
        acc = np.empty(m, dtype=np.int64)
        best_acc = np.empty(m, dtype=np.int64)
        best_len = 0
        for first in range(-1, m):
            reach = reach0.copy()
            xs[:n0] = xs0
            ys[:n0] = ys0
            cnt = n0
            linked = linked0.copy()
            used = np.zeros(n_pairs, dtype=np.bool_)
            score = score0
            nacc = 0
            if first < 0 and score > best and feasible(linked, must):
                best, best_len = score, 0
            for step in range(m if first < 0 else m + 1):
                if first < 0:
                    o = step
                elif step == 0:
                    o = first
                else:
                    o = step - 1
                    if o == first:
                        continue
                if used[pid[o]]:
                    continue
                a, b = ea[o], eb[o]
                if not can_add(reach, xs[:cnt], ys[:cnt], a, b):
                    if first >= 0 and step == 0:
                        break
                    continue
                add_edge(reach, a, b)
                xs[cnt] = a
                ys[cnt] = b
                cnt += 1
                used[pid[o]] = True
                acc[nacc] = o
                nacc += 1
                score += gain[o]
                if not linked[tgt[o]]:
                    score -= root[tgt[o]]
                    linked[tgt[o]] = True
                if score > best and feasible(linked, must):
                    best, best_len = score, nacc
                    best_acc[:nacc] = acc[:nacc]
        return best, best_acc[:best_len].copy()

    return SimpleNamespace(
        row_sums=row_sums,
        closure=closure,
        reduce_closed=reduce_closed,
        add_edge=add_edge,
        can_add=can_add,
        reinsert_scan=reinsert_scan,
    )


def _numba_requested() -> bool:
    return os.environ.get("EVREL_DISABLE_NUMBA", "0").strip().lower() in ("", "0", "false", "no")


numba_impl = None
if _numba_requested():
    try:
        numba_impl = _build_numba()
    except ImportError:
        numba_impl = None

USING_NUMBA = numba_impl is not None
backend = numba_impl if USING_NUMBA else numpy_impl

row_sums = backend.row_sums
closure = backend.closure
reduce_closed = backend.reduce_closed
add_edge = backend.add_edge
can_add = backend.can_add
reinsert_scan = backend.reinsert_scan
