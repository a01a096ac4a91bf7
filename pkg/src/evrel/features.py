"""Binary arc features, sparse weights and per-document arc tables.

Feature keys are readable strings. Coreference keys look like
``family|atom|...``; sequencing keys are cross products
``seq|<surface atom>|<discourse atom>|<ordering atom>`` where each atom is
``family=value``. Disabling a family drops its keys (coreference) or its
atoms before the cross product (sequencing).
"""
from __future__ import annotations

import functools
from collections import deque
from importlib import resources
from pathlib import Path
from typing import Callable, Iterable, Mapping

import numpy as np

from . import _kernels
from .corpus import Document, EventMention, Sentence
from .relgraph import Arc, Label, Task

FeatureVector = dict

COREF_FAMILIES = ("head", "type", "realis", "pos", "exact", "distance", "frame", "syntactic")
SEQ_FAMILIES = (
    "head", "type", "schema", "argument",
    "dependency", "function", "mention", "sentence", "temporal",
    "tlink",
)
FAMILIES = {Task.COREF: COREF_FAMILIES, Task.SEQUENCING: SEQ_FAMILIES}

MAX_DEP_PATH = 4
WINDOW = 2  # tokens each side of the head: a 5-word window

_CONTENT_POS = ("NN", "VB", "JJ", "RB")
_CONTENT_UPOS = {"NOUN", "PROPN", "VERB", "ADJ", "ADV", "AUX"}
_INVERSE_TLINK = {
    "BEFORE": "AFTER", "AFTER": "BEFORE",
    "IBEFORE": "IAFTER", "IAFTER": "IBEFORE",
    "INCLUDES": "IS_INCLUDED", "IS_INCLUDED": "INCLUDES",
    "BEGINS": "BEGUN_BY", "BEGUN_BY": "BEGINS",
    "ENDS": "ENDED_BY", "ENDED_BY": "ENDS",
}


def distance_bucket(d: int) -> str:
    if d <= 3:
        return str(d)
    if d <= 7:
        return "4-7"
    return "8+"


@functools.lru_cache(maxsize=8)
def load_schema(path: str | None = None) -> dict[str, str]:
    """Read a ``lemma<TAB>cluster_id`` table; the bundled one when ``path`` is None."""
    if path is None:
        text = resources.files("evrel").joinpath("data/schemas.tsv").read_text(encoding="utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    table = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise ValueError(f"schema table line {lineno}: expected 'lemma<TAB>cluster_id'")
        table[parts[0]] = parts[1]
    return table


# ---------------------------------------------------------------- document helpers


def _is_function_word(tok) -> bool:
    if not any(ch.isalnum() for ch in tok.text):
        return False
    pos = tok.pos.upper()
    return not (pos.startswith(_CONTENT_POS) or pos in _CONTENT_UPOS)


def _window(doc: Document, m: EventMention) -> tuple[str, ...]:
    # flattened over the document, truncated at its edges
    flat_before = sum(len(s.tokens) for s in doc.sentences[: m.sentence_index])
    centre = flat_before + m.head_token_index
    out = []
    pos = 0
    for s in doc.sentences:
        for t in s.tokens:
            if centre - WINDOW <= pos <= centre + WINDOW:
                out.append(t.text.lower())
            pos += 1
    return tuple(out)


def _frame_of(sent: Sentence, head: int):
    for fr in sent.frames or ():
        if fr.target == head:
            return fr
    return None


def _heads(sent: Sentence) -> dict[int, tuple[int, str]]:
    return {dep: (head, label) for head, dep, label in sent.dependencies or ()}


def _is_ancestor(sent: Sentence, anc: int, node: int) -> bool:
    heads = _heads(sent)
    seen = set()
    cur = node
    while cur in heads and cur not in seen:
        seen.add(cur)
        cur = heads[cur][0]
        if cur == anc:
            return True
    return False


def _dep_path(sent: Sentence, a: int, b: int) -> str:
    if a == b:
        return "self"
    adj: dict[int, list[tuple[int, str]]] = {}
    for head, dep, label in sent.dependencies or ():
        if head < 0:
            continue
        adj.setdefault(dep, []).append((head, label + "^"))
        adj.setdefault(head, []).append((dep, label + "v"))
    prev: dict[int, tuple[int, str]] = {a: (-1, "")}
    queue = deque([a])
    while queue:
        u = queue.popleft()
        if u == b:
            break
        for v, step in sorted(adj.get(u, ())):
            if v not in prev:
                prev[v] = (u, step)
                queue.append(v)
    if b not in prev:
        return "none"
    steps = []
    cur = b
    while cur != a:
        cur, step = prev[cur]
        steps.append(step)
    if len(steps) > MAX_DEP_PATH:
        return "long"
    return "/".join(reversed(steps))


def _text(sent: Sentence, span) -> str:
    return " ".join(t.text.lower() for t in sent.tokens[span[0]: span[1]])


def _check_pair(doc: Document, i: int, j: int) -> None:
    if not 1 <= i < j <= doc.n:
        raise IndexError(f"need 1 <= i < j <= {doc.n}, got i={i}, j={j}")


# ---------------------------------------------------------------- feature functions


def coref_features(doc: Document, i: int, j: int, disabled: Iterable[str] = ()) -> FeatureVector:
    _check_pair(doc, i, j)
    disabled = set(disabled)
    mi, mj = doc.mention(i), doc.mention(j)
    ti, tj = doc.head_token(i), doc.head_token(j)
    si, sj = doc.sentences[mi.sentence_index], doc.sentences[mj.sentence_index]
    keys = []
    if "head" not in disabled:
        keys += [f"head|token|{ti.text.lower()}|{tj.text.lower()}", f"head|lemma|{ti.lemma}|{tj.lemma}"]
        if ti.text.lower() == tj.text.lower():
            keys.append("head|same_token")
        if ti.lemma == tj.lemma:
            keys.append("head|same_lemma")
    if "type" not in disabled:
        keys.append(f"type|pair|{mi.event_type}|{mj.event_type}")
        if mi.event_type == mj.event_type:
            keys.append("type|same")
    if "realis" not in disabled:
        keys.append(f"realis|pair|{mi.realis}|{mj.realis}")
        if mi.realis == mj.realis:
            keys.append("realis|same")
    if "pos" not in disabled:
        keys.append(f"pos|pair|{ti.pos}|{tj.pos}")
        if ti.pos == tj.pos:
            keys.append("pos|same")
    if "exact" not in disabled and _window(doc, mi) == _window(doc, mj):
        keys.append("exact|match")
    if "distance" not in disabled:
        keys.append(f"distance|{distance_bucket(mj.sentence_index - mi.sentence_index)}")
    if "frame" not in disabled and si.frames is not None and sj.frames is not None:
        fi, fj = _frame_of(si, mi.head_token_index), _frame_of(sj, mj.head_token_index)
        ni = fi.name if fi else "-"
        nj = fj.name if fj else "-"
        keys.append(f"frame|pair|{ni}|{nj}")
        if fi and fj and ni == nj:
            keys.append("frame|same")
    if (
        "syntactic" not in disabled
        and mi.sentence_index == mj.sentence_index
        and si.dependencies is not None
    ):
        hi, hj = mi.head_token_index, mj.head_token_index
        if _is_ancestor(si, hi, hj) or _is_ancestor(si, hj, hi):
            keys.append("syntactic|ancestor")
    return dict.fromkeys(keys, 1.0)


def _tlink_label(doc: Document, parent: EventMention, child: EventMention) -> str | None:
    if doc.tlinks is None:
        return None
    for a, b, label in doc.tlinks:
        if a == parent.id and b == child.id:
            return label.upper()
        if a == child.id and b == parent.id:
            label = label.upper()
            return _INVERSE_TLINK.get(label, label)
    return "NONE"


def sequencing_atoms(
    doc: Document,
    i: int,
    j: int,
    direction: str,
    disabled: Iterable[str] = (),
    schema: Mapping[str, str] | None = None,
) -> tuple[list[str], list[str], list[str]]:
    """The three atom sets whose cross product forms the sequencing features."""
    _check_pair(doc, i, j)
    if direction not in ("forward", "backward"):
        raise ValueError(f"direction must be forward or backward, got {direction!r}")
    disabled = set(disabled)
    if schema is None:
        schema = load_schema()
    mi, mj = doc.mention(i), doc.mention(j)
    si, sj = doc.sentences[mi.sentence_index], doc.sentences[mj.sentence_index]
    # pairs are written parent~child: the earlier event in script order first
    parent, child = (mi, mj) if direction == "forward" else (mj, mi)
    tp, tc = doc.head_token(parent.discourse_index), doc.head_token(child.discourse_index)

    surface = []
    if "head" not in disabled:
        surface.append(f"head={tp.lemma}~{tc.lemma}")
    if "type" not in disabled:
        surface.append(f"type={parent.event_type}~{child.event_type}")
    if "schema" not in disabled and tp.lemma in schema and tc.lemma in schema:
        surface.append("schema=same" if schema[tp.lemma] == schema[tc.lemma] else "schema=diff")
    if "argument" not in disabled and si.frames is not None and sj.frames is not None:
        fi, fj = _frame_of(si, mi.head_token_index), _frame_of(sj, mj.head_token_index)
        if fi and fj:
            args_i = {_text(si, span) for _, span in fi.args}
            args_j = {_text(sj, span) for _, span in fj.args}
            if args_i & args_j:
                fp, fc = (fi, fj) if parent is mi else (fj, fi)
                surface.append("argument=shared")
                surface.append(f"argument=shared:{fp.name}~{fc.name}")

    discourse = []
    same_sentence = mi.sentence_index == mj.sentence_index
    if "dependency" not in disabled and same_sentence and si.dependencies is not None:
        discourse.append(f"dependency={_dep_path(si, mi.head_token_index, mj.head_token_index)}")
    if "function" not in disabled and same_sentence:
        between = si.tokens[mi.token_span[1]: mj.token_span[0]]
        words = sorted({t.text.lower() for t in between if _is_function_word(t)})
        discourse += [f"function={w}" for w in words]
    if "mention" not in disabled:
        types = sorted({doc.mention(k).event_type for k in range(i + 1, j)})
        discourse += [f"mention={t}" for t in types] or ["mention=none"]
    if "sentence" not in disabled:
        discourse.append(f"sentence={distance_bucket(mj.sentence_index - mi.sentence_index)}")
    if (
        "temporal" not in disabled
        and si.temporal_expressions is not None
        and sj.temporal_expressions is not None
    ):
        yi = "Y" if si.temporal_expressions else "N"
        yj = "Y" if sj.temporal_expressions else "N"
        discourse.append(f"temporal={yi}~{yj}")

    ordering = [f"order={direction}"]
    if "tlink" not in disabled:
        label = _tlink_label(doc, parent, child)
        if label is not None:
            ordering.append(f"order={direction}+tlink={label}")
    return surface, discourse, ordering


def sequencing_features(
    doc: Document,
    i: int,
    j: int,
    direction: str,
    disabled: Iterable[str] = (),
    schema: Mapping[str, str] | None = None,
) -> FeatureVector:
    surface, discourse, ordering = sequencing_atoms(doc, i, j, direction, disabled, schema)
    # the wildcard adds every lower-order conjunction; ordering atoms always carry the direction
    surface = ["*"] + surface
    discourse = ["*"] + discourse
    keys = [f"seq|{s}|{d}|{o}" for s in surface for d in discourse for o in ordering]
    return dict.fromkeys(keys, 1.0)


def root_features(doc: Document, j: int, task: Task | str) -> FeatureVector:
    Task(task)
    m = doc.mention(j)
    return {"root_bias": 1.0, f"root|type|{m.event_type}": 1.0, f"root|realis|{m.realis}": 1.0}


def arc_features(doc: Document, arc: Arc, task: Task | str, disabled=(), schema=None) -> FeatureVector:
    if arc.label is Label.ROOT:
        return root_features(doc, arc.target, task)
    if arc.label is Label.COREF:
        return coref_features(doc, arc.source, arc.target, disabled)
    direction = "forward" if arc.label is Label.FORWARD else "backward"
    return sequencing_features(doc, arc.source, arc.target, direction, disabled, schema)


def arc_score(w, f: Mapping) -> float:
    """Dot product of a weight vector (or plain mapping) with a feature vector."""
    get = w.get
    return float(sum(get(k, 0.0) * v for k, v in f.items()))


# ---------------------------------------------------------------- weights


class WeightVector:
    """Sparse weights over string keys, stored densely by insertion id.

    Also keeps the running sums needed for averaged weights: every update is
    added to ``_acc`` scaled by the example counter, and the average is
    ``w - acc / counter``.
    """

    def __init__(self, entries: Mapping[str, float] | None = None):
        self._index: dict[str, int] = {}
        self._keys: list[str] = []
        self._w = np.zeros(256)
        self._acc = np.zeros(256)
        self.counter = 1
        for k in sorted(entries or {}):
            idx = self.key_id(k, grow=True)
            self._w[idx] = entries[k]

    def __len__(self):
        return len(self._keys)

    def __contains__(self, key):
        return key in self._index

    def _reserve(self, size: int) -> None:
        cap = self._w.shape[0]
        if size <= cap:
            return
        while cap < size:
            cap *= 2
        self._w = np.concatenate([self._w, np.zeros(cap - self._w.shape[0])])
        self._acc = np.concatenate([self._acc, np.zeros(cap - self._acc.shape[0])])

    def key_id(self, key: str, grow: bool = False) -> int:
        idx = self._index.get(key)
        if idx is None:
            if not grow:
                return -1
            idx = len(self._keys)
            self._index[key] = idx
            self._keys.append(key)
            self._reserve(idx + 1)
        return idx

    def key(self, idx: int) -> str:
        return self._keys[idx]

    @property
    def values(self) -> np.ndarray:
        return self._w

    def get(self, key: str, default: float = 0.0) -> float:
        idx = self._index.get(key)
        return default if idx is None else float(self._w[idx])

    __getitem__ = get

    def add(self, delta: Mapping, scale: float = 1.0) -> None:
        """``w += scale * delta``; keys may be strings or ids from :meth:`key_id`."""
        for k, v in delta.items():
            idx = k if isinstance(k, (int, np.integer)) else self.key_id(k, grow=True)
            step = scale * v
            self._w[idx] += step
            self._acc[idx] += self.counter * step

    def tick(self) -> None:
        self.counter += 1

    def dot_ids(self, delta: Mapping[int, float]) -> float:
        return float(sum(self._w[k] * v for k, v in delta.items()))

    def averaged(self) -> "WeightVector":
        out = WeightVector()
        n = len(self._keys)
        out._index = dict(self._index)
        out._keys = list(self._keys)
        out._reserve(n)
        out._w[:n] = self._w[:n] - self._acc[:n] / self.counter
        return out

    def copy(self) -> "WeightVector":
        out = WeightVector()
        out._index = dict(self._index)
        out._keys = list(self._keys)
        out._w = self._w.copy()
        out._acc = self._acc.copy()
        out.counter = self.counter
        return out

    def items(self) -> list[tuple[str, float]]:
        return sorted((k, float(self._w[i])) for i, k in enumerate(self._keys) if self._w[i] != 0.0)

    def to_dict(self) -> dict[str, float]:
        return dict(self.items())


# ---------------------------------------------------------------- arc tables


class ArcScores:
    """Scores for every arc of one document, as dense arrays."""

    def __init__(self, root: np.ndarray, pair: np.ndarray, labels: tuple[Label, ...]):
        self.root = root
        self.pair = pair
        self.labels = labels
        self._slot = {lab: k for k, lab in enumerate(labels)}

    def __call__(self, arc: Arc) -> float:
        if arc.label is Label.ROOT:
            return float(self.root[arc.target])
        return float(self.pair[arc.source, arc.target, self._slot[arc.label]])

    def graph_score(self, graph) -> float:
        return float(sum(self(a) for a in graph.arcs))


class ArcTable:
    """Feature ids for every candidate arc of a document, in CSR layout.

    Built once per document. With ``grow`` the weight vocabulary is extended
    with every new key; without it unseen keys are dropped (their weight
    would be zero anyway).
    """

    def __init__(
        self,
        doc: Document,
        task: Task | str,
        weights: WeightVector,
        disabled: Iterable[str] = (),
        schema: Mapping[str, str] | None = None,
        grow: bool = True,
    ):
        self.doc = doc
        self.task = Task(task)
        self.labels = (Label.COREF,) if self.task is Task.COREF else (Label.FORWARD, Label.BACKWARD)
        disabled = frozenset(disabled)
        if self.task is Task.SEQUENCING and schema is None:
            schema = load_schema()
        n = doc.n
        self.rows: dict[Arc, int] = {}
        self.pair_rows = np.full((n + 1, n + 1, len(self.labels)), -1, dtype=np.int64)
        indptr = [0]
        indices: list[int] = []

        def push(arc, feats):
            # summation order follows key order, so scores do not depend on vocabulary layout
            ids = [weights.key_id(k, grow=grow) for k in sorted(feats)]
            ids = [x for x in ids if x >= 0]
            self.rows[arc] = len(indptr) - 1
            indices.extend(ids)
            indptr.append(len(indices))

        for j in range(1, n + 1):
            push(Arc(0, j, Label.ROOT), root_features(doc, j, self.task))
        for j in range(1, n + 1):
            for i in range(1, j):
                for slot, label in enumerate(self.labels):
                    arc = Arc(i, j, label)
                    self.pair_rows[i, j, slot] = len(indptr) - 1
                    push(arc, arc_features(doc, arc, self.task, disabled, schema))
        self.indptr = np.asarray(indptr, dtype=np.int64)
        self.indices = np.asarray(indices, dtype=np.int64)

    def feature_ids(self, arc: Arc) -> dict[int, float]:
        r = self.rows[arc]
        return dict.fromkeys(self.indices[self.indptr[r]: self.indptr[r + 1]].tolist(), 1.0)

    def scores(self, weights: WeightVector) -> ArcScores:
        flat = _kernels.row_sums(self.indptr, self.indices, weights.values)
        n = self.doc.n
        root = np.zeros(n + 1)
        root[1:] = flat[:n]
        pair = np.full(self.pair_rows.shape, -np.inf)
        valid = self.pair_rows >= 0
        pair[valid] = flat[self.pair_rows[valid]]
        return ArcScores(root, pair, self.labels)


def make_featurizer(doc: Document, task: Task | str, disabled=(), schema=None) -> Callable[[Arc], FeatureVector]:
    return lambda arc: arc_features(doc, arc, task, disabled, schema)
