"""Document model and the line-delimited JSON corpus format.

One document per line. Optional linguistic layers (``dependencies``,
``frames``, ``time_spans`` on sentences; ``tlinks`` on documents) are kept as
``None`` when the key is missing, which is distinct from an empty list.
See ``docs/corpus_format.md`` for the field reference.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Sequence

REALIS_VALUES = ("Actual", "Generic", "Other")


class CorpusError(ValueError):
    """Raised for unparseable input or violated document invariants."""

    def __init__(self, message: str, line: int | None = None, doc_id: str | None = None):
        self.line = line
        self.doc_id = doc_id
        prefix = []
        if line is not None:
            prefix.append(f"line {line}")
        if doc_id is not None:
            prefix.append(f"doc {doc_id!r}")
        super().__init__(f"{', '.join(prefix)}: {message}" if prefix else message)


@dataclass(frozen=True)
class Token:
    index: int
    text: str
    lemma: str
    pos: str


@dataclass(frozen=True)
class Frame:
    name: str
    target: int
    args: tuple[tuple[str, tuple[int, int]], ...] = ()


@dataclass(frozen=True)
class Sentence:
    index: int
    tokens: tuple[Token, ...]
    dependencies: tuple[tuple[int, int, str], ...] | None = None
    frames: tuple[Frame, ...] | None = None
    temporal_expressions: tuple[tuple[int, int], ...] | None = None


@dataclass(frozen=True)
class EventMention:
    id: str
    sentence_index: int
    token_span: tuple[int, int]
    head_token_index: int
    event_type: str
    realis: str
    discourse_index: int = 0


@dataclass(frozen=True)
class GoldAnnotation:
    coref_clusters: tuple[frozenset[str], ...] = ()
    after_links: tuple[tuple[str, str], ...] = ()
    subevent_links: tuple[tuple[str, str], ...] = ()


@dataclass(frozen=True)
class Document:
    doc_id: str
    sentences: tuple[Sentence, ...]
    mentions: tuple[EventMention, ...]
    gold: GoldAnnotation | None = None
    tlinks: tuple[tuple[str, str, str], ...] | None = None
    _by_id: dict = field(default=None, init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        object.__setattr__(self, "_by_id", {m.id: m for m in self.mentions})

    @property
    def n(self) -> int:
        return len(self.mentions)

    def mention(self, key: str | int) -> EventMention:
        """Look a mention up by id or by 1-based discourse index."""
        if isinstance(key, int):
            if not 1 <= key <= self.n:
                raise IndexError(f"discourse index {key} out of range 1..{self.n}")
            return self.mentions[key - 1]
        try:
            return self._by_id[key]
        except KeyError:
            raise KeyError(f"unknown mention id {key!r} in doc {self.doc_id!r}") from None

    def index_of(self, mention_id: str) -> int:
        return self.mention(mention_id).discourse_index

    def head_token(self, key: str | int) -> Token:
        m = self.mention(key)
        return self.sentences[m.sentence_index].tokens[m.head_token_index]

    def cluster_sets(self) -> list[set[int]]:
        """Gold coreference clusters as sets of discourse indices."""
        if self.gold is None:
            return []
        return [{self.index_of(mid) for mid in cluster} for cluster in self.gold.coref_clusters]

    def after_pairs(self) -> list[tuple[int, int]]:
        """Gold After links as (earlier-in-script, later-in-script) discourse indices."""
        if self.gold is None:
            return []
        return [(self.index_of(s), self.index_of(t)) for s, t in self.gold.after_links]

    def without_layers(self) -> "Document":
        """Copy with every optional linguistic layer removed."""
        sentences = tuple(
            Sentence(s.index, s.tokens, None, None, None) for s in self.sentences
        )
        return Document(self.doc_id, sentences, self.mentions, self.gold, None)


def event_of(doc: Document, mention_id: str) -> str:
    """Canonical event id: the lexicographically smallest mention id of the cluster."""
    doc.mention(mention_id)
    if doc.gold is None:
        raise CorpusError("event_of needs gold coreference clusters", doc_id=doc.doc_id)
    for cluster in doc.gold.coref_clusters:
        if mention_id in cluster:
            return min(cluster)
    return mention_id


def event_map(doc: Document) -> dict[str, str]:
    out = {m.id: m.id for m in doc.mentions}
    if doc.gold is not None:
        for cluster in doc.gold.coref_clusters:
            rep = min(cluster)
            for mid in cluster:
                out[mid] = rep
    return out


# ---------------------------------------------------------------- validation


def _find_cycle(edges: dict[str, set[str]]) -> list[str] | None:
    """Return the node sequence of one directed cycle, or None."""
    white, grey, black = 0, 1, 2
    color = {u: white for u in edges}
    for vs in edges.values():
        for v in vs:
            color.setdefault(v, white)
    parent: dict[str, str] = {}
    for start in sorted(color):
        if color[start] != white:
            continue
        stack = [(start, iter(sorted(edges.get(start, ()))))]
        color[start] = grey
        while stack:
            u, it = stack[-1]
            nxt = next(it, None)
            if nxt is None:
                color[u] = black
                stack.pop()
                continue
            if color[nxt] == grey:
                path = [u]
                while path[-1] != nxt:
                    path.append(parent[path[-1]])
                path.reverse()
                return path
            if color[nxt] == white:
                parent[nxt] = u
                color[nxt] = grey
                stack.append((nxt, iter(sorted(edges.get(nxt, ())))))
    return None


def validate(doc: Document, line: int | None = None) -> None:
    def fail(msg):
        raise CorpusError(msg, line=line, doc_id=doc.doc_id)

    for si, sent in enumerate(doc.sentences):
        if sent.index != si:
            fail(f"sentence {si} carries index {sent.index}")
        n_tok = len(sent.tokens)
        for ti, tok in enumerate(sent.tokens):
            if tok.index != ti:
                fail(f"sentence {si}: token {ti} carries index {tok.index}")
            if not tok.text:
                fail(f"sentence {si}: token {ti} has empty text")
        for head, dep, label in sent.dependencies or ():
            if not (-1 <= head < n_tok) or not (0 <= dep < n_tok):
                fail(f"sentence {si}: dependency ({head}, {dep}, {label}) references a missing token")
        for fr in sent.frames or ():
            if not 0 <= fr.target < n_tok:
                fail(f"sentence {si}: frame {fr.name!r} target {fr.target} references a missing token")
            for role, (b, e) in fr.args:
                if not 0 <= b < e <= n_tok:
                    fail(f"sentence {si}: frame {fr.name!r} argument {role!r} span out of bounds")
        for b, e in sent.temporal_expressions or ():
            if not 0 <= b < e <= n_tok:
                fail(f"sentence {si}: time span ({b}, {e}) out of bounds")

    seen: set[str] = set()
    prev_key = None
    for pos, m in enumerate(doc.mentions, start=1):
        if m.id in seen:
            fail(f"duplicate mention id {m.id!r}")
        seen.add(m.id)
        if not 0 <= m.sentence_index < len(doc.sentences):
            fail(f"mention {m.id!r}: sentence {m.sentence_index} does not exist")
        n_tok = len(doc.sentences[m.sentence_index].tokens)
        b, e = m.token_span
        if not 0 <= b < e <= n_tok:
            fail(f"mention {m.id!r}: span ({b}, {e}) empty or outside sentence of {n_tok} tokens")
        if not b <= m.head_token_index < e:
            fail(f"mention {m.id!r}: head {m.head_token_index} outside span ({b}, {e})")
        if m.realis not in REALIS_VALUES:
            fail(f"mention {m.id!r}: realis {m.realis!r} not in {REALIS_VALUES}")
        if not m.event_type:
            fail(f"mention {m.id!r}: empty event type")
        if m.discourse_index != pos:
            fail(f"mention {m.id!r}: discourse index {m.discourse_index}, expected {pos}")
        key = (m.sentence_index, b, e)
        if prev_key is not None and key <= prev_key:
            fail(f"mention {m.id!r}: not strictly after the previous mention in discourse order")
        prev_key = key

    for a, b, label in doc.tlinks or ():
        for mid in (a, b):
            if mid not in seen:
                fail(f"tlink ({a}, {b}, {label}) references unknown mention {mid!r}")

    gold = doc.gold
    if gold is None:
        return
    owner: dict[str, int] = {}
    for ci, cluster in enumerate(gold.coref_clusters):
        if not cluster:
            fail(f"coref cluster {ci} is empty")
        for mid in cluster:
            if mid not in seen:
                fail(f"coref cluster {ci} references unknown mention {mid!r}")
            if mid in owner:
                fail(f"coref clusters {owner[mid]} and {ci} overlap on mention {mid!r}")
            owner[mid] = ci
    for kind, links in (("after", gold.after_links), ("subevent", gold.subevent_links)):
        for s, t in links:
            for mid in (s, t):
                if mid not in seen:
                    fail(f"{kind} link ({s}, {t}) references unknown mention {mid!r}")

    events = event_map(doc)
    graph: dict[str, set[str]] = {}
    link_of: dict[tuple[str, str], tuple[str, str]] = {}
    for s, t in gold.after_links:
        es, et = events[s], events[t]
        if es == et:
            fail(f"after link ({s}, {t}) joins two mentions of the same event {es!r}")
        graph.setdefault(es, set()).add(et)
        link_of.setdefault((es, et), (s, t))
    cycle = _find_cycle(graph)
    if cycle is not None:
        hops = list(zip(cycle, cycle[1:] + cycle[:1]))
        names = ", ".join(f"{link_of[h][0]}->{link_of[h][1]}" for h in hops)
        fail(f"after links form an event-level cycle: {names}")


# ---------------------------------------------------------------- (de)serialization


def _need(obj: dict, key: str, where: str):
    if key not in obj:
        raise KeyError(f"{where}: missing field {key!r}")
    return obj[key]


def _pair(value, where: str) -> tuple[int, int]:
    if not (isinstance(value, (list, tuple)) and len(value) == 2):
        raise ValueError(f"{where}: expected a 2-element list, got {value!r}")
    return int(value[0]), int(value[1])


def document_from_dict(obj: dict) -> Document:
    doc_id = str(_need(obj, "doc_id", "document"))
    sentences = []
    for si, s in enumerate(_need(obj, "sentences", "document")):
        where = f"sentence {si}"
        tokens = tuple(
            Token(ti, str(_need(t, "text", where)), str(t.get("lemma", t["text"])), str(t.get("pos", "")))
            for ti, t in enumerate(_need(s, "tokens", where))
        )
        deps = s.get("dependencies")
        if deps is not None:
            deps = tuple((int(h), int(d), str(lab)) for h, d, lab in deps)
        frames = s.get("frames")
        if frames is not None:
            frames = tuple(
                Frame(
                    str(_need(f, "name", where)),
                    int(_need(f, "target", where)),
                    tuple((str(role), _pair(span, where)) for role, span in f.get("args", ())),
                )
                for f in frames
            )
        times = s.get("time_spans")
        if times is not None:
            times = tuple(_pair(sp, where) for sp in times)
        sentences.append(Sentence(si, tokens, deps, frames, times))

    raw_mentions = []
    for mi, m in enumerate(_need(obj, "mentions", "document")):
        where = f"mention {mi}"
        raw_mentions.append(
            EventMention(
                id=str(_need(m, "id", where)),
                sentence_index=int(_need(m, "sentence", where)),
                token_span=_pair(_need(m, "span", where), where),
                head_token_index=int(_need(m, "head", where)),
                event_type=str(_need(m, "type", where)),
                realis=str(_need(m, "realis", where)),
            )
        )
    ordered = sorted(raw_mentions, key=lambda m: (m.sentence_index, *m.token_span))
    mentions = tuple(
        EventMention(m.id, m.sentence_index, m.token_span, m.head_token_index, m.event_type, m.realis, k)
        for k, m in enumerate(ordered, start=1)
    )

    gold = None
    if any(k in obj for k in ("coref", "after", "subevent")):
        gold = GoldAnnotation(
            coref_clusters=tuple(frozenset(str(x) for x in c) for c in obj.get("coref", ())),
            after_links=tuple((str(a), str(b)) for a, b in obj.get("after", ())),
            subevent_links=tuple((str(a), str(b)) for a, b in obj.get("subevent", ())),
        )
    tlinks = obj.get("tlinks")
    if tlinks is not None:
        tlinks = tuple((str(a), str(b), str(lab)) for a, b, lab in tlinks)
    return Document(doc_id, tuple(sentences), mentions, gold, tlinks)


def document_to_dict(doc: Document) -> dict:
    sentences = []
    for s in doc.sentences:
        out = {"tokens": [{"text": t.text, "lemma": t.lemma, "pos": t.pos} for t in s.tokens]}
        if s.dependencies is not None:
            out["dependencies"] = [[h, d, lab] for h, d, lab in s.dependencies]
        if s.frames is not None:
            out["frames"] = [
                {"name": f.name, "target": f.target, "args": [[role, list(span)] for role, span in f.args]}
                for f in s.frames
            ]
        if s.temporal_expressions is not None:
            out["time_spans"] = [list(sp) for sp in s.temporal_expressions]
        sentences.append(out)
    obj = {
        "doc_id": doc.doc_id,
        "sentences": sentences,
        "mentions": [
            {
                "id": m.id,
                "sentence": m.sentence_index,
                "span": list(m.token_span),
                "head": m.head_token_index,
                "type": m.event_type,
                "realis": m.realis,
            }
            for m in doc.mentions
        ],
    }
    if doc.gold is not None:
        obj["coref"] = [sorted(c) for c in doc.gold.coref_clusters]
        obj["after"] = [list(p) for p in doc.gold.after_links]
        obj["subevent"] = [list(p) for p in doc.gold.subevent_links]
    if doc.tlinks is not None:
        obj["tlinks"] = [list(t) for t in doc.tlinks]
    return obj


def _canonical_clusters(doc: Document) -> Document:
    # frozensets carry no order; sorting at read time keeps round trips exact
    if doc.gold is None:
        return doc
    clusters = tuple(sorted(doc.gold.coref_clusters, key=lambda c: sorted(c)))
    gold = GoldAnnotation(clusters, doc.gold.after_links, doc.gold.subevent_links)
    return Document(doc.doc_id, doc.sentences, doc.mentions, gold, doc.tlinks)


def parse_line(text: str, line: int | None = None) -> Document:
    try:
        obj = json.loads(text)
        if not isinstance(obj, dict):
            raise ValueError("record is not a JSON object")
        doc = document_from_dict(obj)
    except (ValueError, KeyError, TypeError) as exc:
        raise CorpusError(f"parse error: {exc}", line=line) from exc
    doc = _canonical_clusters(doc)
    validate(doc, line=line)
    return doc


def iter_corpus(path: str | Path) -> Iterator[Document]:
    with open(path, encoding="utf-8") as fh:
        for lineno, text in enumerate(fh, start=1):
            if not text.strip():
                continue
            yield parse_line(text, line=lineno)


def read_corpus(path: str | Path) -> list[Document]:
    return list(iter_corpus(path))


def dumps(doc: Document) -> str:
    return json.dumps(document_to_dict(doc), ensure_ascii=False, separators=(",", ":"))


def write_corpus(docs: Iterable[Document], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for doc in docs:
            fh.write(dumps(doc))
            fh.write("\n")


# ---------------------------------------------------------------- predictions


@dataclass(frozen=True)
class Prediction:
    doc_id: str
    coref: tuple[tuple[str, ...], ...] | None = None
    after: tuple[tuple[str, str], ...] | None = None


def read_predictions(path: str | Path) -> dict[str, Prediction]:
    out: dict[str, Prediction] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, text in enumerate(fh, start=1):
            if not text.strip():
                continue
            try:
                obj = json.loads(text)
                doc_id = str(obj["doc_id"])
                coref = obj.get("coref")
                after = obj.get("after")
                pred = Prediction(
                    doc_id,
                    None if coref is None else tuple(tuple(str(x) for x in c) for c in coref),
                    None if after is None else tuple((str(a), str(b)) for a, b in after),
                )
            except (ValueError, KeyError, TypeError) as exc:
                raise CorpusError(f"parse error: {exc}", line=lineno) from exc
            if doc_id in out:
                raise CorpusError(f"duplicate prediction for doc {doc_id!r}", line=lineno)
            out[doc_id] = pred
    return out


def write_predictions(preds: Sequence[Prediction], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for p in preds:
            obj: dict = {"doc_id": p.doc_id}
            if p.coref is not None:
                obj["coref"] = [list(c) for c in p.coref]
            if p.after is not None:
                obj["after"] = [list(a) for a in p.after]
            fh.write(json.dumps(obj, ensure_ascii=False, separators=(",", ":")))
            fh.write("\n")
