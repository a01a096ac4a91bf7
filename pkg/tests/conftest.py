import numpy as np
import pytest

from evrel.corpus import document_from_dict
from evrel.features import ArcTable, WeightVector

ACCEPTANCE_LINES: list[str] = []


def make_doc(sentences, mentions, coref=None, after=None, doc_id="d1", **extra):
    """Build a document from plain word lists.

    ``sentences`` holds lists of words or of (text, lemma, pos) triples;
    ``mentions`` holds (id, sentence, begin, type, realis) tuples for
    one-token mentions.
    """
    sents = []
    for words in sentences:
        toks = []
        for w in words:
            text, lemma, pos = (w, w.lower(), "NN") if isinstance(w, str) else w
            toks.append({"text": text, "lemma": lemma, "pos": pos})
        sents.append({"tokens": toks})
    obj = {
        "doc_id": doc_id,
        "sentences": sents,
        "mentions": [
            {"id": mid, "sentence": s, "span": [b, b + 1], "head": b, "type": t, "realis": r}
            for mid, s, b, t, r in mentions
        ],
    }
    if coref is not None:
        obj["coref"] = coref
    if after is not None:
        obj["after"] = after
    obj.update(extra)
    return document_from_dict(obj)


LEMMAS = ("attack", "arrest", "charge", "convict", "meet", "elect", "sell", "buy")
TYPES = ("Conflict.Attack", "Justice.Arrest", "Justice.Charge", "Contact.Meet", "Transaction.Sell")
REALIS = ("Actual", "Generic", "Other")


def random_doc(rng, n, doc_id="r", coref=False):
    """A small document with ``n`` one-token mentions spread over a few sentences.

    With ``coref`` the mentions get a random gold partition (no After links).
    """
    per = int(rng.integers(1, 4))
    sentences, mentions = [], []
    for k in range(n):
        s, b = divmod(k, per)
        while len(sentences) <= s:
            sentences.append(["the", "police", "then"])
        lemma = LEMMAS[int(rng.integers(len(LEMMAS)))]
        sentences[s].insert(2 * b + 1, (lemma + "ed", lemma, "VBD"))
        mentions.append([f"m{k}", s, 2 * b + 1, TYPES[int(rng.integers(len(TYPES)))],
                         REALIS[int(rng.integers(len(REALIS)))]])
    # the inserts shift later tokens; recompute each mention's position
    for s, words in enumerate(sentences):
        positions = [i for i, w in enumerate(words) if not isinstance(w, str)]
        for m, pos in zip((m for m in mentions if m[1] == s), positions):
            m[2] = pos
    clusters = None
    if coref:
        labels = rng.integers(0, max(1, n // 2 + 1), size=n)
        clusters = [[f"m{k}" for k in range(n) if labels[k] == c] for c in sorted(set(labels.tolist()))]
        clusters = [c for c in clusters if len(c) > 1]
    return make_doc(sentences, [tuple(m) for m in mentions], coref=clusters, doc_id=doc_id)


def random_scores(doc, task, rng, scale=1.0):
    """Arc scores under weights drawn i.i.d. normal for every feature of the document."""
    w = WeightVector()
    table = ArcTable(doc, task, w)
    w.values[: len(w)] = rng.normal(scale=scale, size=len(w))
    return table, w, table.scores(w)


@pytest.fixture
def acceptance():
    """Record one PASS/FAIL line per acceptance criterion."""

    def record(number, title, ok, detail):
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {title} ({detail})"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
