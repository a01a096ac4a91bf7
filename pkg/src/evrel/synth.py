"""Seeded synthetic corpora built from a small script grammar.

Documents interleave a few script instances, realise each event as one or
more trigger mentions, and carry gold coreference clusters (repeat mentions)
and After links (consecutive events of a script instance).
"""
from __future__ import annotations

import json
import random
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .corpus import Document, EventMention, Frame, GoldAnnotation, Sentence, Token, validate
from .relgraph import Arc, Label, RelationGraph, Task

DEFAULT_SCRIPTS = [
    ("attack", ["Conflict.Attack", "Life.Injure", "Life.Die"]),
    ("justice", [
        "Justice.Arrest-Jail", "Justice.Charge-Indict", "Justice.Trial-Hearing",
        "Justice.Convict", "Justice.Sentence",
    ]),
    ("transfer", ["Transaction.Transfer-Money", "Transaction.Transfer-Ownership", "Movement.Transport-Artifact"]),
    ("travel", ["Movement.Transport-Person", "Contact.Meet", "Contact.Broadcast"]),
    ("career", ["Personnel.Nominate", "Personnel.Elect", "Personnel.Start-Position", "Personnel.End-Position"]),
]

DEFAULT_LEXICON = {
    "Conflict.Attack": ["attack", "bomb", "shoot", "raid"],
    "Life.Injure": ["injure", "wound", "hurt"],
    "Life.Die": ["kill", "die", "murder"],
    "Justice.Arrest-Jail": ["arrest", "detain", "jail"],
    "Justice.Charge-Indict": ["charge", "indict", "accuse"],
    "Justice.Trial-Hearing": ["try", "hear"],
    "Justice.Convict": ["convict"],
    "Justice.Sentence": ["sentence"],
    "Transaction.Transfer-Money": ["pay", "fund", "donate"],
    "Transaction.Transfer-Ownership": ["buy", "sell", "acquire"],
    "Movement.Transport-Artifact": ["ship", "deliver"],
    "Movement.Transport-Person": ["travel", "fly", "arrive"],
    "Contact.Meet": ["meet", "visit"],
    "Contact.Broadcast": ["announce", "say", "tell"],
    "Personnel.Nominate": ["nominate"],
    "Personnel.Elect": ["elect", "vote"],
    "Personnel.Start-Position": ["hire", "appoint"],
    "Personnel.End-Position": ["resign", "retire"],
    "Business.Merge-Org": ["merge"],
    "Manufacture.Artifact": ["build", "manufacture"],
    "Life.Marry": ["marry", "wed"],
    "Conflict.Demonstrate": ["protest", "march"],
}

DEFAULT_DISTRACTORS = ["Business.Merge-Org", "Manufacture.Artifact", "Life.Marry", "Conflict.Demonstrate"]

_FUNCTION_WORDS = [("after", "IN"), ("and", "CC"), ("before", "IN"), ("while", "IN"), ("then", "IN")]
_SUBJECTS = [("they", "PRP"), ("officials", "NNS"), ("he", "PRP"), ("police", "NNS"), ("she", "PRP")]
_OBJECTS = [("people", "NNS"), ("the", "DT"), ("it", "PRP"), ("company", "NN"), ("city", "NN")]
_REALIS = (("Actual", 0.7), ("Generic", 0.2), ("Other", 0.1))


@dataclass
class Noise:
    coref_repeat: float = 0.3
    interleave: float = 0.5
    distractor_rate: float = 0.2
    order_swap: float = 0.15
    script_distractor_share: float = 0.5


@dataclass
class ScriptGrammar:
    scripts: list = field(default_factory=lambda: [(n, list(t)) for n, t in DEFAULT_SCRIPTS])
    lexicon: dict = field(default_factory=lambda: {k: list(v) for k, v in DEFAULT_LEXICON.items()})
    distractors: list = field(default_factory=lambda: list(DEFAULT_DISTRACTORS))
    noise: Noise = field(default_factory=Noise)
    seed: int = 0
    max_scripts: int = 3
    layers: bool = False

    def __post_init__(self):
        self.scripts = [(str(n), list(t)) for n, t in self.scripts]
        if isinstance(self.noise, dict):
            self.noise = Noise(**self.noise)
        for _, types in self.scripts:
            if len(types) < 2:
                raise ValueError("every script needs at least two event types")
            for t in types:
                if not self.lexicon.get(t):
                    raise ValueError(f"event type {t!r} has no lemma in the lexicon")
        for t in self.distractors:
            if not self.lexicon.get(t):
                raise ValueError(f"distractor type {t!r} has no lemma in the lexicon")
        for name, p in asdict(self.noise).items():
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"noise.{name}={p} outside [0, 1]")
        if not 1 <= self.max_scripts:
            raise ValueError("max_scripts must be >= 1")

    def script_of(self) -> dict[str, str]:
        return {t: name for name, types in self.scripts for t in types}

    def to_dict(self) -> dict:
        return {
            "scripts": [[n, t] for n, t in self.scripts],
            "lexicon": self.lexicon,
            "distractors": self.distractors,
            "noise": asdict(self.noise),
            "seed": self.seed,
            "max_scripts": self.max_scripts,
            "layers": self.layers,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "ScriptGrammar":
        allowed = {"scripts", "lexicon", "distractors", "noise", "seed", "max_scripts", "layers"}
        unknown = set(obj) - allowed
        if unknown:
            raise ValueError(f"unknown grammar fields: {sorted(unknown)}")
        return cls(**obj)


def separable_grammar(seed: int = 0) -> ScriptGrammar:
    """Every noise source off: each event has one mention and every link is a function of the type pair.

    Repeat mentions are left out too, since a link annotated on one of several
    mentions of an event is no longer fixed by the type pair alone.
    """
    return ScriptGrammar(
        noise=Noise(coref_repeat=0.0, interleave=0.0, distractor_rate=0.0, order_swap=0.0),
        seed=seed,
    )


def load_grammar(path: str | Path) -> ScriptGrammar:
    return ScriptGrammar.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def save_grammar(grammar: ScriptGrammar, path: str | Path) -> None:
    Path(path).write_text(json.dumps(grammar.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")


# ---------------------------------------------------------------- generation


def _realis(rng: random.Random) -> str:
    x = rng.random()
    for value, p in _REALIS:
        if x < p:
            return value
        x -= p
    return "Actual"


def _surface(lemma: str, rng: random.Random) -> tuple[str, str]:
    if rng.random() < 0.7:
        return (lemma + "d" if lemma.endswith("e") else lemma + "ed"), "VBD"
    return lemma, "NN"


def _generate_doc(grammar: ScriptGrammar, rng: random.Random, doc_id: str) -> Document:
    noise = grammar.noise
    k = rng.randint(1, min(grammar.max_scripts, len(grammar.scripts)))
    scripts = rng.sample(grammar.scripts, k)

    # events: (event key, type, realis); streams hold event keys in discourse order
    event_type: dict[int, str] = {}
    event_realis: dict[int, str] = {}
    links: list[tuple[int, int]] = []
    streams: list[list[int]] = []
    next_event = 0
    for _, types in scripts:
        length = rng.randint(2, len(types))
        start = rng.randint(0, len(types) - length)
        chain = []
        for t in types[start: start + length]:
            event_type[next_event] = t
            event_realis[next_event] = _realis(rng)
            chain.append(next_event)
            next_event += 1
        links += list(zip(chain, chain[1:]))
        order = list(chain)
        for p in range(len(order) - 1):
            if rng.random() < noise.order_swap:
                order[p], order[p + 1] = order[p + 1], order[p]
        stream = list(order)
        for e in chain:
            if rng.random() < noise.coref_repeat:
                first = stream.index(e)
                stream.insert(rng.randint(first + 1, len(stream)), e)
        streams.append(stream)

    if rng.random() < noise.interleave:
        merged = []
        queues = [list(s) for s in streams]
        while any(queues):
            live = [q for q in queues if q]
            q = rng.choices(live, weights=[len(x) for x in live])[0]
            merged.append(q.pop(0))
    else:
        merged = [e for s in streams for e in s]

    script_types = [t for _, types in grammar.scripts for t in types]
    sequence = []
    for e in merged:
        if rng.random() < noise.distractor_rate:
            pool = script_types if rng.random() < noise.script_distractor_share else grammar.distractors
            event_type[next_event] = rng.choice(pool)
            event_realis[next_event] = _realis(rng)
            sequence.append(next_event)
            next_event += 1
        sequence.append(e)

    # lay mentions out in sentences of one or two mentions
    sentences: list[Sentence] = []
    mentions: list[EventMention] = []
    mention_event: list[int] = []
    pos = 0
    while pos < len(sequence):
        take = 1 if rng.random() < 0.6 else 2
        group = sequence[pos: pos + take]
        pos += take
        toks: list[tuple[str, str, str]] = []
        heads: list[int] = []
        for g, e in enumerate(group):
            if g > 0 or rng.random() < 0.3:
                word, tag = rng.choice(_FUNCTION_WORDS)
                toks.append((word, word, tag))
            word, tag = rng.choice(_SUBJECTS)
            toks.append((word, word, tag))
            lemma = rng.choice(grammar.lexicon[event_type[e]])
            text, tag = _surface(lemma, rng)
            heads.append(len(toks))
            toks.append((text, lemma, tag))
            word, tag = rng.choice(_OBJECTS)
            toks.append((word, word, tag))
        has_time = rng.random() < 0.3
        if has_time:
            toks.append(("yesterday", "yesterday", "NN"))
        toks.append((".", ".", "."))
        si = len(sentences)
        tokens = tuple(Token(ti, t, lem, p) for ti, (t, lem, p) in enumerate(toks))
        deps = frames = times = None
        if grammar.layers:
            root = heads[0]
            deps = []
            for ti in range(len(tokens)):
                if ti == root:
                    deps.append((-1, ti, "root"))
                elif ti in heads:
                    deps.append((root, ti, "conj"))
                else:
                    owner = max((h for h in heads if h <= ti), default=root)
                    deps.append((owner, ti, "dep"))
            deps = tuple(deps)
            frames = tuple(
                Frame(event_type[e].split(".")[-1], h, (("Agent", (h - 1, h)),))
                for e, h in zip(group, heads)
            )
            times = ((len(toks) - 2, len(toks) - 1),) if has_time else ()
        sentences.append(Sentence(si, tokens, deps, frames, times))
        for e, h in zip(group, heads):
            k = len(mentions) + 1
            mentions.append(EventMention(f"m{k:03d}", si, (h, h + 1), h, event_type[e], event_realis[e], k))
            mention_event.append(e)

    by_event: dict[int, list[str]] = {}
    for m, e in zip(mentions, mention_event):
        by_event.setdefault(e, []).append(m.id)
    clusters = tuple(frozenset(ids) for e, ids in sorted(by_event.items()) if len(ids) > 1)
    clusters = tuple(sorted(clusters, key=sorted))
    after = []
    for a, b in links:
        src = rng.choice(by_event[a])
        dst = rng.choice(by_event[b])
        after.append((src, dst))
    gold = GoldAnnotation(clusters, tuple(after), ())
    doc = Document(doc_id, tuple(sentences), tuple(mentions), gold, None)
    validate(doc)
    return doc


def generate(grammar: ScriptGrammar, n_docs: int, prefix: str = "synth") -> list[Document]:
    """Deterministic given ``grammar.seed``; document k depends only on (seed, k)."""
    docs = []
    for k in range(n_docs):
        rng = random.Random(f"{grammar.seed}:{k}")
        docs.append(_generate_doc(grammar, rng, f"{prefix}-{grammar.seed}-{k:04d}"))
    return docs


def adjacency_baseline(doc: Document, grammar: ScriptGrammar | None = None) -> RelationGraph:
    """Link each mention forward from its nearest predecessor of another type in the same script."""
    script_of = (grammar or ScriptGrammar()).script_of()
    arcs = set()
    for j in range(1, doc.n + 1):
        tj = doc.mention(j).event_type
        if tj not in script_of:
            continue
        for i in range(j - 1, 0, -1):
            ti = doc.mention(i).event_type
            if ti != tj and script_of.get(ti) == script_of[tj]:
                arcs.add(Arc(i, j, Label.FORWARD))
                break
    return RelationGraph(doc.n, frozenset(arcs), Task.SEQUENCING).with_roots()
