"""Passive-Aggressive online training over latent decoding structures."""
from __future__ import annotations

import json
import logging
import math
import random
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

from .corpus import Document
from .decoder import SEARCHES, decode, decode_gold, gold_graph
from .features import FAMILIES, ArcTable, WeightVector, arc_features
from .relgraph import Arc, RelationGraph, Task, inferable_arcs, loss, matches

log = logging.getLogger(__name__)

MODEL_FORMAT = "evrel-model"
MODEL_VERSION = 1


class ModelError(ValueError):
    pass


@dataclass
class TrainConfig:
    iterations: int = 20
    C: float = math.inf
    averaging: bool = True
    seed: int = 0
    shuffle: bool = False
    search: str = "refine"

    def __post_init__(self):
        if self.C is None:
            self.C = math.inf
        self.iterations = int(self.iterations)
        self.C = float(self.C)
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if not self.C > 0:
            raise ValueError("C must be positive")
        if self.search not in SEARCHES:
            raise ValueError(f"search must be one of {SEARCHES}")

    def to_dict(self) -> dict:
        out = asdict(self)
        out["C"] = None if math.isinf(self.C) else self.C
        return out


@dataclass
class StepInfo:
    matched: bool
    loss: float = 0.0
    tau: float = 0.0
    delta_norm2: float = 0.0
    margin_before: float = 0.0
    margin_after: float = 0.0
    anomaly: bool = False

    @property
    def updated(self) -> bool:
        return not self.matched and not self.anomaly


@dataclass
class Model:
    weights: WeightVector
    averaged_weights: WeightVector
    task: Task
    config: TrainConfig
    disabled_families: frozenset = frozenset()
    log: list = field(default_factory=list)
    use_averaged: bool = True

    @property
    def active(self) -> WeightVector:
        return self.averaged_weights if self.use_averaged else self.weights

    def table(self, doc: Document) -> ArcTable:
        return ArcTable(doc, self.task, self.active, self.disabled_families, grow=False)

    def decode(self, doc: Document, clusters=()) -> RelationGraph:
        return decode(doc, self.active, self.task, clusters=clusters, table=self.table(doc),
                      search=self.config.search)


def feature_delta(
    gold: RelationGraph,
    system: RelationGraph,
    doc: Document,
    clusters: Iterable[Iterable[int]] | None = None,
    featurize: Callable[[Arc], Mapping] | None = None,
) -> dict:
    """Gold-structure features minus system-structure features.

    System arcs that are absent from ``gold`` but implied by its inferred graph
    are left out of the system side.
    """
    if clusters is None:
        clusters = doc.cluster_sets()
    if featurize is None:
        featurize = lambda arc: arc_features(doc, arc, gold.task)  # noqa: E731
    skip = inferable_arcs(system, gold, clusters)
    delta: dict = {}
    for arc in sorted(gold.arcs - system.arcs):
        for k, v in featurize(arc).items():
            delta[k] = delta.get(k, 0.0) + v
    for arc in sorted(system.arcs - gold.arcs - skip):
        for k, v in featurize(arc).items():
            delta[k] = delta.get(k, 0.0) - v
    return {k: v for k, v in delta.items() if v != 0.0}


def pa_step(
    w: WeightVector,
    doc: Document,
    task: Task | str,
    *,
    table: ArcTable | None = None,
    C: float = math.inf,
    disabled: Iterable[str] = (),
    search: str = "refine",
) -> StepInfo:
    """One Passive-Aggressive update on a single document, in place."""
    task = Task(task)
    if doc.gold is None:
        raise ValueError(f"doc {doc.doc_id!r} has no gold annotation")
    if table is None:
        table = ArcTable(doc, task, w, disabled, grow=True)
    clusters = doc.cluster_sets()
    scores = table.scores(w)
    predicted = decode(doc, task=task, clusters=clusters, scores=scores, search=search)
    if matches(predicted, gold_graph(doc, task), clusters):
        return StepInfo(matched=True)

    latent_gold = decode_gold(doc, task=task, scores=scores)
    delta = feature_delta(latent_gold, predicted, doc, clusters, featurize=table.feature_ids)
    step_loss = float(loss(latent_gold, predicted, clusters))
    norm2 = float(sum(v * v for v in delta.values()))
    if norm2 == 0.0:
        log.debug("doc %s: loss %.1f with empty feature delta, update skipped", doc.doc_id, step_loss)
        return StepInfo(matched=False, loss=step_loss, anomaly=True)

    tau = min(C, step_loss / norm2)
    before = w.dot_ids(delta)
    w.add(delta, tau)
    after = w.dot_ids(delta)
    gain = tau * norm2
    if not (after - before > 0 and math.isclose(after - before, gain, rel_tol=1e-7, abs_tol=1e-9)):
        raise RuntimeError(
            f"doc {doc.doc_id}: margin moved by {after - before!r}, expected {gain!r}"
        )
    return StepInfo(False, step_loss, tau, norm2, before, after)


def _check_families(task: Task, disabled: Iterable[str]) -> frozenset:
    disabled = frozenset(f.lower() for f in disabled)
    unknown = disabled - set(FAMILIES[task])
    if unknown:
        raise ValueError(f"unknown feature families for {task.value}: {sorted(unknown)}")
    return disabled


def train(
    corpus: Sequence[Document],
    config: TrainConfig | None = None,
    task: Task | str = Task.COREF,
    disabled: Iterable[str] = (),
    on_step: Callable[[Document, StepInfo], None] | None = None,
) -> Model:
    task = Task(task)
    config = config or TrainConfig()
    disabled = _check_families(task, disabled)
    if not corpus:
        raise ValueError("cannot train on an empty corpus")
    for doc in corpus:
        if doc.gold is None:
            raise ValueError(f"training doc {doc.doc_id!r} has no gold annotation")

    w = WeightVector()
    tables = [ArcTable(doc, task, w, disabled, grow=True) for doc in corpus]
    order = list(range(len(corpus)))
    rng = random.Random(config.seed)
    history = []
    for epoch in range(1, config.iterations + 1):
        if config.shuffle:
            rng.shuffle(order)
        matched = updates = anomalies = 0
        total_loss = 0.0
        for k in order:
            info = pa_step(w, corpus[k], task, table=tables[k], C=config.C, search=config.search)
            w.tick()
            matched += info.matched
            updates += info.updated
            anomalies += info.anomaly
            total_loss += info.loss
            if on_step is not None:
                on_step(corpus[k], info)
        row = {
            "epoch": epoch,
            "match_rate": matched / len(corpus),
            "loss": total_loss,
            "updates": updates,
            "anomalies": anomalies,
        }
        history.append(row)
        log.info("epoch %d match_rate %.4f loss %.1f updates %d anomalies %d",
                 epoch, row["match_rate"], total_loss, updates, anomalies)

    final = WeightVector(w.to_dict())
    averaged = WeightVector(w.averaged().to_dict())
    return Model(final, averaged, task, config, disabled, history, config.averaging)


# ---------------------------------------------------------------- persistence


def model_to_dict(m: Model) -> dict:
    return {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "task": m.task.value,
        "config": m.config.to_dict(),
        "disabled_families": sorted(m.disabled_families),
        "log": m.log,
        "weights": [[k, v] for k, v in m.weights.items()],
        "averaged": [[k, v] for k, v in m.averaged_weights.items()],
    }


def save_model(m: Model, path: str | Path) -> None:
    text = json.dumps(model_to_dict(m), sort_keys=True, ensure_ascii=False, indent=0)
    Path(path).write_text(text + "\n", encoding="utf-8")


def load_model(path: str | Path, task: Task | str | None = None, averaged: bool | None = None) -> Model:
    """Read a model file; ``averaged`` picks the weight set used for decoding."""
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ModelError(f"{path}: not a model file ({exc})") from exc
    if obj.get("format") != MODEL_FORMAT:
        raise ModelError(f"{path}: not a model file")
    if obj.get("version") != MODEL_VERSION:
        raise ModelError(f"{path}: model version {obj.get('version')} unsupported (need {MODEL_VERSION})")
    model_task = Task(obj["task"])
    if task is not None and Task(task) is not model_task:
        raise ModelError(f"{path}: model was trained for {model_task.value}, not {Task(task).value}")
    config = TrainConfig(**obj["config"])
    return Model(
        weights=WeightVector(dict(obj["weights"])),
        averaged_weights=WeightVector(dict(obj["averaged"])),
        task=model_task,
        config=config,
        disabled_families=frozenset(obj.get("disabled_families", ())),
        log=obj.get("log", []),
        use_averaged=config.averaging if averaged is None else averaged,
    )
