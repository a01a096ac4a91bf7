"""Command line: ``evrel train|decode|score|generate``.

Exit codes: 0 success, 1 usage, 2 invalid input, 3 internal error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import __version__
from .corpus import CorpusError, Document, Prediction, read_corpus, read_predictions, write_corpus, write_predictions
from .decoder import SEARCHES
from .features import FAMILIES
from .metrics import AGGREGATES, baseline_matching, baseline_singleton, score_predictions
from .relgraph import Label, RelationGraph, Task, coref_partition, to_event_dag
from .synth import ScriptGrammar, adjacency_baseline, generate, load_grammar
from .trainer import ModelError, TrainConfig, load_model, save_model, train

log = logging.getLogger("evrel")

EXIT_OK, EXIT_USAGE, EXIT_INVALID, EXIT_INTERNAL = 0, 1, 2, 3
BASELINES = {Task.COREF: ("singleton", "matching"), Task.SEQUENCING: ("adjacency",)}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _parser() -> argparse.ArgumentParser:
    p = _Parser(prog="evrel", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"evrel {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    t = sub.add_parser("train", help="train a model on an annotated corpus")
    t.add_argument("corpus", type=Path)
    t.add_argument("-o", "--output", type=Path, required=True, help="model file to write")
    t.add_argument("--task", choices=[x.value for x in Task])
    t.add_argument("--iterations", type=int)
    t.add_argument("--C", type=float, dest="C", help="cap on the update size (default: none)")
    t.add_argument("--seed", type=int)
    t.add_argument("--no-averaging", dest="averaging", action="store_false", default=None)
    t.add_argument("--shuffle", action="store_true", default=None, help="seeded shuffle of document order")
    t.add_argument("--search", choices=SEARCHES, help="sequencing decoder (default: refine)")
    t.add_argument("--disable-family", action="append", default=None, metavar="NAME",
                   help="drop a feature family; repeatable, case-insensitive")
    t.add_argument("--config", type=Path, help="JSON file of defaults; flags override it")

    d = sub.add_parser("decode", help="write predictions for a corpus")
    d.add_argument("corpus", type=Path)
    d.add_argument("-o", "--output", type=Path, required=True, help="predictions file to write")
    src = d.add_mutually_exclusive_group(required=True)
    src.add_argument("--model", type=Path)
    src.add_argument("--baseline", help="singleton, matching (coref) or adjacency (sequencing)")
    d.add_argument("--task", choices=[x.value for x in Task])
    d.add_argument("--final-weights", action="store_true", help="decode with final, not averaged, weights")
    d.add_argument("--jobs", type=int, default=1)

    s = sub.add_parser("score", help="score predictions against a gold corpus")
    s.add_argument("gold", type=Path)
    s.add_argument("predictions", type=Path)
    s.add_argument("--task", choices=[x.value for x in Task], required=True)
    s.add_argument("--aggregate", choices=AGGREGATES, default="micro")
    s.add_argument("--json", type=Path, help="also write the report as JSON")

    g = sub.add_parser("generate", help="write a synthetic corpus")
    g.add_argument("-n", "--docs", type=int, required=True)
    g.add_argument("-o", "--output", type=Path, required=True)
    g.add_argument("--grammar", type=Path, help="grammar JSON (default: built-in scripts)")
    g.add_argument("--seed", type=int, help="overrides the grammar seed")
    g.add_argument("--layers", action="store_true", help="emit toy dependency, frame and time layers")
    return p


def _train_settings(args) -> tuple[TrainConfig, Task, list[str]]:
    base: dict = {}
    if args.config is not None:
        try:
            base = json.loads(args.config.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"{args.config}: cannot read config ({exc})") from exc
        if not isinstance(base, dict):
            raise UsageError(f"{args.config}: config must be a JSON object")
    allowed = {"task", "iterations", "C", "seed", "averaging", "shuffle", "search", "disable_family"}
    unknown = set(base) - allowed
    if unknown:
        raise UsageError(f"{args.config}: unknown config keys {sorted(unknown)}")
    for key in allowed:
        value = getattr(args, key, None)
        if value is not None:
            base[key] = value
    task = base.pop("task", None)
    if task is None:
        raise UsageError("--task is required (flag or config)")
    disabled = [f.lower() for f in base.pop("disable_family", None) or []]
    try:
        task = Task(task)
        config = TrainConfig(**base)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    unknown = set(disabled) - set(FAMILIES[task])
    if unknown:
        raise UsageError(f"unknown feature families for {task.value}: {sorted(unknown)}; "
                         f"choose from {', '.join(FAMILIES[task])}")
    return config, task, disabled


def cmd_train(args) -> int:
    config, task, disabled = _train_settings(args)
    log.info("train config %s", json.dumps({"task": task.value, **config.to_dict(),
                                            "disabled_families": sorted(disabled)}, sort_keys=True))
    log.info("seed %d", config.seed)
    corpus = read_corpus(args.corpus)
    try:
        model = train(corpus, config, task, disabled)
    except ValueError as exc:
        raise CorpusError(str(exc)) from exc
    save_model(model, args.output)
    log.info("wrote model to %s", args.output)
    return EXIT_OK


def _ids(doc: Document, indices) -> list[str]:
    return [doc.mention(i).id for i in sorted(indices)]


def _coref_prediction(doc: Document, blocks) -> Prediction:
    clusters = sorted((_ids(doc, b) for b in blocks if len(b) > 1), key=lambda c: c[0])
    return Prediction(doc.doc_id, coref=tuple(tuple(c) for c in clusters))


def _after_prediction(doc: Document, g: RelationGraph) -> Prediction:
    to_event_dag(g)  # decoded graphs are acyclic; fail loudly if not
    links = []
    for arc in g.link_arcs():
        a, b = (arc.source, arc.target) if arc.label is Label.FORWARD else (arc.target, arc.source)
        links.append((doc.mention(a).id, doc.mention(b).id))
    return Prediction(doc.doc_id, after=tuple(sorted(links)))


_WORKER_MODEL = None


def _init_worker(path, task, use_final):
    global _WORKER_MODEL
    _WORKER_MODEL = load_model(path, task, averaged=not use_final)


def _decode_with_model(doc: Document, model=None) -> Prediction:
    model = model or _WORKER_MODEL
    g = model.decode(doc)
    if model.task is Task.COREF:
        return _coref_prediction(doc, coref_partition(g))
    return _after_prediction(doc, g)


def _decode_baseline(doc: Document, name: str) -> Prediction:
    if name == "singleton":
        return _coref_prediction(doc, baseline_singleton(doc))
    if name == "matching":
        return _coref_prediction(doc, baseline_matching(doc))
    return _after_prediction(doc, adjacency_baseline(doc))


def cmd_decode(args) -> int:
    if args.jobs < 1:
        raise UsageError("--jobs must be >= 1")
    corpus = read_corpus(args.corpus)
    if args.baseline is not None:
        name = args.baseline.lower()
        task = Task(args.task) if args.task else next((t for t, b in BASELINES.items() if name in b), None)
        if task is None or name not in BASELINES[task]:
            raise UsageError(f"unknown baseline {args.baseline!r}")
        log.info("decode baseline %s (%s) on %d documents", name, task.value, len(corpus))
        preds = [_decode_baseline(doc, name) for doc in corpus]
    else:
        try:
            model = load_model(args.model, args.task, averaged=not args.final_weights)
        except (OSError, KeyError, TypeError) as exc:
            raise ModelError(f"{args.model}: {exc}") from exc
        log.info("decode with %s (%s, %s weights, %d jobs) on %d documents", args.model, model.task.value,
                 "final" if args.final_weights else "averaged", args.jobs, len(corpus))
        if args.jobs == 1 or len(corpus) < 2:
            preds = [_decode_with_model(doc, model) for doc in corpus]
        else:
            with ProcessPoolExecutor(args.jobs, initializer=_init_worker,
                                     initargs=(args.model, model.task, args.final_weights)) as pool:
                preds = list(pool.map(_decode_with_model, corpus, chunksize=4))
    write_predictions(preds, args.output)
    log.info("wrote %d predictions to %s", len(preds), args.output)
    return EXIT_OK


def cmd_score(args) -> int:
    gold = read_corpus(args.gold)
    preds = read_predictions(args.predictions)
    try:
        report = score_predictions(gold, preds, args.task, args.aggregate)
    except (ValueError, KeyError) as exc:
        raise CorpusError(f"{args.predictions}: {exc}") from exc
    print(report.to_text())
    if args.json is not None:
        args.json.write_text(report.to_json() + "\n", encoding="utf-8")
    return EXIT_OK


def cmd_generate(args) -> int:
    if args.docs < 0:
        raise UsageError("--docs must be >= 0")
    grammar = load_grammar(args.grammar) if args.grammar else ScriptGrammar()
    if args.seed is not None:
        grammar.seed = args.seed
    if args.layers:
        grammar.layers = True
    log.info("generate %d documents, grammar seed %d", args.docs, grammar.seed)
    write_corpus(generate(grammar, args.docs), args.output)
    return EXIT_OK


def _check_inputs(args) -> None:
    for name in ("corpus", "gold", "predictions", "model", "grammar", "config"):
        path = getattr(args, name, None)
        if path is not None and not path.is_file():
            raise UsageError(f"--{name} file not found: {path}" if name in ("model", "grammar", "config")
                             else f"{name} file not found: {path}")


COMMANDS = {"train": cmd_train, "decode": cmd_decode, "score": cmd_score, "generate": cmd_generate}


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(asctime)s %(levelname)s %(message)s", stream=sys.stderr)
    try:
        _check_inputs(args)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"evrel: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (CorpusError, ModelError, ValueError) as exc:
        print(f"evrel: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"evrel: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as exc:  # noqa: BLE001
        log.exception("internal error")
        print(f"evrel: internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
