"""Event coreference and event sequencing with latent tree and graph decoding."""

from .corpus import CorpusError, Document, Prediction, read_corpus, write_corpus
from .decoder import decode, decode_coref, decode_gold, decode_lag
from .metrics import ScoreReport, average_f, b_cubed, blanc, ceaf_e, muc, tempeval
from .relgraph import Arc, EventDag, Label, RelationGraph, Task
from .trainer import Model, TrainConfig, load_model, save_model, train

__version__ = "0.1.0"

__all__ = [
    "Arc", "CorpusError", "Document", "EventDag", "Label", "Model", "Prediction",
    "RelationGraph", "ScoreReport", "Task", "TrainConfig", "average_f", "b_cubed",
    "blanc", "ceaf_e", "decode", "decode_coref", "decode_gold", "decode_lag",
    "load_model", "muc", "read_corpus", "save_model", "tempeval", "train",
    "write_corpus",
]
