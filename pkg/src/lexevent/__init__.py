"""Lexicon-aware heterogeneous graph attention for Chinese event trigger detection.

A character-level sequence labeler: sentences become typed graphs over
character and lexicon-word nodes, a BiLSTM plus stacked graph attention
layers encode them, trigger-prototype label embeddings score each
character against every BIO label, and a linear-chain CRF decodes spans.
Everything differentiable runs on the reverse-mode engine in
``lexevent.autodiff``.
"""

from .autodiff import Tape, Tensor
from .config import Ablation, TrainConfig, load_config
from .corpus import (
    LabelSet,
    Sentence,
    Span,
    Vocabulary,
    decode_bio,
    encode_bio,
    generate_synthetic_corpus,
    load_corpus,
    load_embeddings,
)
from .evaluation import EvalReport, evaluate, export_similarity, mismatch_recall
from .graphs import HeteroGraph, Lexicon, build_graph, match_lexicon
from .model import Model, build_model, lexicon_from_vocab
from .training import TrainResult, total_loss, train_model

__version__ = "0.1.0"

__all__ = [
    "Ablation",
    "EvalReport",
    "HeteroGraph",
    "LabelSet",
    "Lexicon",
    "Model",
    "Sentence",
    "Span",
    "Tape",
    "Tensor",
    "TrainConfig",
    "TrainResult",
    "Vocabulary",
    "build_graph",
    "build_model",
    "decode_bio",
    "encode_bio",
    "evaluate",
    "export_similarity",
    "generate_synthetic_corpus",
    "lexicon_from_vocab",
    "load_config",
    "load_corpus",
    "load_embeddings",
    "match_lexicon",
    "mismatch_recall",
    "total_loss",
    "train_model",
]
