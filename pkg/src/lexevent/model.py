"""Model assembly: every trainable tensor, the per-sentence forward pass,
and versioned JSON checkpoints that round-trip bit-exactly.

The lexicon is part of the model: by default the word-embedding vocabulary
doubles as the word inventory, and matching requires an embedding row, so
words without one never become graph nodes.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .autodiff import Tensor
from .config import Ablation
from .corpus import EmbeddingTable, LabelSet, Sentence, Vocabulary, decode_bio
from .encoder import EncodeResult, EncoderParams, encode, init_encoder_params
from .graphs import HeteroGraph, Lexicon, apply_graph_ablation, build_graph, match_lexicon
from .labeler import (
    CrfParams,
    LabelEmbeddings,
    init_crf_params,
    init_label_embeddings,
    matching_scores,
    viterbi_decode,
)

CHECKPOINT_VERSION = 1


def lexicon_from_vocab(words: EmbeddingTable) -> Lexicon:
    """Word inventory straight from the embedding vocabulary (1-char tokens skipped)."""
    lexicon = Lexicon()
    for token in words.tokens:
        if len(token) >= 2:
            lexicon.add(token, words.token_to_id[token])
    return lexicon


def lexicon_from_words(word_list, words: EmbeddingTable) -> Lexicon:
    """Explicit word list; entries without an embedding row are dropped with a warning."""
    lexicon = Lexicon()
    missing = 0
    for token in word_list:
        if len(token) < 2:
            continue
        if token in words:
            lexicon.add(token, words.token_to_id[token])
        else:
            missing += 1
    if missing:
        warnings.warn(f"{missing} lexicon word(s) lack embedding rows and were skipped")
    return lexicon


@dataclass
class ForwardResult:
    scores: Tensor            # (n, k) matching scores
    graph: HeteroGraph
    encoded: EncodeResult


class Model:
    """All trainable parameters plus the sentence-to-scores pipeline."""

    def __init__(
        self,
        vocab: Vocabulary,
        label_set: LabelSet,
        lexicon: Lexicon,
        d: int,
        n_layers: int,
        ablation: Ablation,
        char_emb: Tensor,
        word_emb: Tensor,
        encoder: EncoderParams,
        labels: LabelEmbeddings,
        crf: CrfParams,
    ):
        self.vocab = vocab
        self.label_set = label_set
        self.lexicon = lexicon
        self.d = d
        self.n_layers = n_layers
        self.ablation = ablation
        self.char_emb = char_emb
        self.word_emb = word_emb
        self.encoder = encoder
        self.labels = labels
        self.crf = crf

    def named_parameters(self) -> dict[str, Tensor]:
        """Stable name -> tensor map; tied projections appear exactly once."""
        params: dict[str, Tensor] = {
            "char_emb": self.char_emb,
            "word_emb": self.word_emb,
            "lstm_fwd.w_x": self.encoder.lstm_fwd.w_x,
            "lstm_fwd.w_h": self.encoder.lstm_fwd.w_h,
            "lstm_fwd.b": self.encoder.lstm_fwd.b,
            "lstm_bwd.w_x": self.encoder.lstm_bwd.w_x,
            "lstm_bwd.w_h": self.encoder.lstm_bwd.w_h,
            "lstm_bwd.b": self.encoder.lstm_bwd.b,
        }
        for i, layer in enumerate(self.encoder.layers):
            params[f"layer{i}.proj_char"] = layer.proj["char"]
            if layer.proj["word"] is not layer.proj["char"]:
                params[f"layer{i}.proj_word"] = layer.proj["word"]
            for kind in ("c2c", "w2c", "c2w"):
                params[f"layer{i}.attn_{kind}"] = layer.attn[kind]
            params[f"layer{i}.type_q"] = layer.type_q
            params[f"layer{i}.type_w"] = layer.type_w
            params[f"layer{i}.type_b"] = layer.type_b
        params["label_emb"] = self.labels.matrix
        params["crf.w_emit"] = self.crf.w_emit
        params["crf.b_trans"] = self.crf.b_trans
        params["crf.start"] = self.crf.start
        return params

    def zero_grad(self) -> None:
        for tensor in self.named_parameters().values():
            tensor.zero_grad()

    def snapshot(self) -> dict[str, np.ndarray]:
        return {name: t.data.copy() for name, t in self.named_parameters().items()}

    def restore(self, snapshot: dict[str, np.ndarray]) -> None:
        for name, tensor in self.named_parameters().items():
            tensor.data = snapshot[name].copy()

    # forward ------------------------------------------------------------
    def sentence_graph(self, sentence: Sentence) -> HeteroGraph:
        matches = [] if self.ablation.no_word else match_lexicon(sentence, self.lexicon)
        return apply_graph_ablation(build_graph(sentence, matches), self.ablation)

    def forward_scores(self, sentence: Sentence, collect_diagnostics: bool = False) -> ForwardResult:
        graph = self.sentence_graph(sentence)
        char_ids = [self.vocab.chars.id_of(c) for c in sentence.chars]
        word_ids = [m.word_id for m in graph.words]
        encoded = encode(
            char_ids, word_ids, graph, self.char_emb, self.word_emb,
            self.encoder, collect_diagnostics=collect_diagnostics,
        )
        scores = matching_scores(encoded.h_char, self.labels.matrix)
        return ForwardResult(scores=scores, graph=graph, encoded=encoded)

    def predict_ids(self, sentence: Sentence) -> list[int]:
        result = self.forward_scores(sentence)
        return viterbi_decode(result.scores.data, self.crf)

    def predict(self, sentence: Sentence):
        return decode_bio(self.predict_ids(sentence), self.label_set)

    # persistence ----------------------------------------------------------
    def save(self, path) -> None:
        payload = {
            "format_version": CHECKPOINT_VERSION,
            "d": self.d,
            "hgat_layers": self.n_layers,
            "ablation": {
                "no_Wtau": self.ablation.no_Wtau,
                "no_c2c": self.ablation.no_c2c,
                "last_char_only": self.ablation.last_char_only,
                "no_c2w": self.ablation.no_c2w,
                "no_word": self.ablation.no_word,
                "no_margin_loss": self.ablation.no_margin_loss,
                "no_prototype_init": self.ablation.no_prototype_init,
            },
            "event_types": self.label_set.event_types,
            "char_tokens": self.vocab.chars.tokens,
            "word_tokens": self.vocab.words.tokens,
            "lexicon_words": self.lexicon.words,
            "label_seed_counts": self.labels.seed_counts,
            "params": {
                name: {"shape": list(t.shape), "data": t.data.ravel().tolist()}
                for name, t in self.named_parameters().items()
            },
        }
        Path(path).write_text(json.dumps(payload, ensure_ascii=False), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "Model":
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        if payload.get("format_version") != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {payload.get('format_version')!r}")
        arrays = {
            name: np.array(entry["data"], dtype=np.float64).reshape(entry["shape"])
            for name, entry in payload["params"].items()
        }
        ablation = Ablation(**payload["ablation"])
        d = payload["d"]
        n_layers = payload["hgat_layers"]
        label_set = LabelSet(payload["event_types"])
        vocab = Vocabulary(
            chars=EmbeddingTable.from_full_matrix(payload["char_tokens"], arrays["char_emb"]),
            words=EmbeddingTable.from_full_matrix(payload["word_tokens"], arrays["word_emb"]),
        )
        lexicon = lexicon_from_words(payload["lexicon_words"], vocab.words)
        model = build_model(
            vocab, label_set, lexicon, d=d, n_layers=n_layers,
            ablation=ablation, train_sentences=[], seed=0,
        )
        for name, tensor in model.named_parameters().items():
            if name not in arrays:
                raise ValueError(f"checkpoint is missing parameter {name!r}")
            if tuple(arrays[name].shape) != tensor.shape:
                raise ValueError(f"checkpoint shape mismatch for {name!r}")
            tensor.data = arrays[name]
        model.labels.seed_counts = list(payload.get("label_seed_counts", []))
        return model


def build_model(
    vocab: Vocabulary,
    label_set: LabelSet,
    lexicon: Lexicon,
    d: int,
    n_layers: int,
    ablation: Ablation,
    train_sentences: list[Sentence],
    seed: int,
) -> Model:
    """Seeded initialization; the rng is consumed in a fixed order."""
    ablation.validate()
    if vocab.chars.dim != d or vocab.words.dim != d:
        raise ValueError(
            f"embedding dims ({vocab.chars.dim}, {vocab.words.dim}) must equal d={d}"
        )
    rng = np.random.default_rng(seed)
    encoder = init_encoder_params(rng, d, n_layers, share_projection=ablation.no_Wtau)
    labels = init_label_embeddings(
        train_sentences, vocab.chars, label_set, rng,
        random_init=ablation.no_prototype_init,
    )
    return Model(
        vocab=vocab,
        label_set=label_set,
        lexicon=lexicon,
        d=d,
        n_layers=n_layers,
        ablation=ablation,
        char_emb=Tensor(vocab.chars.vectors.copy(), requires_grad=True),
        word_emb=Tensor(vocab.words.vectors.copy(), requires_grad=True),
        encoder=encoder,
        labels=labels,
        crf=init_crf_params(label_set.size),
    )
