"""Joint objective, SGD with momentum, and the per-sentence training loop.

Per sentence the objective is  crf_nll + alpha(epoch) * margin_loss
+ 0.5 * l2 * sum ||theta||^2  with alpha decaying multiplicatively each
epoch.  Steps are taken one sentence at a time; runs are deterministic
given the seed (fixed init, fixed shuffle order).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tape, Tensor
from .config import TrainConfig
from .corpus import LabelSet, Sentence, Vocabulary, encode_bio
from .evaluation import evaluate
from .graphs import Lexicon
from .labeler import crf_log_likelihood, margin_loss
from .model import Model, build_model


class TrainingError(RuntimeError):
    """Aborted run, e.g. a non-finite loss; message names the sentence."""


@dataclass
class OptimizerState:
    velocity: dict[str, np.ndarray]

    @classmethod
    def for_model(cls, model: Model) -> "OptimizerState":
        return cls(velocity={name: np.zeros_like(t.data) for name, t in model.named_parameters().items()})


def sgd_momentum_step(params: dict[str, Tensor], state: OptimizerState,
                      lr: float, momentum: float) -> None:
    """v <- momentum*v + g;  theta <- theta - lr*v.  Missing grads count as zero."""
    for name, tensor in params.items():
        grad = tensor.grad if tensor.grad is not None else 0.0
        v = state.velocity[name]
        v *= momentum
        v += grad
        tensor.data -= lr * v


def clip_gradients(params: dict[str, Tensor], max_norm: float) -> float:
    """Scale all gradients so their global L2 norm is at most ``max_norm``.

    Keeps the momentum updates bounded; at desk scale the per-sentence
    hinge gradients are otherwise large enough to destabilize the pinned
    lr/momentum setting.  Returns the pre-clip norm.
    """
    total = 0.0
    for tensor in params.values():
        if tensor.grad is not None:
            total += float((tensor.grad * tensor.grad).sum())
    norm = np.sqrt(total)
    if max_norm > 0 and norm > max_norm:
        scale = max_norm / norm
        for tensor in params.values():
            if tensor.grad is not None:
                tensor.grad *= scale
    return norm


def total_loss(sentence: Sentence, model: Model, config: TrainConfig, epoch: int) -> Tensor:
    """Joint objective for one sentence at the given epoch's margin weight."""
    forward = model.forward_scores(sentence)
    gold = encode_bio(sentence, model.label_set)
    loss = crf_log_likelihood(forward.scores, gold, model.crf)
    if not config.no_margin_loss:
        loss = loss + config.alpha(epoch) * margin_loss(forward.scores, gold, config.margin)
    if config.l2 > 0:
        penalty = None
        for tensor in model.named_parameters().values():
            term = ad.tsum(tensor * tensor)
            penalty = term if penalty is None else penalty + term
        loss = loss + 0.5 * config.l2 * penalty
    return loss


@dataclass
class TrainResult:
    model: Model
    history: list[dict]
    best_epoch: int
    best_tc_f1: float


def train_model(
    train_sentences: list[Sentence],
    dev_sentences: list[Sentence],
    lexicon: Lexicon,
    vocab: Vocabulary,
    label_set: LabelSet,
    config: TrainConfig,
    on_epoch=None,
) -> TrainResult:
    """Train from scratch, log one metrics record per epoch, keep the best-dev model.

    Model selection is by dev trigger-classification F1; the returned model
    carries the best epoch's parameters.
    """
    if not train_sentences:
        raise TrainingError("training corpus is empty")
    model = build_model(
        vocab, label_set, lexicon,
        d=config.d, n_layers=config.hgat_layers, ablation=config.ablation,
        train_sentences=train_sentences, seed=config.seed,
    )
    params = model.named_parameters()
    state = OptimizerState.for_model(model)
    shuffle_rng = np.random.default_rng(config.seed)
    history: list[dict] = []
    best_tc = -1.0
    best_epoch = -1
    best_params: dict[str, np.ndarray] | None = None
    for epoch in range(config.epochs):
        order = shuffle_rng.permutation(len(train_sentences))
        running = 0.0
        for idx in order:
            sentence = train_sentences[int(idx)]
            model.zero_grad()
            with Tape() as tape:
                loss = total_loss(sentence, model, config, epoch)
                value = loss.item()
                if not np.isfinite(value):
                    raise TrainingError(
                        f"non-finite loss ({value}) at epoch {epoch}, sentence index {int(idx)}"
                    )
                tape.backward(loss)
            clip_gradients(params, config.clip)
            sgd_momentum_step(params, state, config.lr, config.momentum)
            running += value
        predictions = [model.predict(s) for s in dev_sentences]
        report = evaluate(dev_sentences, predictions)
        record = {
            "epoch": epoch,
            "train_loss": running / len(train_sentences),
            "alpha": config.alpha(epoch),
            "dev_ti_f1": report.ti_f1,
            "dev_tc_f1": report.tc_f1,
        }
        history.append(record)
        if on_epoch is not None:
            on_epoch(record)
        if report.tc_f1 > best_tc:
            best_tc, best_epoch = report.tc_f1, epoch
            best_params = model.snapshot()
    if best_params is not None:
        model.restore(best_params)
    return TrainResult(model=model, history=history, best_epoch=best_epoch,
                       best_tc_f1=max(best_tc, 0.0))


def metrics_to_jsonl(history: list[dict]) -> str:
    return "".join(json.dumps(record) + "\n" for record in history)
