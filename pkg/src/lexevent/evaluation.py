"""Span-level trigger metrics, mismatch-recall analysis, similarity export.

Trigger identification (TI) credits a predicted span whose (begin, end)
matches a gold span; trigger classification (TC) additionally requires the
event type.  Each gold span is creditable at most once; duplicate
predictions beyond that count as false positives.  All metrics are
micro-averaged.
"""

from __future__ import annotations

import warnings
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import LabelSet, Sentence, Span
from .graphs import Lexicon, match_lexicon


@dataclass
class EvalReport:
    n_gold: int
    n_pred: int
    ti_correct: int
    tc_correct: int
    ti_p: float
    ti_r: float
    ti_f1: float
    tc_p: float
    tc_r: float
    tc_f1: float
    mismatch_recall: float | None = None
    mismatch_total: int | None = None

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _prf(correct: int, n_pred: int, n_gold: int) -> tuple[float, float, float]:
    p = correct / n_pred if n_pred else 0.0
    r = correct / n_gold if n_gold else 0.0
    f1 = 2 * p * r / (p + r) if p + r > 0 else 0.0
    return p, r, f1


def evaluate(gold_sentences: list[Sentence], predictions: list[list[Span]]) -> EvalReport:
    """Micro P/R/F1 for TI and TC over aligned gold/predicted span lists."""
    if len(gold_sentences) != len(predictions):
        raise ValueError(
            f"{len(predictions)} prediction lists for {len(gold_sentences)} sentences"
        )
    ti_gold: Counter = Counter()
    tc_gold: Counter = Counter()
    ti_pred: Counter = Counter()
    tc_pred: Counter = Counter()
    for s, (sentence, spans) in enumerate(zip(gold_sentences, predictions)):
        for span in sentence.triggers:
            ti_gold[(s, span.begin, span.end)] += 1
            tc_gold[(s, span.begin, span.end, span.event_type)] += 1
        for span in spans:
            ti_pred[(s, span.begin, span.end)] += 1
            tc_pred[(s, span.begin, span.end, span.event_type)] += 1
    ti_correct = sum((ti_gold & ti_pred).values())
    tc_correct = sum((tc_gold & tc_pred).values())
    n_gold = sum(ti_gold.values())
    n_pred = sum(ti_pred.values())
    ti = _prf(ti_correct, n_pred, n_gold)
    tc = _prf(tc_correct, n_pred, n_gold)
    return EvalReport(
        n_gold=n_gold, n_pred=n_pred,
        ti_correct=ti_correct, tc_correct=tc_correct,
        ti_p=ti[0], ti_r=ti[1], ti_f1=ti[2],
        tc_p=tc[0], tc_r=tc[1], tc_f1=tc[2],
    )


def mismatch_recall(
    gold_sentences: list[Sentence],
    predictions: list[list[Span]],
    lexicon: Lexicon,
) -> tuple[float | None, int]:
    """TI recall over gold triggers whose span equals no lexicon match.

    Returns (recall, subset_size); recall is None when the subset is empty
    (not applicable rather than zero).
    """
    found = 0
    total = 0
    for sentence, spans in zip(gold_sentences, predictions):
        match_spans = {(m.begin, m.end) for m in match_lexicon(sentence, lexicon)}
        predicted = Counter((s.begin, s.end) for s in spans)
        for trig in sentence.triggers:
            key = (trig.begin, trig.end)
            if key in match_spans:
                continue
            total += 1
            if predicted[key] > 0:
                predicted[key] -= 1
                found += 1
    if total == 0:
        return None, 0
    return found / total, total


def annotate_mismatch(report: EvalReport, gold_sentences, predictions, lexicon) -> EvalReport:
    recall, total = mismatch_recall(gold_sentences, predictions, lexicon)
    report.mismatch_recall = recall
    report.mismatch_total = total
    return report


def similarity_matrix(
    label_matrix: np.ndarray,
    label_set: LabelSet,
    subset: str = "B",
) -> tuple[list[str], np.ndarray]:
    """Row-normalized cosine similarities over the B- or I- label rows.

    The diagonal is masked to -inf before the per-row softmax, so each row
    sums to 1 over the other labels.  Zero-norm rows are excluded with a
    warning (they have no direction to compare).
    """
    if subset not in ("B", "I"):
        raise ValueError(f"subset must be 'B' or 'I', got {subset!r}")
    names = []
    rows = []
    for event_type in label_set.event_types:
        label = f"{subset}-{event_type}"
        row = label_matrix[label_set.label_to_id(label)]
        norm = float(np.linalg.norm(row))
        if norm == 0.0:
            warnings.warn(f"label {label} has a zero-norm embedding; excluded")
            continue
        names.append(label)
        rows.append(row / norm)
    if len(rows) < 2:
        raise ValueError("similarity export needs at least two nonzero label rows")
    unit = np.stack(rows)
    sim = unit @ unit.T
    np.fill_diagonal(sim, -np.inf)
    shifted = sim - sim.max(axis=1, keepdims=True)
    weights = np.where(np.isfinite(shifted), np.exp(shifted), 0.0)
    normalized = weights / weights.sum(axis=1, keepdims=True)
    return names, normalized


def export_similarity(
    label_matrix: np.ndarray,
    label_set: LabelSet,
    subset: str = "B",
    path=None,
) -> tuple[list[str], np.ndarray]:
    names, matrix = similarity_matrix(label_matrix, label_set, subset)
    if path is not None:
        lines = ["," + ",".join(names)]
        for name, row in zip(names, matrix):
            lines.append(name + "," + ",".join(repr(float(v)) for v in row))
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    return names, matrix
