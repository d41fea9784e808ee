"""Label matching (trigger-prototype embeddings, margin loss) and linear-chain CRF.

Label embedding rows are seeded with the occurrence-weighted mean of the
character embeddings observed under each B-/I- label in training data; rows
with no seed occurrences (always including "O") start uniform random.  The
CRF reads a learned k x k transform of the per-character matching-score
vector as its emission potential, a k x k transition bias over label pairs,
and a dedicated start vector in place of the nonexistent transition into
the first position.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .corpus import EmbeddingTable, LabelSet, Sentence, encode_bio
from .encoder import uniform_init

# additive mask that removes the gold column from the runner-up max without
# perturbing the remaining scores
_NEG = -1e30


@dataclass
class LabelEmbeddings:
    matrix: Tensor                      # (k, d), trainable
    seed_counts: list[int]              # occurrences that seeded each row
    seed_chars: list[list[str]]         # the seeding characters, in corpus order


@dataclass
class CrfParams:
    w_emit: Tensor   # (k, k); row y transforms the score vector into potential(y)
    b_trans: Tensor  # (k, k); bias for the label pair (y_prev, y_cur)
    start: Tensor    # (k,); replaces the transition into position 1


def init_crf_params(k: int) -> CrfParams:
    """Identity emission transform: training starts from score-as-potential."""
    return CrfParams(
        w_emit=Tensor(np.eye(k), requires_grad=True),
        b_trans=Tensor(np.zeros((k, k)), requires_grad=True),
        start=Tensor(np.zeros(k), requires_grad=True),
    )


def init_label_embeddings(
    sentences: list[Sentence],
    char_table: EmbeddingTable,
    label_set: LabelSet,
    rng: np.random.Generator,
    random_init: bool = False,
) -> LabelEmbeddings:
    """Trigger-prototype rows: mean char embedding per label, occurrence weighted.

    The begin character of each gold span seeds its B- row, the remaining
    characters seed the I- row.  ``random_init`` skips seeding entirely
    (ablation path); unseeded rows always draw uniform +-sqrt(3/d).
    """
    k = label_set.size
    d = char_table.dim
    seeds: list[list[str]] = [[] for _ in range(k)]
    if not random_init:
        for sentence in sentences:
            for span in sentence.triggers:
                seeds[label_set.begin_id(span.event_type)].append(sentence.chars[span.begin - 1])
                inside_id = label_set.inside_id(span.event_type)
                for pos in range(span.begin, span.end):
                    seeds[inside_id].append(sentence.chars[pos])
    matrix = np.empty((k, d))
    counts = []
    for row, chars in enumerate(seeds):
        if chars:
            stacked = np.stack([char_table.row(c) for c in chars])
            matrix[row] = stacked.sum(axis=0) / len(chars)
        else:
            matrix[row] = uniform_init(rng, (d,), d)
        counts.append(len(chars))
    return LabelEmbeddings(
        matrix=Tensor(matrix, requires_grad=True),
        seed_counts=counts,
        seed_chars=seeds,
    )


def matching_scores(h_char: Tensor, label_matrix: Tensor) -> Tensor:
    """Dot-product scores between character states and label rows: (n, k)."""
    if h_char.shape[1] != label_matrix.shape[1]:
        raise ad.DimensionError(
            f"state width {h_char.shape} does not match label width {label_matrix.shape}"
        )
    return h_char @ ad.transpose(label_matrix)


def margin_loss(scores: Tensor, gold_ids, margin: float) -> Tensor:
    """Sum over characters of max(margin + runner_up - gold, 0).

    The runner-up is the best-scoring non-gold label; ties pick the lowest
    label id.  Every character contributes, "O"-labeled ones included.
    """
    if margin <= 0:
        raise ValueError("margin must be positive")
    n, k = scores.shape
    gold = np.asarray(gold_ids, dtype=np.intp)
    if gold.shape != (n,) or (gold < 0).any() or (gold >= k).any():
        raise ValueError(f"gold ids must be {n} ids below {k}")
    mask = np.zeros((n, k))
    mask[np.arange(n), gold] = _NEG
    gold_scores = scores[np.arange(n), gold]
    runner_up = ad.amax(scores + Tensor(mask), axis=1)
    return ad.tsum(ad.relu(runner_up - gold_scores + margin))


def _potentials(scores: Tensor, crf: CrfParams) -> Tensor:
    """Emission potentials (n, k): row i is W_emit applied to the score vector."""
    return scores @ ad.transpose(crf.w_emit)


def crf_log_likelihood(scores: Tensor, gold_ids, crf: CrfParams) -> Tensor:
    """Negative log probability of the gold path under the linear-chain CRF."""
    n, k = scores.shape
    gold = np.asarray(gold_ids, dtype=np.intp)
    psi = _potentials(scores, crf)
    path = crf.start[int(gold[0])] + ad.tsum(psi[np.arange(n), gold])
    if n > 1:
        path = path + ad.tsum(crf.b_trans[gold[:-1], gold[1:]])
    alpha = crf.start + psi[0]
    for i in range(1, n):
        moved = ad.reshape(alpha, (k, 1)) + crf.b_trans + ad.reshape(psi[i], (1, k))
        alpha = ad.logsumexp(moved, axis=0)
    log_z = ad.logsumexp(alpha)
    return log_z - path


def crf_log_partition(scores: np.ndarray, crf: CrfParams) -> float:
    """Forward-algorithm log partition on plain arrays (no tape)."""
    scores = np.asarray(scores, dtype=np.float64)
    n = scores.shape[0]
    psi = scores @ crf.w_emit.data.T
    alpha = crf.start.data + psi[0]
    for i in range(1, n):
        moved = alpha[:, None] + crf.b_trans.data + psi[i][None, :]
        m = moved.max(axis=0)
        alpha = m + np.log(np.exp(moved - m).sum(axis=0))
    m = alpha.max()
    return float(m + np.log(np.exp(alpha - m).sum()))


def viterbi_decode(scores: np.ndarray, crf: CrfParams) -> list[int]:
    """Exact argmax label sequence; ties break toward the lowest label id."""
    scores = np.asarray(scores, dtype=np.float64)
    n, k = scores.shape
    psi = scores @ crf.w_emit.data.T
    best = crf.start.data + psi[0]
    back: list[np.ndarray] = []
    for i in range(1, n):
        moved = best[:, None] + crf.b_trans.data + psi[i][None, :]
        back.append(np.argmax(moved, axis=0))  # first max = lowest previous id
        best = np.max(moved, axis=0)
    tail = int(np.argmax(best))
    path = [tail]
    for pointers in reversed(back):
        tail = int(pointers[tail])
        path.append(tail)
    path.reverse()
    return path
