"""Acceptance suite: every criterion at its stated tolerance, one line each.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
PASS/FAIL lines.  All checks run end-to-end on generated data.
"""

import json
import time

import numpy as np
import pytest

from lexevent.autodiff import Tape, Tensor
from lexevent.cli import main as cli_main
from lexevent.config import Ablation, TrainConfig
from lexevent.corpus import LabelSet, Sentence, Span, generate_synthetic_corpus
from lexevent.encoder import EncoderDiagnostics, hgat_layer, input_layer
from lexevent.evaluation import evaluate, similarity_matrix
from lexevent.graphs import Lexicon, MatchedWord, apply_graph_ablation, build_graph
from lexevent.labeler import init_crf_params, init_label_embeddings, viterbi_decode, crf_log_partition
from lexevent.model import build_model, lexicon_from_vocab
from lexevent.training import total_loss, train_model

from oracles import (
    brute_force_matches,
    crf_brute_argmax,
    crf_enumerate,
    finite_difference,
    naive_cosine_softmax,
    naive_span_scores,
    relative_error,
)


def report(number: int, name: str, ok: bool, detail: str) -> None:
    print(f"ACCEPTANCE {number:2d} {name}: {'PASS' if ok else 'FAIL'} ({detail})")


def small_instance(dim=8, seed=3, **flags):
    """3-character, 2-event-type instance whose first two chars match a word."""
    data = generate_synthetic_corpus(
        seed=seed, n_event_types=2, n_sentences=6,
        alphabet_size=20, lexicon_size=10, dim=dim,
    )
    vocab = data.vocabulary()
    lexicon = lexicon_from_vocab(vocab.words)
    config = TrainConfig(d=dim, seed=seed, **flags)
    model = build_model(
        vocab, data.label_set, lexicon, d=dim, n_layers=2,
        ablation=config.ablation, train_sentences=data.sentences, seed=seed,
    )
    event = data.label_set.event_types[0]
    trigger = data.trigger_tokens[event][0]  # a lexicon word, so word paths fire
    sentence = Sentence(list(trigger) + [vocab.chars.tokens[-1]], [Span(1, 2, event)])
    return model, config, sentence


def model_gradient_check(model, config, sentence, step=1e-4, tol=1e-4):
    params = model.named_parameters()
    model.zero_grad()
    with Tape() as tape:
        tape.backward(total_loss(sentence, model, config, epoch=0))
    leaves = list(params.values())
    numeric = finite_difference(
        lambda: total_loss(sentence, model, config, epoch=0).item(),
        [t.data for t in leaves], step=step,
    )
    worst = 0.0
    for tensor, fd in zip(leaves, numeric):
        analytic = tensor.grad if tensor.grad is not None else np.zeros_like(tensor.data)
        worst = max(worst, relative_error(analytic, fd))
    return worst, tol


def test_criterion_1_gradient_fidelity():
    """Analytic gradient of the total loss vs central differences, every parameter."""
    start = time.time()
    model, config, sentence = small_instance()
    worst, tol = model_gradient_check(model, config, sentence)
    elapsed = time.time() - start
    ok = worst < tol and elapsed < 30.0
    report(1, "gradient-fidelity", ok, f"max rel err {worst:.2e}, {elapsed:.1f}s")
    assert worst < tol
    assert elapsed < 30.0


def test_criterion_2_crf_exactness():
    """Sum of path probabilities is 1 and Viterbi equals enumeration argmax."""
    start = time.time()
    rng = np.random.default_rng(17)
    worst_sum_gap = 0.0
    for _ in range(1000):
        n = int(rng.integers(1, 5))
        k = int(rng.integers(2, 6))
        scores = rng.normal(scale=2.0, size=(n, k))
        crf = init_crf_params(k)
        crf.w_emit = Tensor(rng.normal(size=(k, k)))
        crf.b_trans = Tensor(rng.normal(size=(k, k)))
        crf.start = Tensor(rng.normal(size=k))
        psi = scores @ crf.w_emit.data.T
        log_z = crf_log_partition(scores, crf)
        _, path_scores = crf_enumerate(psi, crf.b_trans.data, crf.start.data)
        gap = abs(np.exp(path_scores - log_z).sum() - 1.0)
        worst_sum_gap = max(worst_sum_gap, gap)
        assert gap < 1e-9
        assert viterbi_decode(scores, crf) == crf_brute_argmax(psi, crf.b_trans.data, crf.start.data)
    elapsed = time.time() - start
    ok = elapsed < 60.0
    report(2, "crf-exactness", ok, f"1000 trials, worst sum gap {worst_sum_gap:.1e}, {elapsed:.1f}s")
    assert elapsed < 60.0


def test_criterion_3_attention_normalization():
    """Neighborhood softmaxes and type weights sum to 1 on 100 random graphs."""
    data = generate_synthetic_corpus(
        seed=23, n_event_types=2, n_sentences=100,
        alphabet_size=20, lexicon_size=10, dim=8,
    )
    vocab = data.vocabulary()
    model = build_model(
        vocab, data.label_set, lexicon_from_vocab(vocab.words), d=8, n_layers=2,
        ablation=Ablation(), train_sentences=data.sentences, seed=5,
    )
    checked_nodes = 0
    checked_types = 0
    for sentence in data.sentences:
        result = model.forward_scores(sentence, collect_diagnostics=True)
        diag = result.encoded.diagnostics
        for weights in diag.node_attn.values():
            assert abs(weights.sum() - 1.0) < 1e-9
            checked_nodes += 1
        for betas in diag.type_attn.values():
            assert abs(betas.sum() - 1.0) < 1e-9
            checked_types += 1
    ok = checked_nodes > 0 and checked_types > 0
    report(3, "attention-normalization", ok,
           f"{checked_nodes} neighborhoods, {checked_types} type fusions, tol 1e-9")
    assert ok


def test_criterion_4_prototype_init_exact():
    """Label rows equal the occurrence-weighted seed mean bit-for-bit."""
    data = generate_synthetic_corpus(
        seed=7, n_event_types=3, n_sentences=20, lexicon_size=14, dim=16,
    )
    vocab = data.vocabulary()
    emb = init_label_embeddings(
        data.sentences, vocab.chars, data.label_set, np.random.default_rng(0)
    )
    # hand-count oracle: scan spans directly, stack rows, same mean reduction
    per_label: dict[int, list[np.ndarray]] = {}
    for sentence in data.sentences:
        for span in sentence.triggers:
            b_id = data.label_set.begin_id(span.event_type)
            per_label.setdefault(b_id, []).append(vocab.chars.row(sentence.chars[span.begin - 1]))
            i_id = data.label_set.inside_id(span.event_type)
            for pos in range(span.begin, span.end):
                per_label.setdefault(i_id, []).append(vocab.chars.row(sentence.chars[pos]))
    rows_checked = 0
    for label_id, rows in per_label.items():
        expect = np.stack(rows).sum(axis=0) / len(rows)
        assert (emb.matrix.data[label_id] == expect).all(), data.label_set.id_to_label(label_id)
        assert emb.seed_counts[label_id] == len(rows)
        rows_checked += 1
    ok = rows_checked >= 6  # B and I rows for all three types
    report(4, "prototype-init-exactness", ok, f"{rows_checked} seeded rows bit-identical")
    assert ok


@pytest.fixture(scope="module")
def overfit_run():
    start = time.time()
    data = generate_synthetic_corpus(
        seed=7, n_event_types=3, n_sentences=20, lexicon_size=14, dim=100,
    )
    vocab = data.vocabulary()
    config = TrainConfig(epochs=200, seed=1)  # defaults: d=100, L=2, m=2, a0=0.85, lr=0.1, mom=0.9
    result = train_model(
        data.sentences, data.sentences, lexicon_from_vocab(vocab.words),
        vocab, data.label_set, config,
    )
    return data, config, result, time.time() - start


def test_criterion_5_overfit(overfit_run):
    """Pinned hyperparameters reach train TC F1 = 1.0 within 200 epochs."""
    data, config, result, elapsed = overfit_run
    assert (config.d, config.hgat_layers, config.margin) == (100, 2, 2.0)
    assert (config.alpha0, config.lr, config.momentum) == (0.85, 0.1, 0.9)
    assert data.mismatch_count >= 4
    hit = next((r["epoch"] for r in result.history if r["dev_tc_f1"] == 1.0), None)
    ok = hit is not None and elapsed < 600.0
    report(5, "overfit", ok,
           f"TC F1=1.0 at epoch {hit}, {data.mismatch_count} mismatch triggers, {elapsed:.0f}s")
    assert hit is not None
    assert elapsed < 600.0


def test_criterion_6_ablation_structure():
    """Edge/node counts per ablation on the 4-char/1-word fixture, plus
    a full gradient check for every ablated model."""
    fixture = build_graph(4, [MatchedWord("abc", 0, 1, 3)])

    g = apply_graph_ablation(fixture, Ablation(no_c2c=True))
    assert g.c2c == set()
    assert all(g.char_neighbors(i) == [i] for i in range(1, 5))

    g = apply_graph_ablation(fixture, Ablation(last_char_only=True))
    assert g.w2c == {(0, 3)}
    assert g.c2w == fixture.c2w

    g = apply_graph_ablation(fixture, Ablation(no_c2w=True))
    assert g.c2w == set()
    assert g.w2c == fixture.w2c

    g = apply_graph_ablation(fixture, Ablation(no_word=True))
    assert g.n_words == 0 and g.w2c == set() and g.c2w == set()

    flags = ["no_Wtau", "no_c2c", "last_char_only", "no_c2w", "no_word",
             "no_margin_loss", "no_prototype_init"]
    worst_by_flag = {}
    for flag in flags:
        model, config, sentence = small_instance(**{flag: True})
        if flag == "no_Wtau":
            assert "layer0.proj_word" not in model.named_parameters()
        worst, tol = model_gradient_check(model, config, sentence)
        worst_by_flag[flag] = worst
        assert worst < tol, flag
    ok = True
    report(6, "ablation-structure", ok,
           "edge counts exact; grad check worst "
           + max(worst_by_flag, key=worst_by_flag.get)
           + f"={max(worst_by_flag.values()):.1e}")
    assert ok


def test_criterion_7_lexicon_oracle():
    """Trie matching equals brute-force substring enumeration, 1000 sentences."""
    rng = np.random.default_rng(29)
    letters = [chr(ord("a") + i) for i in range(20)]
    words = set()
    while len(words) < 100:
        length = int(rng.integers(2, 6))
        words.add("".join(letters[i] for i in rng.integers(0, 20, size=length)))
    lexicon = Lexicon(words)
    for _ in range(1000):
        n = int(rng.integers(1, 51))
        chars = [letters[i] for i in rng.integers(0, 20, size=n)]
        got = [(m.begin, m.end) for m in lexicon.match(chars)]
        assert got == brute_force_matches(chars, words)
    report(7, "lexicon-oracle", True, "1000 random sentences, alphabet 20, 100 words")


def test_criterion_8_metric_oracle():
    """evaluate() equals the independent naive scorer exactly, 200 sets."""
    rng = np.random.default_rng(31)
    types = ["A", "B", "C"]
    golds, preds, gold_tuples, pred_tuples = [], [], [], []
    for _ in range(200):
        n = int(rng.integers(2, 12))
        g_spans, g_t = [], []
        pos = 1
        while pos <= n:
            if rng.random() < 0.35:
                end = min(n, pos + int(rng.integers(0, 2)))
                t = types[int(rng.integers(0, 3))]
                g_spans.append(Span(pos, end, t))
                g_t.append((pos, end, t))
                pos = end + 2
            else:
                pos += 1
        p_spans, p_t = [], []
        for _ in range(int(rng.integers(0, 4))):
            b = int(rng.integers(1, n + 1))
            e = min(n, b + int(rng.integers(0, 2)))
            t = types[int(rng.integers(0, 3))]
            p_spans.append(Span(b, e, t))
            p_t.append((b, e, t))
        golds.append(Sentence(["x"] * n, g_spans))
        preds.append(p_spans)
        gold_tuples.append(g_t)
        pred_tuples.append(p_t)
    got = evaluate(golds, preds)
    naive = naive_span_scores(gold_tuples, pred_tuples)
    ok = (
        (got.ti_p, got.ti_r, got.ti_f1) == naive["ti"]
        and (got.tc_p, got.tc_r, got.tc_f1) == naive["tc"]
        and got.ti_correct == naive["ti_correct"]
        and got.tc_correct == naive["tc_correct"]
    )
    report(8, "metric-oracle", ok,
           f"200 sets, {naive['n_gold']} gold / {naive['n_pred']} predicted spans, exact")
    assert ok


def test_criterion_9_similarity_export():
    """Rows sum to 1, diagonal masked, values match the naive implementation."""
    rng = np.random.default_rng(37)
    label_set = LabelSet([f"T{i}" for i in range(8)])
    matrix = rng.normal(size=(label_set.size, 12))
    worst = 0.0
    for subset in ("B", "I"):
        names, sim = similarity_matrix(matrix, label_set, subset=subset)
        assert np.abs(sim.sum(axis=1) - 1.0).max() < 1e-9
        getter = label_set.begin_id if subset == "B" else label_set.inside_id
        rows = np.stack([matrix[getter(t)] for t in label_set.event_types])
        naive = naive_cosine_softmax(rows)
        worst = max(worst, float(np.abs(sim - naive).max()))
        assert np.abs(sim - naive).max() < 1e-9
        # masked diagonal: no self weight survives normalization
        assert sim.diagonal().max() < 1e-12
    report(9, "similarity-export", True, f"row sums 1±1e-9, naive gap {worst:.1e}")


def test_criterion_10_determinism(tmp_path):
    """Identical seed and config produce identical traces and checkpoints."""
    data_dir = tmp_path / "data"
    code = cli_main([
        "gen-data", "--out-dir", str(data_dir), "--seed", "7",
        "--event-types", "2", "--sentences", "8",
        "--alphabet-size", "20", "--lexicon-size", "10", "--dim", "8",
    ])
    assert code == 0
    artifacts = []
    for run in ("one", "two"):
        out = tmp_path / f"{run}.json"
        metrics = tmp_path / f"{run}.metrics"
        code = cli_main([
            "train",
            "--train", str(data_dir / "train.jsonl"),
            "--char-emb", str(data_dir / "char_embeddings.txt"),
            "--word-emb", str(data_dir / "word_embeddings.txt"),
            "--labels", str(data_dir / "labels.json"),
            "--out", str(out), "--metrics", str(metrics),
            "--d", "8", "--epochs", "3", "--seed", "11",
        ])
        assert code == 0
        artifacts.append((metrics.read_bytes(), out.read_bytes()))
    ok = artifacts[0] == artifacts[1]
    report(10, "determinism", ok, "metrics and checkpoint bytes identical across runs")
    assert ok
