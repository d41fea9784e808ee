"""Command-line surface: data generation, training, evaluation, inspection.

Exit codes: 0 success, 1 usage/config error, 2 data error.  Diagnostics go
to stderr; machine-readable output (metrics, reports, predictions, graph
dumps) goes to stdout or the requested file.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import fields
from pathlib import Path

from .config import ConfigError, TrainConfig, load_config
from .corpus import (
    CorpusError,
    DataError,
    LabelSet,
    Sentence,
    Vocabulary,
    generate_synthetic_corpus,
    load_corpus,
    load_embeddings,
    write_corpus,
    write_embeddings,
)
from .evaluation import annotate_mismatch, evaluate, export_similarity
from .graphs import Lexicon, build_graph, graph_to_dict, match_lexicon
from .model import Model, lexicon_from_vocab, lexicon_from_words
from .training import TrainingError, metrics_to_jsonl, train_model

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on usage errors; the contract here is 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


class UsageError(Exception):
    pass


def _build_parser() -> _Parser:
    parser = _Parser(prog="lexevent", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen-data", help="write a synthetic corpus with embeddings")
    gen.add_argument("--out-dir", required=True)
    gen.add_argument("--seed", type=int, default=7)
    gen.add_argument("--event-types", type=int, default=3)
    gen.add_argument("--sentences", type=int, default=20)
    gen.add_argument("--dev-sentences", type=int, default=0)
    gen.add_argument("--alphabet-size", type=int, default=30)
    gen.add_argument("--lexicon-size", type=int, default=14)
    gen.add_argument("--dim", type=int, default=100)

    train = sub.add_parser("train", help="train a model and save the best-dev checkpoint")
    train.add_argument("--train", required=True, dest="train_path")
    train.add_argument("--dev", dest="dev_path")
    train.add_argument("--char-emb", required=True)
    train.add_argument("--word-emb", required=True)
    train.add_argument("--labels", required=True)
    train.add_argument("--lexicon")
    train.add_argument("--out", required=True)
    train.add_argument("--metrics")
    train.add_argument("--config")
    for field in fields(TrainConfig):  # every config key doubles as a flag
        train.add_argument(f"--{field.name}", dest=f"cfg_{field.name}")

    ev = sub.add_parser("eval", help="score a checkpoint on a corpus")
    ev.add_argument("--checkpoint", required=True)
    ev.add_argument("--data", required=True)
    ev.add_argument("--lexicon")

    pred = sub.add_parser("predict", help="decode trigger spans for a JSONL file")
    pred.add_argument("--checkpoint", required=True)
    pred.add_argument("--input", required=True)
    pred.add_argument("--output")

    sim = sub.add_parser("export-similarity", help="label-similarity CSV from a checkpoint")
    sim.add_argument("--checkpoint", required=True)
    sim.add_argument("--subset", choices=["B", "I"], default="B")
    sim.add_argument("--out", required=True)

    insp = sub.add_parser("inspect-graph", help="dump one sentence's graph as JSON")
    insp.add_argument("--input", required=True)
    insp.add_argument("--index", type=int, default=0)
    insp.add_argument("--lexicon", required=True)
    insp.add_argument("--labels")
    return parser


def _cmd_gen_data(args) -> int:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    total = args.sentences + args.dev_sentences
    data = generate_synthetic_corpus(
        seed=args.seed,
        n_event_types=args.event_types,
        n_sentences=total,
        alphabet_size=args.alphabet_size,
        lexicon_size=args.lexicon_size,
        dim=args.dim,
    )
    train_sentences = data.sentences[: args.sentences]
    write_corpus(train_sentences, out / "train.jsonl")
    if args.dev_sentences:
        write_corpus(data.sentences[args.sentences :], out / "dev.jsonl")
    (out / "lexicon.txt").write_text(
        "".join(w + "\n" for w in data.lexicon_words), encoding="utf-8"
    )
    write_embeddings(data.char_tokens, data.char_matrix, out / "char_embeddings.txt")
    write_embeddings(data.lexicon_words, data.word_matrix, out / "word_embeddings.txt")
    data.label_set.save(out / "labels.json")
    meta = {
        "seed": args.seed,
        "event_types": data.label_set.event_types,
        "trigger_tokens": data.trigger_tokens,
        "mismatch_trigger_count": data.mismatch_count,
        "sentences": args.sentences,
        "dev_sentences": args.dev_sentences,
    }
    (out / "meta.json").write_text(json.dumps(meta, ensure_ascii=False, indent=2), encoding="utf-8")
    print(json.dumps({"out_dir": str(out), "sentences": total,
                      "mismatch_trigger_count": data.mismatch_count}))
    return EXIT_OK


def _cmd_train(args) -> int:
    overrides = {
        field.name: getattr(args, f"cfg_{field.name}")
        for field in fields(TrainConfig)
        if getattr(args, f"cfg_{field.name}") is not None
    }
    config = load_config(args.config, overrides)
    label_set = LabelSet.load(args.labels)
    vocab = Vocabulary(
        chars=load_embeddings(args.char_emb, dim=config.d),
        words=load_embeddings(args.word_emb, dim=config.d),
    )
    if args.lexicon:
        lexicon = lexicon_from_words(
            Path(args.lexicon).read_text(encoding="utf-8").split(), vocab.words
        )
    else:
        lexicon = lexicon_from_vocab(vocab.words)
    train_sentences = load_corpus(args.train_path, label_set, max_len=config.max_len)
    if args.dev_path:
        dev_sentences = load_corpus(args.dev_path, label_set, max_len=config.max_len)
    else:
        dev_sentences = train_sentences

    def on_epoch(record):
        print(json.dumps(record), flush=True)

    result = train_model(
        train_sentences, dev_sentences, lexicon, vocab, label_set, config,
        on_epoch=on_epoch,
    )
    result.model.save(args.out)
    if args.metrics:
        Path(args.metrics).write_text(metrics_to_jsonl(result.history), encoding="utf-8")
    print(json.dumps({"checkpoint": args.out, "best_epoch": result.best_epoch,
                      "best_tc_f1": result.best_tc_f1}), flush=True)
    return EXIT_OK


def _cmd_eval(args) -> int:
    model = Model.load(args.checkpoint)
    sentences = load_corpus(args.data, model.label_set)
    predictions = [model.predict(s) for s in sentences]
    report = evaluate(sentences, predictions)
    if args.lexicon:
        lexicon = Lexicon.from_file(args.lexicon)
    else:
        lexicon = model.lexicon
    annotate_mismatch(report, sentences, predictions, lexicon)
    print(json.dumps(report.to_dict()))
    return EXIT_OK


def _cmd_predict(args) -> int:
    model = Model.load(args.checkpoint)
    sentences = load_corpus(args.input, model.label_set)
    predicted = []
    for sentence in sentences:
        predicted.append(Sentence(chars=sentence.chars, triggers=model.predict(sentence)))
    if args.output:
        write_corpus(predicted, args.output)
    else:
        from .corpus import corpus_to_jsonl

        sys.stdout.write(corpus_to_jsonl(predicted))
    return EXIT_OK


def _cmd_export_similarity(args) -> int:
    model = Model.load(args.checkpoint)
    export_similarity(model.labels.matrix.data, model.label_set,
                      subset=args.subset, path=args.out)
    print(json.dumps({"csv": args.out, "subset": args.subset}))
    return EXIT_OK


def _cmd_inspect_graph(args) -> int:
    if args.labels:
        label_set = LabelSet.load(args.labels)
    else:
        # lenient for debugging: accept whatever event types the file uses
        types: list[str] = []
        with open(args.input, encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    for trig in json.loads(line).get("triggers", []):
                        if trig.get("type") and trig["type"] not in types:
                            types.append(trig["type"])
        label_set = LabelSet(types)
    sentences = load_corpus(args.input, label_set)
    if not 0 <= args.index < len(sentences):
        raise DataError(f"sentence index {args.index} out of range (corpus has {len(sentences)})")
    sentence = sentences[args.index]
    lexicon = Lexicon.from_file(args.lexicon)
    graph = build_graph(sentence, match_lexicon(sentence, lexicon))
    print(json.dumps(graph_to_dict(graph, chars=sentence.chars), ensure_ascii=False, indent=2))
    return EXIT_OK


_COMMANDS = {
    "gen-data": _cmd_gen_data,
    "train": _cmd_train,
    "eval": _cmd_eval,
    "predict": _cmd_predict,
    "export-similarity": _cmd_export_similarity,
    "inspect-graph": _cmd_inspect_graph,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except UsageError as err:
        print(str(err), file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except (CorpusError, DataError, TrainingError) as err:
        print(f"data error: {err}", file=sys.stderr)
        return EXIT_DATA
    except FileNotFoundError as err:
        print(f"data error: {err}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
