"""Corpus I/O, BIO label scheme, vocabularies, and synthetic data generation.

Data formats:
  * corpus: JSONL, one object per line with ``text`` (array of character
    strings) and ``triggers`` (array of ``{start, end, type}``, 1-based
    inclusive indices), UTF-8;
  * embeddings: text, one token per line followed by its floats, with an
    optional ``count dim`` header that is auto-detected;
  * label set: JSON ``{"event_types": [...]}`` so label ids are stable.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

DEFAULT_MAX_LEN = 250

# CJK unified ideographs; the synthetic alphabet is drawn from here so the
# multi-byte text path is exercised end to end.
_CJK_BASE = 0x4E00

_EVENT_NAMES = [
    "Attack",
    "Die",
    "Transport",
    "Meet",
    "Arrest",
    "Injure",
    "Marry",
    "Demonstrate",
    "Fine",
    "Elect",
]


class CorpusError(ValueError):
    """Malformed corpus or embedding input; message carries the line number."""


class DataError(ValueError):
    """Structurally valid input that violates a data contract."""


@dataclass(frozen=True, order=True)
class Span:
    """Trigger span with 1-based inclusive character indices."""

    begin: int
    end: int
    event_type: str

    def __post_init__(self):
        if self.begin < 1 or self.end < self.begin:
            raise DataError(f"invalid span ({self.begin}, {self.end})")


@dataclass
class Sentence:
    chars: list[str]
    triggers: list[Span] = field(default_factory=list)

    def __post_init__(self):
        n = len(self.chars)
        if n < 1:
            raise DataError("sentence must contain at least one character")
        for span in self.triggers:
            if span.end > n:
                raise DataError(f"span ({span.begin}, {span.end}) exceeds sentence length {n}")
        occupied = sorted((s.begin, s.end) for s in self.triggers)
        for (b1, e1), (b2, e2) in zip(occupied, occupied[1:]):
            if b2 <= e1:
                raise DataError(f"overlapping gold spans ({b1},{e1}) and ({b2},{e2})")

    @property
    def text(self) -> str:
        return "".join(self.chars)

    def __len__(self) -> int:
        return len(self.chars)


class LabelSet:
    """Bijection between event types and BIO label ids; id 0 is always "O"."""

    def __init__(self, event_types: Sequence[str]):
        types = list(event_types)
        if len(set(types)) != len(types):
            raise DataError("duplicate event types")
        self.event_types = types
        self.labels = ["O"]
        for t in types:
            self.labels.append(f"B-{t}")
            self.labels.append(f"I-{t}")
        self._label_to_id = {lab: i for i, lab in enumerate(self.labels)}

    @property
    def size(self) -> int:
        return len(self.labels)

    def label_to_id(self, label: str) -> int:
        return self._label_to_id[label]

    def id_to_label(self, label_id: int) -> str:
        return self.labels[label_id]

    def begin_id(self, event_type: str) -> int:
        return self._label_to_id[f"B-{event_type}"]

    def inside_id(self, event_type: str) -> int:
        return self._label_to_id[f"I-{event_type}"]

    def __contains__(self, event_type: str) -> bool:
        return event_type in self.event_types

    def save(self, path) -> None:
        Path(path).write_text(
            json.dumps({"event_types": self.event_types}, ensure_ascii=False) + "\n",
            encoding="utf-8",
        )

    @classmethod
    def load(cls, path) -> "LabelSet":
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(payload["event_types"])


def encode_bio(sentence: Sentence, label_set: LabelSet) -> list[int]:
    """Per-character label ids: B-type at span starts, I-type inside, else O."""
    ids = [0] * len(sentence)
    for span in sentence.triggers:
        ids[span.begin - 1] = label_set.begin_id(span.event_type)
        for pos in range(span.begin, span.end):
            ids[pos] = label_set.inside_id(span.event_type)
    return ids


def decode_bio(label_ids: Sequence[int], label_set: LabelSet) -> list[Span]:
    """Inverse of ``encode_bio``; an orphan I-X opens a new span of type X."""
    spans: list[Span] = []
    open_type: str | None = None
    open_begin = 0
    for pos, label_id in enumerate(label_ids, start=1):
        label = label_set.id_to_label(label_id)
        if label == "O":
            if open_type is not None:
                spans.append(Span(open_begin, pos - 1, open_type))
                open_type = None
            continue
        kind, event_type = label.split("-", 1)
        if kind == "B" or open_type != event_type:
            if open_type is not None:
                spans.append(Span(open_begin, pos - 1, open_type))
            open_type = event_type
            open_begin = pos
    if open_type is not None:
        spans.append(Span(open_begin, len(label_ids), open_type))
    return spans


def load_corpus(path, label_set: LabelSet, max_len: int = DEFAULT_MAX_LEN) -> list[Sentence]:
    """Parse a JSONL corpus, truncate to ``max_len``, drop out-of-range triggers.

    Triggers are validated against the original sentence length first;
    only spans cut off by truncation are dropped (with one summary warning).
    """
    sentences: list[Sentence] = []
    dropped = 0
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as err:
                raise CorpusError(f"{path}:{lineno}: invalid JSON: {err}") from None
            if not isinstance(record, dict) or "text" not in record:
                raise CorpusError(f"{path}:{lineno}: record must be an object with a 'text' field")
            chars = record["text"]
            if not isinstance(chars, list) or not all(isinstance(c, str) for c in chars):
                raise CorpusError(f"{path}:{lineno}: 'text' must be an array of character strings")
            spans = []
            for raw in record.get("triggers", []):
                try:
                    span = Span(int(raw["start"]), int(raw["end"]), str(raw["type"]))
                except (KeyError, TypeError, DataError) as err:
                    raise CorpusError(f"{path}:{lineno}: bad trigger {raw!r}: {err}") from None
                if span.event_type not in label_set:
                    raise DataError(
                        f"{path}:{lineno}: unknown event type {span.event_type!r}"
                    )
                if span.end > len(chars):
                    raise DataError(
                        f"{path}:{lineno}: trigger ({span.begin},{span.end}) exceeds length {len(chars)}"
                    )
                spans.append(span)
            if len(chars) > max_len:
                chars = chars[:max_len]
                kept = [s for s in spans if s.end <= max_len]
                dropped += len(spans) - len(kept)
                spans = kept
            try:
                sentences.append(Sentence(chars, spans))
            except DataError as err:
                raise DataError(f"{path}:{lineno}: {err}") from None
    if dropped:
        warnings.warn(f"{path}: dropped {dropped} trigger(s) beyond max_len={max_len}")
    return sentences


def write_corpus(sentences: Iterable[Sentence], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(corpus_to_jsonl(sentences))


def corpus_to_jsonl(sentences: Iterable[Sentence]) -> str:
    lines = []
    for sentence in sentences:
        record = {
            "text": sentence.chars,
            "triggers": [
                {"start": s.begin, "end": s.end, "type": s.event_type}
                for s in sentence.triggers
            ],
        }
        lines.append(json.dumps(record, ensure_ascii=False))
    return "\n".join(lines) + ("\n" if lines else "")


class EmbeddingTable:
    """Token-to-row mapping with a dedicated UNK row appended at the end."""

    def __init__(self, tokens: Sequence[str], vectors: np.ndarray, unk_seed: int = 0):
        vectors = np.asarray(vectors, dtype=np.float64)
        if vectors.ndim != 2 or vectors.shape[0] != len(tokens):
            raise DataError(
                f"embedding matrix shape {vectors.shape} does not match {len(tokens)} tokens"
            )
        self.tokens = list(tokens)
        self.dim = vectors.shape[1]
        bound = np.sqrt(3.0 / self.dim)
        unk_row = np.random.default_rng(unk_seed).uniform(-bound, bound, size=(1, self.dim))
        self.vectors = np.concatenate([vectors, unk_row], axis=0)
        self.token_to_id = {tok: i for i, tok in enumerate(self.tokens)}
        self.unk_id = len(self.tokens)

    @classmethod
    def from_full_matrix(cls, tokens: Sequence[str], vectors: np.ndarray) -> "EmbeddingTable":
        """Rebuild a table whose matrix already carries the UNK row (checkpoints)."""
        vectors = np.asarray(vectors, dtype=np.float64)
        if vectors.shape[0] != len(tokens) + 1:
            raise DataError(
                f"full matrix must have {len(tokens) + 1} rows, got {vectors.shape[0]}"
            )
        table = cls.__new__(cls)
        table.tokens = list(tokens)
        table.dim = vectors.shape[1]
        table.vectors = vectors
        table.token_to_id = {tok: i for i, tok in enumerate(table.tokens)}
        table.unk_id = len(table.tokens)
        return table

    def __len__(self) -> int:
        return self.vectors.shape[0]

    def __contains__(self, token: str) -> bool:
        return token in self.token_to_id

    def id_of(self, token: str) -> int:
        return self.token_to_id.get(token, self.unk_id)

    def row(self, token: str) -> np.ndarray:
        return self.vectors[self.id_of(token)]


@dataclass
class Vocabulary:
    chars: EmbeddingTable
    words: EmbeddingTable


def load_embeddings(path, dim: int, unk_seed: int = 0) -> EmbeddingTable:
    """Read a text embedding file; repeated tokens keep their id, last row wins."""
    tokens: list[str] = []
    rows: list[np.ndarray] = []
    index: dict[str, int] = {}
    duplicates = 0
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.rstrip("\n").split()
            if not parts:
                continue
            if lineno == 1 and len(parts) == 2 and all(p.lstrip("-").isdigit() for p in parts):
                if int(parts[1]) != dim:
                    raise CorpusError(
                        f"{path}:1: header declares dim {parts[1]}, expected {dim}"
                    )
                continue
            token, values = parts[0], parts[1:]
            if len(values) != dim:
                raise CorpusError(
                    f"{path}:{lineno}: expected {dim} floats for {token!r}, got {len(values)}"
                )
            try:
                row = np.array([float(v) for v in values])
            except ValueError as err:
                raise CorpusError(f"{path}:{lineno}: {err}") from None
            if token in index:
                rows[index[token]] = row
                duplicates += 1
            else:
                index[token] = len(tokens)
                tokens.append(token)
                rows.append(row)
    if duplicates:
        warnings.warn(f"{path}: {duplicates} repeated token(s), last occurrence kept")
    matrix = np.stack(rows) if rows else np.zeros((0, dim))
    return EmbeddingTable(tokens, matrix, unk_seed=unk_seed)


def write_embeddings(table_tokens: Sequence[str], matrix: np.ndarray, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{len(table_tokens)} {matrix.shape[1]}\n")
        for token, row in zip(table_tokens, matrix):
            fh.write(token + " " + " ".join(repr(float(v)) for v in row) + "\n")


@dataclass
class SyntheticCorpus:
    """Generator output plus the bookkeeping the evaluation oracles rely on."""

    sentences: list[Sentence]
    lexicon_words: list[str]
    char_tokens: list[str]
    char_matrix: np.ndarray
    word_matrix: np.ndarray
    label_set: LabelSet
    trigger_tokens: dict[str, list[str]]
    mismatch_count: int

    def vocabulary(self, unk_seed: int = 0) -> Vocabulary:
        return Vocabulary(
            chars=EmbeddingTable(self.char_tokens, self.char_matrix, unk_seed=unk_seed),
            words=EmbeddingTable(self.lexicon_words, self.word_matrix, unk_seed=unk_seed),
        )


def generate_synthetic_corpus(
    seed: int,
    n_event_types: int,
    n_sentences: int,
    alphabet_size: int = 30,
    lexicon_size: int = 12,
    dim: int = 100,
) -> SyntheticCorpus:
    """Deterministic desk-scale corpus with word-trigger mismatches built in.

    Guarantees: every event type is triggered by at least 3 distinct tokens;
    some triggers sit strictly inside a lexicon word or straddle two adjacent
    lexicon words, and the exact count of such mismatch triggers is recorded.
    """
    if min(n_event_types, n_sentences, alphabet_size, lexicon_size) < 1:
        raise DataError("all generator sizes must be >= 1")
    # 6 dedicated trigger characters per type plus a noise pool; keeping the
    # pools disjoint makes every trigger character unambiguous, which the
    # desk-scale overfit check depends on
    n_trigger_chars = 6 * n_event_types
    if alphabet_size < n_trigger_chars + 6:
        raise DataError(
            f"alphabet_size must be >= {n_trigger_chars + 6} for {n_event_types} event types"
        )
    rng = np.random.default_rng(seed)
    alphabet = [chr(_CJK_BASE + i) for i in range(alphabet_size)]
    trigger_pool = list(alphabet[:n_trigger_chars])
    noise_pool = list(alphabet[n_trigger_chars:])

    def noise(length: int) -> str:
        return "".join(rng.choice(noise_pool, size=length))

    event_types = [
        _EVENT_NAMES[i] if i < len(_EVENT_NAMES) else f"Type{i:02d}"
        for i in range(n_event_types)
    ]
    label_set = LabelSet(event_types)

    # Three trigger tokens per type, on disjoint characters: one matching a
    # lexicon word exactly, one a proper prefix of a longer lexicon word, one
    # straddling two adjacent lexicon words.
    pool_iter = iter(trigger_pool)

    def fresh_pair() -> str:
        return next(pool_iter) + next(pool_iter)

    lexicon: list[str] = []
    trigger_tokens: dict[str, list[str]] = {}
    # insertion kind: (trigger token, containing text, offset of trigger within it)
    insertions: dict[str, list[tuple[str, str, int]]] = {}
    for event_type in event_types:
        exact = fresh_pair()
        lexicon.append(exact)
        inner = fresh_pair()
        host = inner + noise(1)  # trigger is a proper prefix of this word
        lexicon.append(host)
        cross = fresh_pair()
        left = noise(1) + cross[0]
        right = cross[1] + noise(1)
        lexicon.extend([left, right])
        trigger_tokens[event_type] = [exact, inner, cross]
        insertions[event_type] = [
            (exact, exact, 0),
            (inner, host, 0),
            (cross, left + right, 1),
        ]
    if lexicon_size < len(lexicon):
        raise DataError(
            f"lexicon_size must be >= {len(lexicon)} to cover {n_event_types} event types"
        )
    existing = set(lexicon)
    while len(lexicon) < lexicon_size:
        word = noise(int(rng.integers(2, 4)))
        if word not in existing:
            existing.add(word)
            lexicon.append(word)
    word_set = set(lexicon)

    sentences: list[Sentence] = []
    mismatch_count = 0
    # Round-robin over (type, insertion kind) so every trigger token appears.
    schedule = [
        (event_type, kind)
        for kind in range(3)
        for event_type in event_types
    ]
    for s in range(n_sentences):
        event_type, kind = schedule[s % len(schedule)]
        token, text, offset = insertions[event_type][kind]
        prefix = noise(int(rng.integers(1, 4)))
        filler_word = lexicon[int(rng.integers(0, len(lexicon)))]
        suffix = noise(int(rng.integers(1, 4)))
        body = prefix + text + suffix + filler_word
        begin = len(prefix) + offset + 1
        spans = [Span(begin, begin + len(token) - 1, event_type)]
        # every other sentence also carries an exact-match trigger of some type
        if rng.random() < 0.5 and n_event_types > 1:
            other = event_types[int(rng.integers(0, n_event_types))]
            tok2 = trigger_tokens[other][0]
            b2 = len(body) + 1
            body = body + tok2
            spans.append(Span(b2, b2 + len(tok2) - 1, other))
        chars = list(body)
        sentence = Sentence(chars, sorted(spans))
        # ground truth for the mismatch subset: a trigger is a mismatch when no
        # lexicon word occupies exactly its span (checked by direct text scan)
        occupied = {
            (b + 1, b + len(w))
            for w in word_set
            for b in _find_all(body, w)
        }
        for span in sentence.triggers:
            if (span.begin, span.end) not in occupied:
                mismatch_count += 1
        sentences.append(sentence)

    bound = np.sqrt(3.0 / dim)
    char_matrix = rng.uniform(-bound, bound, size=(alphabet_size, dim))
    word_matrix = rng.uniform(-bound, bound, size=(len(lexicon), dim))
    return SyntheticCorpus(
        sentences=sentences,
        lexicon_words=lexicon,
        char_tokens=alphabet,
        char_matrix=char_matrix,
        word_matrix=word_matrix,
        label_set=label_set,
        trigger_tokens=trigger_tokens,
        mismatch_count=mismatch_count,
    )


def _find_all(text: str, word: str) -> list[int]:
    hits = []
    start = 0
    while True:
        pos = text.find(word, start)
        if pos < 0:
            return hits
        hits.append(pos)
        start = pos + 1
