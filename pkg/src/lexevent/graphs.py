"""Trie-based lexicon matching and per-sentence heterogeneous graphs.

A sentence graph has character nodes 1..n and one word node per lexicon
match (occurrences kept separately, overlaps and nestings included).  Edge
kinds: c2c between neighboring characters plus per-character self-loops,
w2c from a word to every character it covers, and c2w as its exact reverse.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .config import Ablation
from .corpus import Sentence


@dataclass(frozen=True)
class MatchedWord:
    """One lexicon-word occurrence; indices are 1-based inclusive."""

    word: str
    word_id: int
    begin: int
    end: int

    def __post_init__(self):
        if not (1 <= self.begin <= self.end) or self.end - self.begin < 1:
            raise ValueError(f"matched word must span >= 2 characters, got ({self.begin},{self.end})")


class _TrieNode:
    __slots__ = ("children", "word_id")

    def __init__(self):
        self.children: dict[str, _TrieNode] = {}
        self.word_id: int | None = None


class Lexicon:
    """Character trie over multi-character words; 1-char entries are ignored."""

    def __init__(self, words: Iterable[str] | None = None):
        self._root = _TrieNode()
        self._words: dict[str, int] = {}
        for word in words or ():
            self.add(word)

    def add(self, word: str, word_id: int | None = None) -> None:
        if len(word) < 2 or word in self._words:
            return
        assigned = len(self._words) if word_id is None else word_id
        node = self._root
        for ch in word:
            node = node.children.setdefault(ch, _TrieNode())
        node.word_id = assigned
        self._words[word] = assigned

    def __len__(self) -> int:
        return len(self._words)

    def __contains__(self, word: str) -> bool:
        return word in self._words

    def word_id(self, word: str) -> int:
        return self._words[word]

    @property
    def words(self) -> list[str]:
        return list(self._words)

    @classmethod
    def from_file(cls, path) -> "Lexicon":
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        return cls(line.strip() for line in lines if line.strip())

    def match(self, chars: Sequence[str]) -> list[MatchedWord]:
        """Every occurrence of every stored word, sorted by (begin, end)."""
        hits: list[MatchedWord] = []
        n = len(chars)
        for start in range(n):
            node = self._root
            for stop in range(start, n):
                node = node.children.get(chars[stop])
                if node is None:
                    break
                if node.word_id is not None:
                    word = "".join(chars[start : stop + 1])
                    hits.append(MatchedWord(word, node.word_id, start + 1, stop + 1))
        hits.sort(key=lambda m: (m.begin, m.end))
        return hits


def match_lexicon(sentence: Sentence, lexicon: Lexicon) -> list[MatchedWord]:
    return lexicon.match(sentence.chars)


@dataclass
class HeteroGraph:
    """Typed adjacency for one sentence; nodes are ('char', i) or ('word', j)."""

    n_chars: int
    words: list[MatchedWord]
    c2c: set[tuple[int, int]]
    self_loops: list[bool]
    w2c: set[tuple[int, int]]
    c2w: set[tuple[int, int]]
    # neighbor indices derived from the edge sets, kept sorted
    char_char: list[list[int]] = field(repr=False, default_factory=list)
    char_word: list[list[int]] = field(repr=False, default_factory=list)
    word_char: list[list[int]] = field(repr=False, default_factory=list)

    def __post_init__(self):
        self.char_char = [[] for _ in range(self.n_chars)]
        self.char_word = [[] for _ in range(self.n_chars)]
        self.word_char = [[] for _ in range(len(self.words))]
        for i, j in sorted(self.c2c):
            self.char_char[i - 1].append(j)
        for w, i in sorted(self.w2c):
            self.char_word[i - 1].append(w)
        for i, w in sorted(self.c2w):
            self.word_char[w].append(i)

    @property
    def n_words(self) -> int:
        return len(self.words)

    def char_neighbors(self, i: int) -> list[int]:
        """Character-type neighborhood of character i, self included via its loop."""
        neighbors = list(self.char_char[i - 1])
        if self.self_loops[i - 1]:
            neighbors.append(i)
            neighbors.sort()
        return neighbors

    def words_covering(self, i: int) -> list[int]:
        return list(self.char_word[i - 1])

    def chars_of_word(self, w: int) -> list[int]:
        return list(self.word_char[w])

    def neighbor_set(self, node: tuple[str, int], neighbor_type: str) -> list[int]:
        """Typed-neighborhood lookup; raises on unknown nodes."""
        kind, idx = node
        if kind == "char":
            if not 1 <= idx <= self.n_chars:
                raise ValueError(f"unknown character node {idx}")
            return self.char_neighbors(idx) if neighbor_type == "char" else self.words_covering(idx)
        if kind == "word":
            if not 0 <= idx < self.n_words:
                raise ValueError(f"unknown word node {idx}")
            return self.chars_of_word(idx) if neighbor_type == "char" else []
        raise ValueError(f"unknown node kind {kind!r}")


def build_graph(sentence: Sentence | int, matches: Sequence[MatchedWord]) -> HeteroGraph:
    """Full heterogeneous graph: neighbor c2c edges, self-loops, w2c/c2w pairs."""
    n = sentence if isinstance(sentence, int) else len(sentence)
    words = sorted(matches, key=lambda m: (m.begin, m.end))
    for m in words:
        if m.end > n:
            raise ValueError(f"match ({m.begin},{m.end}) exceeds sentence length {n}")
    c2c = set()
    for i in range(1, n):
        c2c.add((i, i + 1))
        c2c.add((i + 1, i))
    w2c = {(w, i) for w, m in enumerate(words) for i in range(m.begin, m.end + 1)}
    c2w = {(i, w) for w, i in w2c}
    return HeteroGraph(
        n_chars=n,
        words=words,
        c2c=c2c,
        self_loops=[True] * n,
        w2c=w2c,
        c2w=c2w,
    )


def apply_graph_ablation(graph: HeteroGraph, flags: Ablation) -> HeteroGraph:
    """Edge-set filters producing the model-variant graphs."""
    flags.validate()
    if not flags.any_graph_flag:
        return graph
    words = [] if flags.no_word else list(graph.words)
    c2c = set() if flags.no_c2c else set(graph.c2c)
    if flags.no_word:
        w2c: set[tuple[int, int]] = set()
        c2w: set[tuple[int, int]] = set()
    else:
        if flags.last_char_only:
            w2c = {(w, m.end) for w, m in enumerate(words)}
        else:
            w2c = set(graph.w2c)
        c2w = set() if flags.no_c2w else set(graph.c2w)
    return HeteroGraph(
        n_chars=graph.n_chars,
        words=words,
        c2c=c2c,
        self_loops=list(graph.self_loops),
        w2c=w2c,
        c2w=c2w,
    )


def graph_to_dict(graph: HeteroGraph, chars: Sequence[str] | None = None) -> dict:
    """JSON-friendly dump used by the graph inspection command."""
    return {
        "n_chars": graph.n_chars,
        "chars": list(chars) if chars is not None else None,
        "words": [
            {"node": w, "word": m.word, "begin": m.begin, "end": m.end}
            for w, m in enumerate(graph.words)
        ],
        "self_loops": list(graph.self_loops),
        "edges": {
            "c2c": sorted(graph.c2c),
            "w2c": sorted(graph.w2c),
            "c2w": sorted(graph.c2w),
        },
    }
