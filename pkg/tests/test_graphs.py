"""Lexicon trie vs brute force, graph structure invariants, ablation filters."""

import numpy as np
import pytest

from lexevent.config import Ablation, ConfigError
from lexevent.corpus import Sentence
from lexevent.graphs import (
    HeteroGraph,
    Lexicon,
    MatchedWord,
    apply_graph_ablation,
    build_graph,
    graph_to_dict,
    match_lexicon,
)

from oracles import brute_force_matches


def random_sentences(rng, count, alphabet=20, max_len=50):
    letters = [chr(ord("a") + i) for i in range(alphabet)]
    for _ in range(count):
        n = int(rng.integers(1, max_len + 1))
        yield [letters[i] for i in rng.integers(0, alphabet, size=n)]


class TestLexiconMatching:
    def test_nested_and_overlapping_matches(self):
        lex = Lexicon(["贩毒", "集团", "贩毒集团"])
        sentence = Sentence(list("贩毒集团"))
        spans = [(m.begin, m.end) for m in match_lexicon(sentence, lex)]
        assert spans == [(1, 2), (1, 4), (3, 4)]

    def test_empty_lexicon(self):
        assert match_lexicon(Sentence(list("abc")), Lexicon()) == []

    def test_single_char_words_ignored(self):
        lex = Lexicon(["a", "ab"])
        assert len(lex) == 1
        assert "a" not in lex

    def test_every_stored_word_lookup_succeeds(self):
        words = ["ab", "abc", "bcd", "dd"]
        lex = Lexicon(words)
        for w in words:
            assert w in lex
            assert lex.match(list(w))[-1].word == w

    def test_matches_sorted_and_occurrence_specific(self):
        lex = Lexicon(["ab"])
        got = lex.match(list("abab"))
        assert [(m.begin, m.end) for m in got] == [(1, 2), (3, 4)]

    def test_agrees_with_brute_force_oracle(self):
        rng = np.random.default_rng(42)
        words = set()
        letters = [chr(ord("a") + i) for i in range(20)]
        while len(words) < 100:
            length = int(rng.integers(2, 5))
            words.add("".join(letters[i] for i in rng.integers(0, 20, size=length)))
        lex = Lexicon(words)
        for chars in random_sentences(rng, 1000):
            got = [(m.begin, m.end) for m in lex.match(chars)]
            assert got == brute_force_matches(chars, words)

    def test_from_file(self, tmp_path):
        path = tmp_path / "lex.txt"
        path.write_text("贩毒\n集团\n\n单\n", encoding="utf-8")
        lex = Lexicon.from_file(path)
        assert sorted(lex.words) == ["贩毒", "集团"]


class TestBuildGraph:
    def test_three_chars_no_words(self):
        g = build_graph(Sentence(list("abc")), [])
        assert g.c2c == {(1, 2), (2, 1), (2, 3), (3, 2)}
        assert g.self_loops == [True, True, True]
        assert g.n_words == 0

    def test_word_edges_cover_all_characters(self):
        m = MatchedWord("ab", 0, 1, 2)
        g = build_graph(4, [m])
        assert g.w2c == {(0, 1), (0, 2)}
        assert g.c2w == {(1, 0), (2, 0)}

    def test_single_char_sentence(self):
        g = build_graph(1, [])
        assert g.c2c == set()
        assert g.char_neighbors(1) == [1]

    def test_reversal_property(self):
        rng = np.random.default_rng(0)
        lex = Lexicon(["aa", "ab", "abc", "ba"])
        for chars in random_sentences(rng, 100, alphabet=3, max_len=12):
            g = build_graph(len(chars), lex.match(chars))
            assert {(j, w) for w, j in g.w2c} == g.c2w

    def test_c2c_degree_endpoints(self):
        for n in (2, 5, 9):
            g = build_graph(n, [])
            degrees = [len(g.char_char[i]) for i in range(n)]
            assert degrees[0] == 1 and degrees[-1] == 1
            assert all(d == 2 for d in degrees[1:-1])

    def test_match_beyond_length_rejected(self):
        with pytest.raises(ValueError):
            build_graph(2, [MatchedWord("abc", 0, 1, 3)])


class TestNeighborSet:
    def setup_method(self):
        self.graph = build_graph(3, [MatchedWord("ab", 0, 1, 2)])

    def test_char_neighbors_include_self(self):
        assert self.graph.neighbor_set(("char", 2), "char") == [1, 2, 3]

    def test_word_covering_chars(self):
        assert self.graph.neighbor_set(("word", 0), "char") == [1, 2]

    def test_char_without_word(self):
        assert self.graph.neighbor_set(("char", 3), "word") == []

    def test_word_has_no_word_neighbors(self):
        assert self.graph.neighbor_set(("word", 0), "word") == []

    def test_unknown_node_raises(self):
        with pytest.raises(ValueError):
            self.graph.neighbor_set(("char", 9), "char")
        with pytest.raises(ValueError):
            self.graph.neighbor_set(("word", 5), "char")


FIXTURE = build_graph(4, [MatchedWord("abc", 0, 1, 3)])


class TestAblationFilters:
    def test_no_word_removes_nodes_and_edges(self):
        g = apply_graph_ablation(FIXTURE, Ablation(no_word=True))
        assert g.n_words == 0 and g.w2c == set() and g.c2w == set()
        assert g.c2c == FIXTURE.c2c

    def test_last_char_only_keeps_single_w2c(self):
        g = apply_graph_ablation(FIXTURE, Ablation(last_char_only=True))
        assert g.w2c == {(0, 3)}
        assert g.c2w == FIXTURE.c2w  # reverse direction untouched

    def test_no_c2c_keeps_self_loops(self):
        g = apply_graph_ablation(FIXTURE, Ablation(no_c2c=True))
        assert g.c2c == set()
        for i in range(1, 5):
            assert g.char_neighbors(i) == [i]

    def test_no_c2w_empties_reverse_edges(self):
        g = apply_graph_ablation(FIXTURE, Ablation(no_c2w=True))
        assert g.c2w == set()
        assert g.w2c == FIXTURE.w2c

    def test_contradictory_flags_rejected(self):
        with pytest.raises(ConfigError):
            Ablation(no_word=True, last_char_only=True).validate()

    def test_no_flags_returns_same_graph(self):
        assert apply_graph_ablation(FIXTURE, Ablation()) is FIXTURE


class TestGraphDump:
    def test_dict_shape(self):
        payload = graph_to_dict(FIXTURE, chars=list("abcd"))
        assert payload["n_chars"] == 4
        assert payload["words"][0]["begin"] == 1
        assert (1, 2) in {tuple(e) for e in payload["edges"]["c2c"]}
        assert len(payload["edges"]["w2c"]) == 3
