import random

import numpy as np
import pytest

from conftest import FIGURE1_HEADS, FIGURE2_HEADS, floyd_warshall, random_sentence
from gatedgcn.corpus import (CorpusError, Sentence, build_graph, graph_distances, make_candidates,
                             parse_corpus, serialize_corpus)
from gatedgcn.synthetic import figure_sentences, make_synthetic, synthetic_corpus


def test_empty_input():
    assert parse_corpus("") == []


def test_two_token_block():
    [s] = parse_corpus("1\tHi\t2\tdep\tO\n2\tgo\t0\troot\tAttack\n")
    assert s.n == 2
    assert s.gold_labels == ("None", "Attack")
    assert s.heads == (2, 0)


def test_comments_and_multiple_blocks():
    text = "# doc 1\n1\ta\t0\troot\tNone\n\n\n# next\n1\tb\t2\tdep\tNone\n2\tc\t0\troot\tMeet\n"
    corpus = parse_corpus(text)
    assert [s.tokens for s in corpus] == [("a",), ("b", "c")]


@pytest.mark.parametrize("text, msg", [
    ("1\ta\t0\troot\tNone\n2\tb\t0\troot\tNone\n", "root"),
    ("1\ta\t2\tdep\tNone\n2\tb\t1\tdep\tNone\n", "root"),
    ("1\ta\t2\tdep\tNone\n2\tb\t3\tdep\tNone\n3\tc\t2\tdep\tNone\n4\td\t0\troot\tNone\n", "cycle"),
    ("1\ta\t0\troot\n", "line 1"),
    ("1\ta\tx\troot\tNone\n", "line 1.*integer"),
    ("1\ta\t5\troot\tNone\n", "outside"),
    ("1\ta\t0\troot\tNone\n3\tb\t1\tdep\tNone\n", "line 2"),
])
def test_malformed_input_rejected(text, msg):
    with pytest.raises(CorpusError, match=msg):
        parse_corpus(text)


def test_single_token_graph():
    s = Sentence(("x",), (0,), ("root",), ("None",))
    assert build_graph(s).neighbors == [[1]]


def test_chain_graph():
    s = Sentence(("a", "b"), (2, 0), ("dep", "root"), ("None", "None"))
    assert build_graph(s).neighbors == [[1, 2], [1, 2]]


def test_figure1_neighbors_of_trigger():
    s = figure_sentences()[0]
    assert s.heads == FIGURE1_HEADS
    assert build_graph(s).neighbors[2] == [1, 2, 3, 6, 8, 9]


def test_figure1_distances():
    s1, s2 = figure_sentences()
    assert s2.heads == FIGURE2_HEADS
    assert graph_distances(s1, 3).distances.tolist() == [1, 1, 0, 2, 2, 1, 2, 1, 1]
    assert graph_distances(s2, 10).distances.tolist() == [4, 3, 2, 4, 3, 2, 1, 2, 1, 0, 3]


def test_single_token_distance():
    g = graph_distances(Sentence(("x",), (0,), ("root",), ("None",)), 1)
    assert g.distances.tolist() == [0]
    assert g.p_dist.tolist() == [1.0]


def test_distances_match_floyd_warshall(rng):
    for _ in range(200):
        n = int(rng.integers(1, 13))
        s = random_sentence(rng, n)
        t = int(rng.integers(1, n + 1))
        oracle = floyd_warshall(s.heads)[t - 1]
        g = graph_distances(s, t)
        assert g.distances.tolist() == oracle
        assert g.raw_p.tolist() == [-d for d in oracle]
        assert abs(g.p_dist.sum() - 1) < 1e-6
        assert int(np.argmax(g.p_dist)) == t - 1
        if n > 1:
            assert sorted(g.p_dist)[-1] > sorted(g.p_dist)[-2]


def test_graph_invariants_and_head_reconstruction(rng):
    for _ in range(100):
        n = int(rng.integers(1, 12))
        s = random_sentence(rng, n)
        nb = build_graph(s).neighbors
        for i in range(1, n + 1):
            assert i in nb[i - 1]
            for j in nb[i - 1]:
                assert i in nb[j - 1]
        # drop loops and reverses: what remains, oriented by the tree, is the head relation
        edges = {(min(i, j), max(i, j)) for i in range(1, n + 1) for j in nb[i - 1] if i != j}
        expected = {(min(d, h), max(d, h)) for d, h in enumerate(s.heads, 1) if h}
        assert edges == expected
        root = s.heads.index(0) + 1
        depth = graph_distances(s, root).distances
        rebuilt = [0] * n
        for a, b in edges:
            child, parent = (a, b) if depth[a - 1] > depth[b - 1] else (b, a)
            rebuilt[child - 1] = parent
        assert tuple(rebuilt) == s.heads


def test_round_trip(rng):
    corpus = [random_sentence(rng, int(rng.integers(1, 9)), None) for _ in range(30)]
    corpus += figure_sentences() + synthetic_corpus()
    again = parse_corpus(serialize_corpus(corpus))
    assert again == corpus
    assert serialize_corpus(again) == serialize_corpus(corpus)


def test_candidates():
    s = Sentence(("a", "b", "c"), (2, 0, 2), ("d", "root", "d"), ("None", "Attack", "None"))
    cands = make_candidates([s])
    assert [c.t for c in cands] == [1, 2, 3]
    assert [c.gold for c in cands if c.gold != "None"] == ["Attack"]
    quiet = Sentence(("a", "b"), (2, 0), ("d", "root"), ("None", "None"))
    assert all(c.gold == "None" for c in make_candidates([quiet]))


def test_negative_subsampling_keeps_all_triggers():
    corpus = synthetic_corpus()
    cands = make_candidates(corpus, 0.3, random.Random(0))
    n_pos = sum(y != "None" for s in corpus for y in s.gold_labels)
    assert sum(c.gold != "None" for c in cands) == n_pos
    assert len(cands) < sum(s.n for s in corpus)


def test_bundled_synthetic_matches_generator():
    assert synthetic_corpus() == make_synthetic()
    types = {y for s in synthetic_corpus() for y in s.gold_labels} - {"None"}
    assert types == {"Attack", "Transport"}
    assert len(synthetic_corpus()) >= 20
