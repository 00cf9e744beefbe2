"""Bundled toy corpora: a lexically cued two-type corpus and the two figure sentences."""

from __future__ import annotations

import random
from importlib import resources

from .corpus import NONE, Sentence, parse_corpus

TRIGGERS = {
    "attacked": "Attack", "bombed": "Attack", "shot": "Attack",
    "traveled": "Transport", "moved": "Transport", "flew": "Transport",
}
FILLERS = ["the", "soldiers", "city", "yesterday", "near", "border", "two", "men",
           "a", "village", "they", "quickly", "north", "from", "capital", "troops"]
VERBS = ["said", "saw", "reported", "left"]


def make_synthetic(n_sentences: int = 24, seed: int = 13) -> list[Sentence]:
    """Random dependency trees of 3-8 tokens; trigger words always carry their type.

    About one sentence in four has no trigger at all.
    """
    rng = random.Random(seed)
    triggers = sorted(TRIGGERS)
    out = []
    for k in range(n_sentences):
        n = rng.randint(3, 8)
        words = [rng.choice(FILLERS) for _ in range(n)]
        root = rng.randrange(n)
        if k % 4 != 3:
            words[root] = triggers[k % len(triggers)]
        else:
            words[root] = rng.choice(VERBS)
        heads = [0] * n
        order = [root] + [i for i in range(n) if i != root]
        for pos in range(1, n):
            heads[order[pos]] = order[rng.randrange(pos)] + 1
        deprels = ["root" if h == 0 else "dep" for h in heads]
        labels = [TRIGGERS.get(w, NONE) for w in words]
        out.append(Sentence(tuple(words), tuple(heads), tuple(deprels), tuple(labels)))
    return out


def _read(name: str) -> list[Sentence]:
    return parse_corpus(resources.files("gatedgcn.data").joinpath(name).read_text("utf-8"))


def synthetic_corpus() -> list[Sentence]:
    return _read("synthetic.tsv")


def figure_sentences() -> list[Sentence]:
    return _read("figure1.tsv")


def gradcheck_fixture() -> Sentence:
    """Three tokens, middle one the root, middle one an Attack trigger."""
    return Sentence(("troops", "attacked", "town"), (2, 0, 2), ("nsubj", "root", "obj"),
                    (NONE, "Attack", NONE))
