"""Event-labelled dependency corpora: parsing, sentence graphs, tree distances.

Corpus files hold one token per line with five tab-separated columns::

    index  form  head  deprel  label

``head`` is 1-based (0 marks the root) and ``label`` is ``None`` (or ``O``)
for non-triggers. Sentences are separated by a blank line and lines starting
with ``#`` are ignored.
"""

from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .tensor import Tensor, softmax

NONE = "None"
_NONE_ALIASES = {"None", "O"}


class CorpusError(ValueError):
    pass


@dataclass(frozen=True)
class Sentence:
    tokens: tuple[str, ...]
    heads: tuple[int, ...]
    deprels: tuple[str, ...]
    gold_labels: tuple[str, ...]

    def __post_init__(self):
        n = len(self.tokens)
        if n == 0:
            raise CorpusError("sentence has no tokens")
        if not (len(self.heads) == len(self.deprels) == len(self.gold_labels) == n):
            raise CorpusError("sentence columns differ in length")
        check_tree(self.heads)

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def n(self) -> int:
        return len(self.tokens)


@dataclass(frozen=True)
class Candidate:
    sentence: int  # ordinal in the corpus
    t: int  # 1-based trigger candidate index
    gold: str


@dataclass
class SentenceGraph:
    n: int
    neighbors: list[list[int]]  # 1-based, sorted, self-loop included

    def zero_based(self) -> list[list[int]]:
        return [[j - 1 for j in nb] for nb in self.neighbors]


@dataclass
class GraphScores:
    distances: np.ndarray
    raw_p: np.ndarray
    p_dist: np.ndarray = field(repr=False)


def check_tree(heads) -> None:
    n = len(heads)
    for i, h in enumerate(heads, 1):
        if not 0 <= h <= n:
            raise CorpusError(f"token {i} has head {h} outside 0..{n}")
        if h == i:
            raise CorpusError(f"token {i} is its own head")
    roots = [i for i, h in enumerate(heads, 1) if h == 0]
    if len(roots) != 1:
        raise CorpusError(f"expected exactly one root, found {len(roots)}")
    for i in range(1, n + 1):
        seen = set()
        j = i
        while j != 0:
            if j in seen:
                raise CorpusError(f"head cycle through token {j}")
            seen.add(j)
            j = heads[j - 1]


def _label(raw: str) -> str:
    return NONE if raw in _NONE_ALIASES else raw


def parse_corpus(text: str | Iterable[str]) -> list[Sentence]:
    """Parse corpus text into sentences, validating the head tree of each."""
    lines = text.splitlines() if isinstance(text, str) else (l.rstrip("\n") for l in text)
    sentences: list[Sentence] = []
    block: list[tuple[int, list[str]]] = []

    def flush():
        if not block:
            return
        start = block[0][0]
        for k, (lineno, cols) in enumerate(block, 1):
            if cols[0] != str(k):
                raise CorpusError(f"line {lineno}: expected token index {k}, got {cols[0]!r}")
        try:
            s = Sentence(
                tokens=tuple(c[1] for _, c in block),
                heads=tuple(int(c[2]) for _, c in block),
                deprels=tuple(c[3] for _, c in block),
                gold_labels=tuple(_label(c[4]) for _, c in block),
            )
        except CorpusError as e:
            raise CorpusError(f"sentence starting at line {start}: {e}") from None
        sentences.append(s)
        block.clear()

    for lineno, line in enumerate(lines, 1):
        line = line.rstrip("\r")
        if line.startswith("#"):
            continue
        if not line.strip():
            flush()
            continue
        cols = line.split("\t")
        if len(cols) != 5:
            raise CorpusError(f"line {lineno}: expected 5 tab-separated columns, got {len(cols)}")
        try:
            int(cols[2])
        except ValueError:
            raise CorpusError(f"line {lineno}: head {cols[2]!r} is not an integer") from None
        block.append((lineno, cols))
    flush()
    return sentences


def read_corpus(path) -> list[Sentence]:
    with open(path, encoding="utf-8") as fh:
        return parse_corpus(fh.read())


def serialize_corpus(sentences: Iterable[Sentence]) -> str:
    out = []
    for s in sentences:
        for i in range(s.n):
            out.append(f"{i + 1}\t{s.tokens[i]}\t{s.heads[i]}\t{s.deprels[i]}\t{s.gold_labels[i]}")
        out.append("")
    return "\n".join(out)


def build_graph(s: Sentence) -> SentenceGraph:
    nbrs = [{i} for i in range(1, s.n + 1)]
    for dep, head in enumerate(s.heads, 1):
        if head:
            nbrs[dep - 1].add(head)
            nbrs[head - 1].add(dep)
    return SentenceGraph(s.n, [sorted(nb) for nb in nbrs])


def tree_distances(s: Sentence, t: int) -> np.ndarray:
    """Edge counts on the undirected tree path from every token to token t."""
    adj = [[] for _ in range(s.n + 1)]
    for dep, head in enumerate(s.heads, 1):
        if head:
            adj[dep].append(head)
            adj[head].append(dep)
    dist = [-1] * (s.n + 1)
    dist[t] = 0
    queue = deque([t])
    while queue:
        u = queue.popleft()
        for v in adj[u]:
            if dist[v] < 0:
                dist[v] = dist[u] + 1
                queue.append(v)
    return np.array(dist[1:], dtype=np.int64)


def graph_distances(s: Sentence, t: int) -> GraphScores:
    if not 1 <= t <= s.n:
        raise IndexError(f"trigger index {t} outside 1..{s.n}")
    d = tree_distances(s, t)
    raw = -d.astype(np.float64)
    return GraphScores(d, raw, softmax(Tensor(raw)).values)


def make_candidates(corpus: list[Sentence], negative_keep_prob: float = 1.0,
                    rng: random.Random | None = None) -> list[Candidate]:
    """Every token is a candidate; ``None`` ones are kept with the given probability."""
    out = []
    for k, s in enumerate(corpus):
        for t, gold in enumerate(s.gold_labels, 1):
            if gold == NONE and negative_keep_prob < 1.0:
                if (rng or random).random() >= negative_keep_prob:
                    continue
            out.append(Candidate(k, t, gold))
    return out
