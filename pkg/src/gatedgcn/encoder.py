"""Token embedding providers and the bidirectional LSTM over them."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import tensor as T
from .corpus import Sentence
from .tensor import Tensor

UNK = "<unk>"


class EmbeddingError(ValueError):
    pass


@dataclass
class LookupEmbeddings:
    """Vocabulary table; row 0 is the shared UNK vector."""

    vocab: dict[str, int]
    table: Tensor
    mode = "lookup"

    @property
    def dim(self) -> int:
        return self.table.shape[1]

    @property
    def trainable(self) -> bool:
        return self.table.requires_grad

    def ids(self, tokens: Sequence[str]) -> list[int]:
        return [self.vocab.get(w, 0) for w in tokens]

    def words(self) -> list[str]:
        return [w for w, _ in sorted(self.vocab.items(), key=lambda kv: kv[1])]


@dataclass
class ContextualEmbeddings:
    """Frozen precomputed vectors, one n x d block per corpus sentence."""

    blocks: list[np.ndarray]
    dim: int
    mode = "contextual"
    trainable = False


def _unk_row(dim: int, rng: np.random.Generator) -> np.ndarray:
    return rng.uniform(-0.1, 0.1, size=dim)


def load_lookup_embeddings(path, trainable: bool = True,
                           rng: np.random.Generator | None = None,
                           dim: int | None = None) -> LookupEmbeddings:
    """Read a word2vec/GloVe style text file.

    An optional ``V D`` header line is accepted. UNK is drawn uniformly from
    [-0.1, 0.1]. An empty file yields a table holding only UNK, ``dim`` wide.
    """
    rng = rng or np.random.default_rng(0)
    words: list[str] = []
    rows: list[list[float]] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts:
                continue
            if lineno == 1 and len(parts) == 2 and all(p.isdigit() for p in parts):
                if dim is not None and dim != int(parts[1]):
                    raise EmbeddingError(f"line 1: header width {parts[1]} but {dim} expected")
                dim = int(parts[1])
                continue
            if dim is None:
                dim = len(parts) - 1
            if len(parts) - 1 != dim or dim == 0:
                raise EmbeddingError(f"line {lineno}: expected {dim} values, got {len(parts) - 1}")
            try:
                rows.append([float(x) for x in parts[1:]])
            except ValueError:
                raise EmbeddingError(f"line {lineno}: non-numeric value") from None
            words.append(parts[0])
    dim = dim or 0
    table = np.empty((len(rows) + 1, dim))
    table[0] = _unk_row(dim, rng)
    if rows:
        table[1:] = rows
    vocab = {UNK: 0}
    for w in words:
        vocab.setdefault(w, len(vocab))
    if len(vocab) != len(table):
        raise EmbeddingError("duplicate words in embedding file")
    return LookupEmbeddings(vocab, Tensor(table, requires_grad=trainable, name="embed.table"))


def random_lookup(words: Sequence[str], dim: int, rng: np.random.Generator,
                  trainable: bool = True) -> LookupEmbeddings:
    """Fresh uniform [-0.1, 0.1] table over ``words`` (plus UNK)."""
    vocab = {UNK: 0}
    for w in words:
        vocab.setdefault(w, len(vocab))
    table = rng.uniform(-0.1, 0.1, size=(len(vocab), dim))
    return LookupEmbeddings(vocab, Tensor(table, requires_grad=trainable, name="embed.table"))


def load_contextual_embeddings(path, corpus: Sequence[Sentence]) -> ContextualEmbeddings:
    blocks: list[np.ndarray] = []
    cur: list[list[float]] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                if cur:
                    blocks.append(np.array(cur))
                    cur = []
                continue
            try:
                cur.append([float(x) for x in line.split()])
            except ValueError:
                raise EmbeddingError(f"line {lineno}: non-numeric value") from None
            if len(cur[-1]) != len(cur[0]):
                raise EmbeddingError(f"line {lineno}: row width {len(cur[-1])} differs from {len(cur[0])}")
    if cur:
        blocks.append(np.array(cur))
    return contextual_from_blocks(blocks, corpus)


def contextual_from_blocks(blocks: Sequence[np.ndarray], corpus: Sequence[Sentence]) -> ContextualEmbeddings:
    if len(blocks) != len(corpus):
        raise EmbeddingError(f"{len(blocks)} embedding blocks for {len(corpus)} sentences")
    dims = {b.shape[1] for b in blocks}
    if len(dims) > 1:
        raise EmbeddingError(f"embedding blocks have mixed widths {sorted(dims)}")
    for k, (b, s) in enumerate(zip(blocks, corpus)):
        if b.shape[0] != s.n:
            raise EmbeddingError(f"sentence {k}: block has {b.shape[0]} rows for {s.n} tokens")
    return ContextualEmbeddings([np.asarray(b, dtype=np.float64) for b in blocks], dims.pop() if dims else 0)


def encode(s: Sentence, provider, ordinal: int | None = None) -> Tensor:
    """Embedding matrix E (n x d_e) for one sentence."""
    if provider.mode == "lookup":
        return T.take_rows(provider.table, provider.ids(s.tokens))
    if ordinal is None or not 0 <= ordinal < len(provider.blocks):
        raise EmbeddingError(f"no contextual block for sentence {ordinal}")
    block = provider.blocks[ordinal]
    if block.shape[0] != s.n:
        raise EmbeddingError(f"sentence {ordinal}: block has {block.shape[0]} rows for {s.n} tokens")
    return Tensor(block)


# ------------------------------------------------------------------ BiLSTM


def init_lstm(params: dict, prefix: str, d_in: int, d_h: int, rng: np.random.Generator) -> None:
    """Uniform(-1/sqrt(d_h), 1/sqrt(d_h)) weights; forget-gate bias starts at 1.

    Gate blocks are laid out [input, forget, cell, output] along the last axis.
    """
    k = 1.0 / np.sqrt(d_h)
    for direction in ("fwd", "bwd"):
        p = f"{prefix}.{direction}"
        params[f"{p}.W_x"] = Tensor(rng.uniform(-k, k, (d_in, 4 * d_h)), True, f"{p}.W_x")
        params[f"{p}.W_h"] = Tensor(rng.uniform(-k, k, (d_h, 4 * d_h)), True, f"{p}.W_h")
        b = np.zeros(4 * d_h)
        b[d_h:2 * d_h] = 1.0
        params[f"{p}.b"] = Tensor(b, True, f"{p}.b")


def _lstm_pass(E: Tensor, W_x: Tensor, W_h: Tensor, b: Tensor, order) -> list[Tensor]:
    d_h = W_h.shape[0]
    if E.shape[1] != W_x.shape[0] or W_x.shape[1] != 4 * d_h or b.shape != (4 * d_h,):
        raise T.ShapeError(f"lstm: input shape {E.shape} against W_x {W_x.shape}, W_h {W_h.shape}")
    xw = T.add(T.matmul(E, W_x), b)
    out: dict[int, Tensor] = {}
    h = c = None
    for i in order:
        z = T.row(xw, i)
        if h is not None:
            z = T.add(z, T.matmul(h, W_h))
        s, u = T.sigmoid(z), T.tanh(z)
        gi = T.slice_cols(s, 0, d_h)
        gf = T.slice_cols(s, d_h, 2 * d_h)
        gc = T.slice_cols(u, 2 * d_h, 3 * d_h)
        go = T.slice_cols(s, 3 * d_h, 4 * d_h)
        c = T.mul(gi, gc) if c is None else T.add(T.mul(gf, c), T.mul(gi, gc))
        h = T.mul(go, T.tanh(c))
        out[i] = h
    return [out[i] for i in range(len(out))]


def bilstm(E: Tensor, params: dict, prefix: str = "lstm") -> Tensor:
    """h0 (n x 2d_h): row i is [forward_i ; backward_i], both from zero states."""
    n = E.shape[0]
    if n < 1:
        raise T.ShapeError("bilstm: empty sentence")
    fw = _lstm_pass(E, params[f"{prefix}.fwd.W_x"], params[f"{prefix}.fwd.W_h"],
                    params[f"{prefix}.fwd.b"], range(n))
    bw = _lstm_pass(E, params[f"{prefix}.bwd.W_x"], params[f"{prefix}.bwd.W_h"],
                    params[f"{prefix}.bwd.b"], range(n - 1, -1, -1))
    return T.concat([T.stack_rows(fw), T.stack_rows(bw)], axis=1)
