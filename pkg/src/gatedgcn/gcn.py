"""Stacked GCN layers with trigger-conditioned gates and the gate-diversity penalty."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from . import tensor as T
from .corpus import SentenceGraph
from .tensor import Tensor


def init_gcn(params: dict, d_in: int, d_gate_in: int, d_g: int, layers: int,
             rng: np.random.Generator) -> None:
    for l in range(1, layers + 1):
        fan_in = d_in if l == 1 else d_g
        k = 1.0 / np.sqrt(fan_in)
        params[f"gcn.W{l}"] = Tensor(rng.uniform(-k, k, (fan_in, d_g)), True, f"gcn.W{l}")
    k = 1.0 / np.sqrt(d_gate_in)
    for l in range(1, layers + 1):
        params[f"gate.W{l}"] = Tensor(rng.uniform(-k, k, (d_gate_in, d_g)), True, f"gate.W{l}")


def gcn_layer(h_prev: Tensor, graph: SentenceGraph | Sequence[Sequence[int]], W: Tensor) -> Tensor:
    """ReLU(mean over neighbours (self-loop included) of h_prev, then W)."""
    nbrs = graph.zero_based() if isinstance(graph, SentenceGraph) else graph
    if h_prev.shape[1] != W.shape[0]:
        raise T.ShapeError(f"gcn_layer: incompatible shapes {h_prev.shape} and {W.shape}")
    return T.relu(T.matmul(T.neighbor_mean(h_prev, nbrs), W))


def gcn_stack(h0: Tensor, graph: SentenceGraph, params: dict, layers: int) -> list[Tensor]:
    nbrs = graph.zero_based()
    hs, h = [], h0
    for l in range(1, layers + 1):
        h = gcn_layer(h, nbrs, params[f"gcn.W{l}"])
        hs.append(h)
    return hs


def compute_gates(e_t: Tensor, params: dict, layers: int) -> list[Tensor]:
    return [T.sigmoid(T.matmul(e_t, params[f"gate.W{l}"])) for l in range(1, layers + 1)]


def apply_gates(h: Sequence[Tensor], g: Sequence[Tensor], pooled: bool = True):
    """Filtered rows m^l = g^l * h^l and pooled cross products.

    ``mbar[k][l]`` is the column max over i of ``g^k * h^l_i`` (0-based k, l).
    """
    L = len(h)
    m = [T.mul(h[l], g[l]) for l in range(L)]
    if not pooled:
        return m, None
    mbar = [[T.masked_max_pool(m[l]) if k == l else T.masked_max_pool(T.mul(h[l], g[k]))
             for l in range(L)] for k in range(L)]
    return m, mbar


def gate_diversity_loss(mbar, pair_mean: bool = False) -> Tensor:
    """Scaled sum over l < k of cosine(mbar[l][l], mbar[k][l]).

    Both vectors come from layer l's hidden rows, filtered by gate l and by
    gate k. The scale is 1/(L(L-1)), or 1/#pairs with ``pair_mean``.
    """
    L = len(mbar)
    if L < 2:
        return Tensor(0.0)
    terms = [T.cosine(mbar[l][l], mbar[k][l]) for l in range(L) for k in range(l + 1, L)]
    total = terms[0]
    for c in terms[1:]:
        total = T.add(total, c)
    coef = 1.0 / len(terms) if pair_mean else 1.0 / (L * (L - 1))
    return T.scale(total, coef)
