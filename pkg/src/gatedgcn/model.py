"""The GatedGCN event-detection model: parameters and forward pass."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import tensor as T
from .config import TrainConfig
from .consistency import init_consistency, isc_loss, model_scores
from .corpus import NONE, Sentence, SentenceGraph, build_graph, graph_distances
from .encoder import bilstm, encode, init_lstm
from .gcn import apply_gates, compute_gates, gate_diversity_loss, gcn_stack, init_gcn
from .tensor import Tensor


@dataclass
class Encoded:
    """Candidate-independent activations of one sentence."""

    sentence: Sentence
    graph: SentenceGraph
    E: Tensor
    h0: Tensor
    hs: list[Tensor]


@dataclass
class Terms:
    ce: Tensor
    gd: Tensor | None
    isc: Tensor | None
    total: Tensor
    probs: np.ndarray
    m: list[Tensor] = field(repr=False, default_factory=list)
    scores: object = field(repr=False, default=None)
    p_dist: np.ndarray | None = field(repr=False, default=None)


def build_feature(e_t: Tensor, mL: Tensor, t: int) -> Tensor:
    """V_t = [e_t ; m^L_t ; column max of m^L] for 1-based t."""
    return T.concat([e_t, T.row(mL, t - 1), T.masked_max_pool(mL)])


def classify_logits(V_t: Tensor, params: dict) -> Tensor:
    hidden = T.relu(T.add(T.matmul(V_t, params["clf.W1"]), params["clf.b1"]))
    return T.add(T.matmul(hidden, params["clf.W2"]), params["clf.b2"])


def classify(V_t: Tensor, params: dict) -> Tensor:
    return T.softmax(classify_logits(V_t, params))


def combined_loss(ce, gd, isc, cfg: TrainConfig):
    """ce + alpha*gd + beta*isc; disabled or absent terms are not added at all."""
    total = ce
    if gd is not None and cfg.diversity_active:
        total = total + gd * cfg.alpha
    if isc is not None and cfg.consistency_active:
        total = total + isc * cfg.beta
    return total


class GatedGCN:
    def __init__(self, cfg: TrainConfig, provider, labels: Sequence[str],
                 params: dict[str, Tensor] | None = None, rng: np.random.Generator | None = None):
        if len(labels) < 2:
            raise ValueError("need at least two classes (None plus one event type)")
        self.cfg = cfg
        self.provider = provider
        self.labels = list(labels)
        self.label_index = {y: i for i, y in enumerate(self.labels)}
        if params is None:
            params = self._init_params(rng if rng is not None else np.random.default_rng(cfg.seed))
        self.params = params

    @property
    def d_e(self) -> int:
        return self.provider.dim

    def _init_params(self, rng: np.random.Generator) -> dict[str, Tensor]:
        cfg = self.cfg
        p: dict[str, Tensor] = {}
        if self.provider.mode == "lookup":
            p["embed.table"] = self.provider.table
        d_h, d_g = cfg.lstm_hidden, cfg.gcn_dim
        init_lstm(p, "lstm", self.d_e, d_h, rng)
        gate_in = self.d_e if cfg.gate_source == "embedding" else 2 * d_h
        init_gcn(p, 2 * d_h, gate_in, d_g, cfg.gcn_layers, rng)
        d_v = self.d_e + 2 * d_g
        init_consistency(p, d_v, d_g, cfg.score_dim, rng)
        k1, k2 = 1.0 / np.sqrt(d_v), 1.0 / np.sqrt(cfg.ffn_hidden)
        C = len(self.labels)
        p["clf.W1"] = Tensor(rng.uniform(-k1, k1, (d_v, cfg.ffn_hidden)), True, "clf.W1")
        p["clf.b1"] = Tensor(np.zeros(cfg.ffn_hidden), True, "clf.b1")
        p["clf.W2"] = Tensor(rng.uniform(-k2, k2, (cfg.ffn_hidden, C)), True, "clf.W2")
        p["clf.b2"] = Tensor(np.zeros(C), True, "clf.b2")
        return p

    def trainable(self) -> dict[str, Tensor]:
        return {k: v for k, v in self.params.items() if v.requires_grad}

    # ------------------------------------------------------------ forward

    def encode_sentence(self, s: Sentence, ordinal: int | None = None) -> Encoded:
        E = encode(s, self.provider, ordinal)
        h0 = bilstm(E, self.params)
        graph = build_graph(s)
        return Encoded(s, graph, E, h0, gcn_stack(h0, graph, self.params, self.cfg.gcn_layers))

    def _features(self, enc: Encoded, t: int, pooled: bool):
        cfg = self.cfg
        e_t = T.row(enc.E, t - 1)
        mbar = None
        if cfg.use_gates:
            gate_in = e_t if cfg.gate_source == "embedding" else T.row(enc.h0, t - 1)
            g = compute_gates(gate_in, self.params, cfg.gcn_layers)
            m, mbar = apply_gates(enc.hs, g, pooled=pooled)
        else:
            m = list(enc.hs)
        return m, mbar, build_feature(e_t, m[-1], t)

    def probs(self, enc: Encoded, t: int) -> np.ndarray:
        _, _, V_t = self._features(enc, t, pooled=False)
        return T.softmax(classify_logits(V_t, self.params)).values

    def forward(self, enc: Encoded, t: int, gold: str | None = None) -> Terms:
        """Loss terms and class distribution for candidate t (1-based).

        With ``gold`` None (or an unseen label) the cross-entropy is taken
        against class 0, so the caller can still inspect Q and L_GD.
        """
        cfg = self.cfg
        pooled = cfg.diversity_active and cfg.gcn_layers > 1
        m, mbar, V_t = self._features(enc, t, pooled)
        gd = gate_diversity_loss(mbar, cfg.gd_pair_mean) if mbar is not None else None
        mL = m[-1]
        logp = T.log_softmax(classify_logits(V_t, self.params))
        y = self.label_index.get(gold, 0) if gold is not None else 0
        ce = T.scale(T.row(logp, y), -1.0)

        isc = scores = p_dist = None
        if cfg.consistency_active:
            scores = model_scores(V_t, mL, self.params["isc.W_v"], self.params["isc.W_m"])
            p_dist = graph_distances(enc.sentence, t).p_dist
            isc = isc_loss(p_dist, scores.q_dist, cfg.isc_form)
        total = combined_loss(ce, gd, isc, cfg)
        return Terms(ce, gd, isc, total, np.exp(logp.values), m, scores, p_dist)

    def predict_sentence(self, s: Sentence, ordinal: int | None = None) -> list[tuple[str, float]]:
        """(label, probability) of the argmax class for every token."""
        enc = self.encode_sentence(s, ordinal)
        out = []
        for t in range(1, s.n + 1):
            probs = self.probs(enc, t)
            k = int(np.argmax(probs))
            out.append((self.labels[k], float(probs[k])))
        return out


def label_set(corpus: Sequence[Sentence]) -> list[str]:
    """"None" first, then event types in sorted order."""
    types = sorted({y for s in corpus for y in s.gold_labels if y != NONE})
    return [NONE] + types
