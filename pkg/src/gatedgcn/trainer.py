"""Adam, evaluation metrics and the training loop."""

from __future__ import annotations

import logging
import random
import time
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import tensor as T
from .config import TrainConfig
from .corpus import NONE, Candidate, Sentence, make_candidates
from .encoder import random_lookup
from .model import GatedGCN, label_set

log = logging.getLogger(__name__)


class NonFiniteGradient(FloatingPointError):
    def __init__(self, name: str):
        self.param = name
        super().__init__(f"non-finite gradient in parameter {name!r}")


@dataclass
class AdamState:
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def adam_step(params: dict[str, T.Tensor], grads: dict[str, np.ndarray], state: AdamState,
              lr: float) -> None:
    """One bias-corrected Adam update, in place. Every gradient is checked first."""
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise NonFiniteGradient(name)
    state.step += 1
    bc1 = 1.0 - state.beta1 ** state.step
    bc2 = 1.0 - state.beta2 ** state.step
    for name, g in grads.items():
        p = params[name]
        if name not in state.m:
            state.m[name] = np.zeros_like(p.values)
            state.v[name] = np.zeros_like(p.values)
        m, v = state.m[name], state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        p.values -= lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)


# ------------------------------------------------------------------ metrics


@dataclass
class EvalReport:
    precision: float
    recall: float
    f1: float
    tp: int
    predicted: int
    gold: int
    candidates: int
    per_type: dict[str, dict[str, int]] = field(default_factory=dict)

    def line(self) -> str:
        return f"{self.precision:.3f}\t{self.recall:.3f}\t{self.f1:.3f}"


def score(pairs: Sequence[tuple[str, str]]) -> EvalReport:
    """P/R/F over (gold, predicted) label pairs, ignoring "None"."""
    tp = pred = gold = 0
    per: dict[str, Counter] = {}
    for y, yhat in pairs:
        if y != NONE:
            gold += 1
            per.setdefault(y, Counter())["gold"] += 1
        if yhat != NONE:
            pred += 1
            per.setdefault(yhat, Counter())["predicted"] += 1
            if yhat == y:
                tp += 1
                per[y]["tp"] += 1
    p = tp / pred if pred else 0.0
    r = tp / gold if gold else 0.0
    f = 2 * p * r / (p + r) if p + r else 0.0
    per_type = {k: {"tp": c["tp"], "predicted": c["predicted"], "gold": c["gold"]}
                for k, c in sorted(per.items())}
    return EvalReport(p, r, f, tp, pred, gold, len(pairs), per_type)


def predict_corpus(model: GatedGCN, corpus: Sequence[Sentence], provider=None,
                   workers: int = 1) -> list[list[tuple[str, float]]]:
    """Argmax label and its probability for every token of every sentence."""
    if provider is not None and provider is not model.provider:
        model = GatedGCN(model.cfg, provider, model.labels, params=model.params)

    def one(k):
        return model.predict_sentence(corpus[k], k)

    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            return list(ex.map(one, range(len(corpus))))
    return [one(k) for k in range(len(corpus))]


def evaluate(model: GatedGCN, corpus: Sequence[Sentence], provider=None, workers: int = 1) -> EvalReport:
    preds = predict_corpus(model, corpus, provider, workers)
    pairs = [(y, yhat) for s, ps in zip(corpus, preds) for y, (yhat, _) in zip(s.gold_labels, ps)]
    return score(pairs)


# ------------------------------------------------------------------ training


@dataclass
class EpochRecord:
    epoch: int
    loss: float
    dev: EvalReport

    def line(self) -> str:
        return f"{self.epoch}\t{self.loss!r}\t{self.dev.precision!r}\t{self.dev.recall!r}\t{self.dev.f1!r}"


@dataclass
class TrainResult:
    model: GatedGCN
    history: list[EpochRecord]
    best_epoch: int

    def log_text(self) -> str:
        return "".join(r.line() + "\n" for r in self.history)


def batch_loss(model: GatedGCN, corpus: Sequence[Sentence], batch: Sequence[Candidate]):
    """Mean total loss over a batch; sentence encodings are shared within the batch."""
    cache = {}
    total = None
    for c in batch:
        enc = cache.get(c.sentence)
        if enc is None:
            enc = cache[c.sentence] = model.encode_sentence(corpus[c.sentence], c.sentence)
        terms = model.forward(enc, c.t, c.gold)
        total = terms.total if total is None else T.add(total, terms.total)
    return T.scale(total, 1.0 / len(batch))


def build_model(cfg: TrainConfig, corpus: Sequence[Sentence], provider=None,
                labels: Sequence[str] | None = None) -> GatedGCN:
    """Fresh model; without a provider a trainable lookup over the corpus vocabulary is made."""
    rng = np.random.default_rng(cfg.seed)
    if provider is None:
        words = sorted({w for s in corpus for w in s.tokens})
        provider = random_lookup(words, cfg.emb_dim, rng)
    return GatedGCN(cfg, provider, labels or label_set(corpus), rng=rng)


def train(cfg: TrainConfig, corpus: Sequence[Sentence], dev_corpus: Sequence[Sentence] | None = None,
          provider=None, dev_provider=None, model: GatedGCN | None = None) -> TrainResult:
    """Mini-batch Adam over shuffled candidates; keeps the best dev-F1 epoch.

    ``dev_corpus`` defaults to the training corpus. With a contextual
    provider, ``dev_provider`` must cover ``dev_corpus``.
    """
    if not corpus:
        raise ValueError("training corpus is empty")
    if dev_corpus is None:
        dev_corpus, dev_provider = corpus, provider
    if model is None:
        model = build_model(cfg, corpus, provider)
    if provider is not None and model.provider is not provider:
        raise ValueError("model and provider disagree")
    if dev_provider is None and model.provider.mode == "lookup":
        dev_provider = model.provider
    if dev_provider is None:
        raise ValueError("a contextual model needs a provider for the dev corpus")

    rng = random.Random(cfg.seed)
    state = AdamState()
    trainable = model.trainable()
    history: list[EpochRecord] = []
    best = (-1.0, 0, None)
    for epoch in range(1, cfg.epochs + 1):
        t0 = time.perf_counter()
        cands = make_candidates(corpus, cfg.negative_keep_prob, rng)
        rng.shuffle(cands)
        loss_sum = 0.0
        for start in range(0, len(cands), cfg.batch_size):
            batch = cands[start:start + cfg.batch_size]
            with T.Tape() as tape:
                loss = batch_loss(model, corpus, batch)
            tape.backward(loss, list(trainable.values()))
            adam_step(trainable, {k: p.grad for k, p in trainable.items()}, state, cfg.learning_rate)
            loss_sum += loss.item() * len(batch)
        report = evaluate(model, dev_corpus, dev_provider)
        rec = EpochRecord(epoch, loss_sum / max(len(cands), 1), report)
        history.append(rec)
        log.info("epoch %d loss %.5f dev F1 %.4f (%.1fs)", epoch, rec.loss, report.f1,
                 time.perf_counter() - t0)
        if report.f1 > best[0]:
            best = (report.f1, epoch, {k: p.values.copy() for k, p in model.params.items()})
        if cfg.target_f1 is not None and report.f1 >= cfg.target_f1:
            break
    for k, v in best[2].items():
        model.params[k].values = v
    return TrainResult(model, history, best[1])
