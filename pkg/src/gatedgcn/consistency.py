"""Model-based importance scores and the graph/model consistency loss."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .tensor import Tensor

ISC_FORMS = ("kl", "literal")


@dataclass
class ModelScores:
    raw_q: Tensor
    q_dist: Tensor


def init_consistency(params: dict, d_v: int, d_g: int, d_s: int, rng: np.random.Generator) -> None:
    kv, km = 1.0 / np.sqrt(d_v), 1.0 / np.sqrt(d_g)
    params["isc.W_v"] = Tensor(rng.uniform(-kv, kv, (d_v, d_s)), True, "isc.W_v")
    params["isc.W_m"] = Tensor(rng.uniform(-km, km, (d_g, d_s)), True, "isc.W_m")


def model_scores(V_t: Tensor, mL: Tensor, W_v: Tensor, W_m: Tensor) -> ModelScores:
    """q_i = sigmoid(V_t W_v) . sigmoid(m^L_i W_m), then softmax over tokens."""
    if V_t.shape[0] != W_v.shape[0] or mL.shape[1] != W_m.shape[0] or W_v.shape[1] != W_m.shape[1]:
        raise T.ShapeError(
            f"model_scores: incompatible shapes V_t {V_t.shape}, m^L {mL.shape}, "
            f"W_v {W_v.shape}, W_m {W_m.shape}")
    sv = T.sigmoid(T.matmul(V_t, W_v))
    sm = T.sigmoid(T.matmul(mL, W_m))
    raw = T.matmul(sm, sv)
    return ModelScores(raw, T.softmax(raw))


def isc_loss(p_dist, q_dist: Tensor, form: str = "kl") -> Tensor:
    """Divergence of model scores Q from graph scores P.

    ``kl`` is sum p log(p/q) with 0 log 0 = 0; ``literal`` is -sum p*p/q.
    P is treated as a constant.
    """
    p = np.asarray(p_dist.values if isinstance(p_dist, Tensor) else p_dist, dtype=np.float64)
    q = q_dist.values
    if p.shape != q.shape:
        raise T.ShapeError(f"isc_loss: incompatible shapes {p.shape} and {q.shape}")
    for name, v in (("P", p), ("Q", q)):
        if abs(v.sum() - 1.0) > 1e-4 or (v < 0).any():
            raise ValueError(f"isc_loss: {name} is not a probability vector (sum {v.sum():.6g})")
    if form == "kl":
        nz = p > 0
        plogp = float(np.sum(p[nz] * np.log(p[nz])))
        cross = T.matmul(T.log(q_dist), Tensor(p))
        return T.add(Tensor(plogp), T.scale(cross, -1.0))
    if form == "literal":
        return T.scale(T.matmul(T.reciprocal(q_dist), Tensor(p * p)), -1.0)
    raise ValueError(f"unknown isc form {form!r}; expected one of {ISC_FORMS}")
