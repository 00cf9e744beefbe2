"""Binary checkpoint container.

Layout (all integers little-endian)::

    b"GGCN"                 magic
    uint32 version          currently 1
    uint32 header_len
    header_len bytes        UTF-8 JSON: config, labels, embedding info and a
                            manifest [{"name", "shape", "dtype"}] in storage order
    payload                 each parameter's values, row-major, as "<f8"
                            (or "<f4" when saved with single=True)

The JSON is written with sorted keys and no whitespace so identical models
produce identical bytes.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from .config import TrainConfig
from .encoder import LookupEmbeddings, UNK
from .model import GatedGCN
from .tensor import Tensor

MAGIC = b"GGCN"
VERSION = 1
_DTYPES = {"f8": "<f8", "f4": "<f4"}


class CheckpointError(ValueError):
    pass


def dumps(model: GatedGCN, single: bool = False) -> bytes:
    dtype = "f4" if single else "f8"
    prov = model.provider
    if prov.mode == "lookup":
        emb = {"mode": "lookup", "dim": prov.dim, "trainable": prov.trainable, "vocab": prov.words()}
    else:
        emb = {"mode": "contextual", "dim": prov.dim}
    names = list(model.params)
    header = {
        "config": model.cfg.to_dict(),
        "labels": model.labels,
        "embedding": emb,
        "params": [{"name": k, "shape": list(model.params[k].shape), "dtype": dtype,
                    "trainable": model.params[k].requires_grad} for k in names],
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    parts = [MAGIC, struct.pack("<II", VERSION, len(blob)), blob]
    for k in names:
        parts.append(np.ascontiguousarray(model.params[k].values, dtype=_DTYPES[dtype]).tobytes())
    return b"".join(parts)


def loads(data: bytes, provider=None) -> GatedGCN:
    """Rebuild a model; contextual checkpoints need the provider for their corpus."""
    if data[:4] != MAGIC:
        raise CheckpointError("not a GGCN checkpoint (bad magic)")
    if len(data) < 12:
        raise CheckpointError("truncated checkpoint header")
    version, hlen = struct.unpack_from("<II", data, 4)
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    try:
        header = json.loads(data[12:12 + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointError(f"corrupt checkpoint header: {e}") from None
    offset = 12 + hlen
    params: dict[str, Tensor] = {}
    for entry in header["params"]:
        dt = np.dtype(_DTYPES[entry["dtype"]])
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        nbytes = count * dt.itemsize
        if offset + nbytes > len(data):
            raise CheckpointError(f"truncated payload at parameter {entry['name']!r}")
        vals = np.frombuffer(data, dtype=dt, count=count, offset=offset).astype(np.float64).reshape(shape)
        params[entry["name"]] = Tensor(vals, entry["trainable"], entry["name"])
        offset += nbytes
    if offset != len(data):
        raise CheckpointError(f"{len(data) - offset} trailing bytes after payload")

    emb = header["embedding"]
    if emb["mode"] == "lookup":
        vocab = {w: i for i, w in enumerate(emb["vocab"])}
        if emb["vocab"][:1] != [UNK] or len(vocab) != params["embed.table"].shape[0]:
            raise CheckpointError("embedding vocabulary does not match the stored table")
        provider = LookupEmbeddings(vocab, params["embed.table"])
    elif provider is None or provider.mode != "contextual":
        raise CheckpointError("checkpoint was trained on contextual embeddings; supply them")
    elif provider.blocks and provider.dim != emb["dim"]:
        raise CheckpointError(f"contextual embeddings are {provider.dim} wide, checkpoint expects {emb['dim']}")
    cfg = TrainConfig.from_dict(header["config"])
    return GatedGCN(cfg, provider, header["labels"], params=params)


def save(model: GatedGCN, path, single: bool = False) -> None:
    with open(path, "wb") as fh:
        fh.write(dumps(model, single))


def load(path, provider=None) -> GatedGCN:
    with open(path, "rb") as fh:
        return loads(fh.read(), provider)
