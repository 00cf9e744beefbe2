"""Training configuration and the ``key = value`` config-file reader."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields

from .consistency import ISC_FORMS


class ConfigError(ValueError):
    pass


@dataclass
class TrainConfig:
    alpha: float = 0.1
    beta: float = 0.2
    learning_rate: float = 5e-5
    epochs: int = 30
    batch_size: int = 32
    seed: int = 0
    use_gates: bool = True
    use_diversity: bool = True
    use_consistency: bool = True
    isc_form: str = "kl"
    negative_keep_prob: float = 1.0
    gcn_layers: int = 2
    lstm_hidden: int = 128
    gcn_dim: int = 128
    score_dim: int = 128
    ffn_hidden: int = 128
    emb_dim: int = 128  # only used when no embedding file is given
    gate_source: str = "embedding"
    gd_pair_mean: bool = False
    target_f1: float | None = None  # stop once dev F1 reaches this

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.alpha < 0 or self.beta < 0:
            raise ConfigError("alpha and beta must be >= 0")
        if not self.learning_rate > 0:
            raise ConfigError("learning rate must be > 0")
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigError("epochs and batch size must be >= 1")
        if self.gcn_layers < 1:
            raise ConfigError("need at least one GCN layer")
        if self.isc_form not in ISC_FORMS:
            raise ConfigError(f"isc_form must be one of {ISC_FORMS}")
        if not 0.0 < self.negative_keep_prob <= 1.0:
            raise ConfigError("negative_keep_prob must lie in (0, 1]")
        if self.gate_source not in ("embedding", "hidden"):
            raise ConfigError("gate_source must be 'embedding' or 'hidden'")
        for name in ("lstm_hidden", "gcn_dim", "score_dim", "ffn_hidden", "emb_dim"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")

    @property
    def diversity_active(self) -> bool:
        # no gates, no diversity
        return self.use_gates and self.use_diversity and self.alpha > 0

    @property
    def consistency_active(self) -> bool:
        return self.use_consistency and self.beta > 0

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in known})

    def replace(self, **kw) -> "TrainConfig":
        return dataclasses.replace(self, **kw)


_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def coerce(name: str, raw: str):
    """Parse a config-file string for TrainConfig field ``name``."""
    types = {f.name: f.type for f in fields(TrainConfig)}
    kind = types.get(name)
    raw = raw.strip()
    try:
        if kind == "bool":
            low = raw.lower()
            if low in _TRUE:
                return True
            if low in _FALSE:
                return False
            raise ValueError(raw)
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind == "float | None":
            return None if raw.lower() in ("", "none") else float(raw)
    except ValueError:
        raise ConfigError(f"{name}: cannot parse {raw!r} as {kind}") from None
    return raw


def read_config_file(path) -> dict[str, str]:
    """``key = value`` lines; '#' starts a comment; dashes in keys become underscores."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, value = line.split("=", 1)
            out[key.strip().replace("-", "_")] = value.strip()
    return out
