"""Command-line interface: train, evaluate, predict, gradcheck, inspect-scores.

Settings resolve as flag > config file > built-in default. The config file
is given by ``--config`` or the ``GGCN_CONFIG`` environment variable and
holds ``key = value`` lines whose keys mirror the long flag names.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from . import checkpoint
from .config import ConfigError, TrainConfig, coerce, read_config_file
from .consistency import model_scores
from .corpus import CorpusError, Sentence, graph_distances, read_corpus
from .encoder import EmbeddingError, load_contextual_embeddings, load_lookup_embeddings
from .gradcheck import GradCheckReport, check_gradients
from .model import GatedGCN
from .synthetic import gradcheck_fixture
from .trainer import build_model, evaluate, predict_corpus, train

log = logging.getLogger("gatedgcn")

GRADCHECK_TOL = 1e-4

# flag dest -> TrainConfig field
_CFG_FLAGS = {
    "alpha": "alpha", "beta": "beta", "lr": "learning_rate", "epochs": "epochs",
    "batch_size": "batch_size", "seed": "seed", "gcn_layers": "gcn_layers",
    "no_gates": "use_gates", "no_diversity": "use_diversity", "no_consistency": "use_consistency",
    "isc_form": "isc_form", "negative_keep_prob": "negative_keep_prob",
    "lstm_hidden": "lstm_hidden", "gcn_dim": "gcn_dim", "score_dim": "score_dim",
    "ffn_hidden": "ffn_hidden", "emb_dim": "emb_dim", "gate_source": "gate_source",
    "gd_pair_mean": "gd_pair_mean", "target_f1": "target_f1",
}
_PATHS = ("corpus", "dev", "embeddings", "contextual", "checkpoint", "out", "plot")
_REQUIRED = {
    "train": ("corpus", "checkpoint"),
    "evaluate": ("corpus", "checkpoint"),
    "predict": ("corpus", "checkpoint"),
    "gradcheck": (),
    "inspect-scores": ("corpus",),
}


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    train: TrainConfig
    corpus: str | None = None
    dev: str | None = None
    embeddings: str | None = None
    contextual: str | None = None
    checkpoint: str | None = None
    out: str | None = None
    plot: str | None = None
    sentence: int = 0
    t: int | None = None
    workers: int = 1
    frozen_embeddings: bool = False


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    S = argparse.SUPPRESS
    common.add_argument("--config", default=S, help="config file (default: $GGCN_CONFIG)")
    for name in ("corpus", "dev", "embeddings", "contextual", "checkpoint", "out", "plot"):
        common.add_argument(f"--{name}", default=S, metavar="PATH")
    common.add_argument("--alpha", type=float, default=S)
    common.add_argument("--beta", type=float, default=S)
    common.add_argument("--lr", type=float, default=S)
    common.add_argument("--epochs", type=int, default=S)
    common.add_argument("--batch-size", type=int, default=S)
    common.add_argument("--seed", type=int, default=S)
    common.add_argument("--gcn-layers", type=int, default=S)
    common.add_argument("--no-gates", action="store_const", const=False, default=S)
    common.add_argument("--no-diversity", action="store_const", const=False, default=S)
    common.add_argument("--no-consistency", action="store_const", const=False, default=S)
    common.add_argument("--isc-form", choices=["kl", "literal"], default=S)
    common.add_argument("--negative-keep-prob", type=float, default=S)
    common.add_argument("--lstm-hidden", type=int, default=S)
    common.add_argument("--gcn-dim", type=int, default=S)
    common.add_argument("--score-dim", type=int, default=S)
    common.add_argument("--ffn-hidden", type=int, default=S)
    common.add_argument("--emb-dim", type=int, default=S)
    common.add_argument("--gate-source", choices=["embedding", "hidden"], default=S)
    common.add_argument("--gd-pair-mean", action="store_const", const=True, default=S)
    common.add_argument("--target-f1", type=float, default=S)
    common.add_argument("--frozen-embeddings", action="store_true", default=S,
                        help="keep lookup embeddings fixed during training")
    common.add_argument("--workers", type=int, default=S)
    common.add_argument("-v", "--verbose", action="store_true", default=False)

    ap = argparse.ArgumentParser(prog="gatedgcn", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("train", parents=[common], help="train and write a checkpoint")
    sub.add_parser("evaluate", parents=[common], help="print P/R/F of a checkpoint on a corpus")
    sub.add_parser("predict", parents=[common], help="per-token predicted type and probability")
    sub.add_parser("gradcheck", parents=[common], help="finite-difference check on a 3-token fixture")
    ins = sub.add_parser("inspect-scores", parents=[common], help="per-token distances and P/Q scores")
    ins.add_argument("--sentence", type=int, default=S, help="0-based sentence ordinal")
    ins.add_argument("--t", type=int, default=S, help="1-based trigger candidate index")
    return ap


def resolve(argv: list[str] | None = None, environ=None) -> tuple[RunConfig, bool]:
    """Merge defaults, config file and flags into a RunConfig."""
    environ = os.environ if environ is None else environ
    ns = vars(_parser().parse_args(argv))
    command = ns.pop("command")
    verbose = ns.pop("verbose")
    cfg_path = ns.pop("config", None) or environ.get("GGCN_CONFIG")

    layered: dict[str, object] = {}
    if cfg_path:
        if not Path(cfg_path).is_file():
            raise UsageError(f"config file not found: {cfg_path}")
        for key, raw in read_config_file(cfg_path).items():
            field = _CFG_FLAGS.get(key, key)
            if field in {f.name for f in fields(TrainConfig)}:
                value = coerce(field, raw)
                if key.startswith("no_"):
                    value = not value
                layered[field] = value
            elif key in _PATHS or key in ("sentence", "t", "workers", "frozen_embeddings"):
                layered[key] = raw if key in _PATHS else coerce_plain(key, raw)
            else:
                raise UsageError(f"{cfg_path}: unknown key {key!r}")
    for dest, value in ns.items():
        layered[_CFG_FLAGS.get(dest, dest)] = value

    tc_fields = {f.name for f in fields(TrainConfig)}
    tc = TrainConfig(**{k: v for k, v in layered.items() if k in tc_fields})
    run = RunConfig(command, tc, **{k: v for k, v in layered.items() if k not in tc_fields})
    for name in _REQUIRED[command]:
        if getattr(run, name) is None:
            raise UsageError(f"{command} needs --{name}")
    for name in ("corpus", "dev", "embeddings", "contextual"):
        path = getattr(run, name)
        if path is not None and not Path(path).is_file():
            raise UsageError(f"--{name}: file not found: {path}")
    if command != "train" and run.checkpoint and not Path(run.checkpoint).is_file():
        raise UsageError(f"--checkpoint: file not found: {run.checkpoint}")
    return run, verbose


def coerce_plain(key: str, raw: str):
    if key == "frozen_embeddings":
        return raw.strip().lower() in ("1", "true", "yes", "on")
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"{key}: expected an integer, got {raw!r}") from None


# ------------------------------------------------------------------ commands


def _contextual(run: RunConfig, corpus):
    return load_contextual_embeddings(run.contextual, corpus) if run.contextual else None


def _load_model(run: RunConfig, corpus) -> GatedGCN:
    return checkpoint.load(run.checkpoint, _contextual(run, corpus))


def _write(run: RunConfig, text: str) -> None:
    if run.out:
        Path(run.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def cmd_train(run: RunConfig) -> int:
    corpus = read_corpus(run.corpus)
    dev = read_corpus(run.dev) if run.dev else None
    rng = np.random.default_rng(run.train.seed)
    if run.contextual:
        if dev is not None:
            raise UsageError("--dev with --contextual needs dev vectors; train without --dev instead")
        provider = load_contextual_embeddings(run.contextual, corpus)
        model = build_model(run.train, corpus, provider)
    elif run.embeddings:
        provider = load_lookup_embeddings(run.embeddings, not run.frozen_embeddings, rng)
        model = build_model(run.train, corpus, provider)
    else:
        provider = None
        model = build_model(run.train, corpus)
    result = train(run.train, corpus, dev, provider=model.provider, model=model)
    checkpoint.save(result.model, run.checkpoint)
    _write(run, result.log_text())
    if run.plot:
        from .plotting import plot_learning_curve
        plot_learning_curve(result.history, run.plot)
    log.info("best epoch %d, checkpoint written to %s", result.best_epoch, run.checkpoint)
    return 0


def cmd_evaluate(run: RunConfig) -> int:
    corpus = read_corpus(run.corpus)
    model = _load_model(run, corpus)
    report = evaluate(model, corpus, workers=run.workers)
    _write(run, report.line() + "\n")
    return 0


def cmd_predict(run: RunConfig) -> int:
    corpus = read_corpus(run.corpus)
    model = _load_model(run, corpus)
    lines = ["sentence\tt\ttoken\tgold\tpredicted\tprobability"]
    for k, (s, preds) in enumerate(zip(corpus, predict_corpus(model, corpus, workers=run.workers))):
        for t, (tok, gold, (y, p)) in enumerate(zip(s.tokens, s.gold_labels, preds), 1):
            lines.append(f"{k}\t{t}\t{tok}\t{gold}\t{y}\t{p:.6f}")
    _write(run, "\n".join(lines) + "\n")
    return 0


def gradcheck_model(seed: int, cfg: TrainConfig | None = None) -> tuple[GatedGCN, Sentence]:
    """Small double-precision model over the 3-token fixture, all loss terms on."""
    s = gradcheck_fixture()
    cfg = cfg or TrainConfig(seed=seed, lstm_hidden=3, gcn_dim=4, score_dim=4, ffn_hidden=5, emb_dim=4)
    model = build_model(cfg, [s], labels=["None", "Attack", "Transport"])
    return model, s


def run_gradcheck(seed: int = 7, cfg: TrainConfig | None = None, eps: float = 1e-6) -> GradCheckReport:
    model, s = gradcheck_model(seed, cfg)
    names = list(model.trainable())

    def loss(*_):
        enc = model.encode_sentence(s, 0)
        total = None
        for t, gold in enumerate(s.gold_labels, 1):
            term = model.forward(enc, t, gold).total
            total = term if total is None else total + term
        return total

    return check_gradients(loss, [model.params[k] for k in names], eps=eps)


def cmd_gradcheck(run: RunConfig) -> int:
    cfg = TrainConfig(**{**run.train.to_dict(), "lstm_hidden": 3, "gcn_dim": 4, "score_dim": 4,
                         "ffn_hidden": 5, "emb_dim": 4})
    report = run_gradcheck(run.train.seed, cfg)
    ok = report.max_error < GRADCHECK_TOL
    _write(run, f"max_relative_error\t{report.max_error:.3e}\tcoordinates\t{report.checked}"
                f"\tkinks_skipped\t{len(report.skipped_kinks)}\t{'PASS' if ok else 'FAIL'}\n")
    return 0 if ok else 1


@dataclass
class ScoreRow:
    token: str
    distance: int
    p: float
    q: float


def inspect_scores(model: GatedGCN, corpus, ordinal: int, t: int) -> list[ScoreRow]:
    """Tree distance, graph score P and model score Q for every token."""
    if not 0 <= ordinal < len(corpus):
        raise UsageError(f"sentence ordinal {ordinal} outside 0..{len(corpus) - 1}")
    s = corpus[ordinal]
    if not 1 <= t <= s.n:
        raise UsageError(f"trigger index {t} outside 1..{s.n}")
    enc = model.encode_sentence(s, ordinal)
    m, _, V_t = model._features(enc, t, pooled=False)
    q = model_scores(V_t, m[-1], model.params["isc.W_v"], model.params["isc.W_m"]).q_dist.values
    g = graph_distances(s, t)
    return [ScoreRow(s.tokens[i], int(g.distances[i]), float(g.p_dist[i]), float(q[i])) for i in range(s.n)]


def cmd_inspect(run: RunConfig) -> int:
    corpus = read_corpus(run.corpus)
    if run.checkpoint:
        model = _load_model(run, corpus)
    else:
        model = build_model(run.train, corpus, _contextual(run, corpus))
    if not 0 <= run.sentence < len(corpus):
        raise UsageError(f"--sentence {run.sentence} outside 0..{len(corpus) - 1}")
    s = corpus[run.sentence]
    t = run.t
    if t is None:
        gold = [i for i, y in enumerate(s.gold_labels, 1) if y != "None"]
        if not gold:
            raise UsageError("sentence has no gold trigger; pass --t")
        t = gold[0]
    rows = inspect_scores(model, corpus, run.sentence, t)
    text = "index\ttoken\tdistance\tp\tq\n" + "".join(
        f"{i}\t{r.token}\t{r.distance}\t{r.p:.6f}\t{r.q:.6f}\n" for i, r in enumerate(rows, 1))
    _write(run, text)
    if run.plot:
        from .plotting import plot_importance
        plot_importance([r.token for r in rows], [r.distance for r in rows], [r.p for r in rows],
                        [r.q for r in rows], t, run.plot, title=f"sentence {run.sentence}, t={t}")
    return 0


_COMMANDS = {"train": cmd_train, "evaluate": cmd_evaluate, "predict": cmd_predict,
             "gradcheck": cmd_gradcheck, "inspect-scores": cmd_inspect}


def run(argv: list[str] | None = None) -> int:
    try:
        cfg, verbose = resolve(argv)
    except (UsageError, ConfigError) as e:
        print(f"gatedgcn: error: {e}", file=sys.stderr)
        return 2
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return _COMMANDS[cfg.command](cfg)
    except UsageError as e:
        print(f"gatedgcn: error: {e}", file=sys.stderr)
        return 2
    except (CorpusError, EmbeddingError, checkpoint.CheckpointError, ConfigError, OSError) as e:
        print(f"gatedgcn: error: {e}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())
