"""Figures written next to the tab-separated reports."""

from __future__ import annotations

from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _finish(fig, path) -> None:
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_importance(tokens: Sequence[str], distances: Sequence[int], p: Sequence[float],
                    q: Sequence[float], t: int, path, title: str | None = None) -> None:
    """Graph scores P and model scores Q per token, tree distance under each word."""
    n = len(tokens)
    x = np.arange(n)
    fig, ax = plt.subplots(figsize=(max(4.0, 0.8 * n + 1.5), 3.2))
    w = 0.38
    ax.bar(x - w / 2, p, w, label="graph P", color="#7a9cc6")
    ax.bar(x + w / 2, q, w, label="model Q", color="#d9534f")
    labels = [f"{tok}\n{'*' if i == t - 1 else d}" for i, (tok, d) in enumerate(zip(tokens, distances))]
    ax.set_xticks(x)
    ax.set_xticklabels(labels, fontsize=9)
    ax.get_xticklabels()[t - 1].set_fontweight("bold")
    ax.set_ylabel("normalized score")
    ax.legend(frameon=False, fontsize=8)
    if title:
        ax.set_title(title, fontsize=10)
    for side in ("top", "right"):
        ax.spines[side].set_visible(False)
    _finish(fig, path)


def plot_learning_curve(history, path) -> None:
    epochs = [r.epoch for r in history]
    fig, ax1 = plt.subplots(figsize=(5, 3.2))
    ax1.plot(epochs, [r.loss for r in history], color="black", lw=1.2, label="train loss")
    ax1.set_xlabel("epoch")
    ax1.set_ylabel("train loss")
    ax2 = ax1.twinx()
    ax2.plot(epochs, [r.dev.f1 for r in history], color="#d9534f", lw=1.2, label="dev F1")
    ax2.set_ylim(0, 1.02)
    ax2.set_ylabel("dev F1")
    lines = ax1.get_lines() + ax2.get_lines()
    ax1.legend(lines, [l.get_label() for l in lines], frameon=False, fontsize=8, loc="center right")
    _finish(fig, path)
