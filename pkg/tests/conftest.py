import numpy as np
import pytest

from gatedgcn.config import TrainConfig
from gatedgcn.corpus import Sentence


def random_heads(rng, n):
    """Uniform-ish random tree over 1..n as a heads list (0 = root)."""
    order = list(rng.permutation(n))
    heads = [0] * n
    for pos in range(1, n):
        heads[order[pos]] = int(order[rng.integers(pos)]) + 1
    return heads


def random_sentence(rng, n, labels=None):
    heads = random_heads(rng, n)
    labels = labels or ["None"] * n
    return Sentence(tuple(f"w{i}" for i in range(n)), tuple(heads),
                    tuple("root" if h == 0 else "dep" for h in heads), tuple(labels))


def floyd_warshall(heads):
    """All-pairs hop counts on the undirected tree; naive cubic oracle."""
    n = len(heads)
    inf = float("inf")
    d = [[0 if i == j else inf for j in range(n)] for i in range(n)]
    for dep, h in enumerate(heads):
        if h:
            d[dep][h - 1] = d[h - 1][dep] = 1
    for k in range(n):
        for i in range(n):
            for j in range(n):
                if d[i][k] + d[k][j] < d[i][j]:
                    d[i][j] = d[i][k] + d[k][j]
    return d


def central_diff(f, x, eps=1e-6):
    """Numerical gradient of scalar f at array x."""
    x = np.array(x, dtype=float)
    g = np.zeros_like(x)
    flat, gf = x.reshape(-1), g.reshape(-1)
    for i in range(flat.size):
        o = flat[i]
        flat[i] = o + eps
        fp = f(x)
        flat[i] = o - eps
        fm = f(x)
        flat[i] = o
        gf[i] = (fp - fm) / (2 * eps)
    return g


FIGURE1_HEADS = (3, 3, 0, 6, 6, 3, 8, 3, 3)
FIGURE2_HEADS = (2, 3, 0, 5, 3, 7, 3, 7, 10, 7, 3)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_cfg():
    return TrainConfig(seed=3, lstm_hidden=3, gcn_dim=4, score_dim=4, ffn_hidden=5, emb_dim=4)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
