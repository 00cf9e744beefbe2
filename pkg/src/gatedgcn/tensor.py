"""Dense float64 tensors with a reverse-mode tape.

Operations record themselves on the active :class:`Tape` only when at least
one input requires gradients, so forward passes outside a tape (evaluation,
finite differences) cost no bookkeeping.

    >>> w = Tensor([1.0, 2.0], requires_grad=True)
    >>> with Tape() as tape:
    ...     loss = sum_all(w)
    >>> tape.backward(loss)
    >>> w.grad
    array([1., 1.])
"""

from __future__ import annotations

import threading
from typing import Callable, Sequence

import numpy as np

COSINE_EPS = 1e-8

_state = threading.local()


class ShapeError(ValueError):
    """Raised when operand shapes do not conform to an operation."""


class TapeError(RuntimeError):
    pass


class Tensor:
    __slots__ = ("values", "requires_grad", "grad", "name")

    def __init__(self, values, requires_grad: bool = False, name: str | None = None):
        self.values = np.asarray(values, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.values.shape

    def __len__(self) -> int:
        return self.values.shape[0]

    def item(self) -> float:
        if self.values.size != 1:
            raise ShapeError(f"item() needs a single value, got shape {self.shape}")
        return float(self.values.reshape(()))

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        tag = f" {self.name!r}" if self.name else ""
        return f"Tensor{tag}(shape={self.shape}, requires_grad={self.requires_grad})"

    def __add__(self, other):
        return add(self, _lift(other))

    def __radd__(self, other):
        return add(_lift(other), self)

    def __sub__(self, other):
        return sub(self, _lift(other))

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return scale(self, other)
        return mul(self, other)

    def __rmul__(self, other):
        return self.__mul__(other)

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, i: int):
        return row(self, i)


def _lift(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


class _Node:
    __slots__ = ("inputs", "output", "backward")

    def __init__(self, inputs, output, backward):
        self.inputs = inputs
        self.output = output
        self.backward = backward


class Tape:
    """Ordered record of primitive operations; one backward pass per recording."""

    def __init__(self):
        self.nodes: list[_Node] = []
        self._used = False

    def __enter__(self) -> "Tape":
        stack = _tape_stack()
        stack.append(self)
        return self

    def __exit__(self, *exc) -> None:
        _tape_stack().pop()

    def record(self, inputs, output, backward) -> None:
        self.nodes.append(_Node(inputs, output, backward))

    def backward(self, loss: Tensor, params: Sequence[Tensor] = ()) -> None:
        """Set ``.grad`` on every requires_grad tensor seen by this tape.

        Tensors in ``params`` that the loss does not reach get zero gradients.
        """
        if self._used:
            raise TapeError("backward already ran on this tape; record a new one")
        if loss.values.size != 1:
            raise ShapeError(f"backward needs a scalar loss, got shape {loss.shape}")
        self._used = True

        grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.values)}
        leaves: dict[int, Tensor] = {}
        for node in reversed(self.nodes):
            g = grads.get(id(node.output))
            if g is None:
                for x in node.inputs:
                    if x.requires_grad and id(x) not in leaves:
                        leaves[id(x)] = x
                continue
            for x, gx in zip(node.inputs, node.backward(g)):
                if not x.requires_grad:
                    continue
                if gx is not None:
                    key = id(x)
                    if key in grads:
                        grads[key] = grads[key] + gx
                    else:
                        grads[key] = gx
                if id(x) not in leaves:
                    leaves[id(x)] = x
        if loss.requires_grad:
            leaves.setdefault(id(loss), loss)
        for p in params:
            leaves.setdefault(id(p), p)
        for key, t in leaves.items():
            g = grads.get(key)
            t.grad = np.zeros_like(t.values) if g is None else g
        # intermediate tensors keep their grads; drop the tape's references
        self.nodes.clear()


def _tape_stack() -> list[Tape]:
    stack = getattr(_state, "stack", None)
    if stack is None:
        stack = _state.stack = []
    return stack


def active_tape() -> Tape | None:
    stack = _tape_stack()
    return stack[-1] if stack else None


def backward(loss: Tensor, tape: Tape | None = None, params: Sequence[Tensor] = ()) -> None:
    tape = tape or active_tape()
    if tape is None:
        raise TapeError("no tape to run backward on")
    tape.backward(loss, params)


def _emit(values: np.ndarray, inputs: Sequence[Tensor], bwd: Callable) -> Tensor:
    needs = any(x.requires_grad for x in inputs)
    out = Tensor(values, requires_grad=needs)
    if needs:
        tape = active_tape()
        if tape is not None:
            tape.record(inputs, out, bwd)
        else:
            out.requires_grad = False
    return out


def _mismatch(kind: str, a, b) -> ShapeError:
    return ShapeError(f"{kind}: incompatible shapes {tuple(a)} and {tuple(b)}")


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if g.shape == shape:
        return g
    return g.sum(axis=tuple(range(g.ndim - len(shape))))


def _check_binary(kind: str, a: Tensor, b: Tensor) -> None:
    sa, sb = a.shape, b.shape
    if sa == sb:
        return
    # a (d,) vector may ride along the rows of an (n, d) matrix
    if len(sa) == 2 and len(sb) == 1 and sa[1] == sb[0]:
        return
    if len(sb) == 2 and len(sa) == 1 and sb[1] == sa[0]:
        return
    raise _mismatch(kind, sa, sb)


# ---------------------------------------------------------------- primitives


def add(a: Tensor, b: Tensor) -> Tensor:
    _check_binary("add", a, b)
    sa, sb = a.shape, b.shape
    return _emit(a.values + b.values, (a, b),
                 lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)))


def sub(a: Tensor, b: Tensor) -> Tensor:
    _check_binary("sub", a, b)
    sa, sb = a.shape, b.shape
    return _emit(a.values - b.values, (a, b),
                 lambda g: (_unbroadcast(g, sa), -_unbroadcast(g, sb)))


def mul(a: Tensor, b: Tensor) -> Tensor:
    """Element-wise product (Hadamard)."""
    _check_binary("elementwise_mul", a, b)
    av, bv = a.values, b.values
    return _emit(av * bv, (a, b),
                 lambda g: (_unbroadcast(g * bv, av.shape), _unbroadcast(g * av, bv.shape)))


def scale(a: Tensor, c: float) -> Tensor:
    c = float(c)
    return _emit(a.values * c, (a,), lambda g: (g * c,))


def matmul(a: Tensor, b: Tensor) -> Tensor:
    av, bv = a.values, b.values
    if av.ndim not in (1, 2) or bv.ndim not in (1, 2) or av.shape[-1] != bv.shape[0]:
        raise _mismatch("matmul", av.shape, bv.shape)

    def bwd(g):
        if av.ndim == 2 and bv.ndim == 2:
            return g @ bv.T, av.T @ g
        if av.ndim == 2:
            return np.outer(g, bv), av.T @ g
        if bv.ndim == 2:
            return bv @ g, np.outer(av, g)
        return g * bv, g * av

    return _emit(av @ bv, (a, b), bwd)


def sigmoid(a: Tensor) -> Tensor:
    x = a.values
    # split by sign so exp never overflows
    e = np.exp(-np.abs(x))
    y = np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    return _emit(y, (a,), lambda g: (g * y * (1.0 - y),))


def tanh(a: Tensor) -> Tensor:
    y = np.tanh(a.values)
    return _emit(y, (a,), lambda g: (g * (1.0 - y * y),))


def relu(a: Tensor) -> Tensor:
    pos = a.values > 0
    return _emit(np.where(pos, a.values, 0.0), (a,), lambda g: (g * pos,))


def exp(a: Tensor) -> Tensor:
    y = np.exp(a.values)
    return _emit(y, (a,), lambda g: (g * y,))


def log(a: Tensor) -> Tensor:
    x = a.values
    return _emit(np.log(x), (a,), lambda g: (g / x,))


def reciprocal(a: Tensor) -> Tensor:
    x = a.values
    return _emit(1.0 / x, (a,), lambda g: (-g / (x * x),))


def concat(inputs: Sequence[Tensor], axis: int = -1) -> Tensor:
    vals = [x.values for x in inputs]
    try:
        out = np.concatenate(vals, axis=axis)
    except ValueError:
        raise ShapeError("concat: incompatible shapes " + " and ".join(str(v.shape) for v in vals)) from None
    bounds = np.cumsum([v.shape[axis] for v in vals])[:-1]
    return _emit(out, tuple(inputs), lambda g: tuple(np.split(g, bounds, axis=axis)))


def stack_rows(inputs: Sequence[Tensor]) -> Tensor:
    """Stack equal-length vectors into an (n, d) matrix."""
    vals = [x.values for x in inputs]
    if len({v.shape for v in vals}) > 1:
        raise ShapeError("stack_rows: incompatible shapes " + " and ".join(str(v.shape) for v in vals))
    return _emit(np.stack(vals), tuple(inputs), lambda g: tuple(g))


def row(a: Tensor, i: int) -> Tensor:
    x = a.values

    def bwd(g):
        out = np.zeros_like(x)
        out[i] = g
        return (out,)

    return _emit(x[i], (a,), bwd)


def take_rows(a: Tensor, idx: Sequence[int]) -> Tensor:
    """Gather rows ``a[idx]``; gradient scatter-adds back (for embedding lookup)."""
    x = a.values
    idx = np.asarray(idx, dtype=np.intp)

    def bwd(g):
        out = np.zeros_like(x)
        np.add.at(out, idx, g)
        return (out,)

    return _emit(x[idx], (a,), bwd)


def slice_cols(a: Tensor, start: int, stop: int) -> Tensor:
    x = a.values

    def bwd(g):
        out = np.zeros_like(x)
        out[..., start:stop] = g
        return (out,)

    return _emit(x[..., start:stop], (a,), bwd)


def mean_rows(a: Tensor) -> Tensor:
    x = a.values
    if x.ndim != 2:
        raise ShapeError(f"mean_rows: expected a matrix, got shape {x.shape}")
    n = x.shape[0]
    return _emit(x.mean(axis=0), (a,), lambda g: (np.broadcast_to(g / n, x.shape).copy(),))


def sum_rows(a: Tensor) -> Tensor:
    x = a.values
    if x.ndim != 2:
        raise ShapeError(f"sum_rows: expected a matrix, got shape {x.shape}")
    return _emit(x.sum(axis=0), (a,), lambda g: (np.broadcast_to(g, x.shape).copy(),))


def sum_all(a: Tensor) -> Tensor:
    x = a.values
    return _emit(np.asarray(x.sum()), (a,), lambda g: (np.full_like(x, g),))


def dot(a: Tensor, b: Tensor) -> Tensor:
    if a.values.ndim != 1 or a.shape != b.shape:
        raise _mismatch("dot", a.shape, b.shape)
    return matmul(a, b)


def neighbor_mean(h: Tensor, neighbors: Sequence[Sequence[int]]) -> Tensor:
    """Row i becomes the mean of ``h[j]`` over ``j in neighbors[i]`` (0-based)."""
    x = h.values
    if x.ndim != 2 or len(neighbors) != x.shape[0]:
        raise ShapeError(f"neighbor_mean: {len(neighbors)} neighbour lists for shape {x.shape}")
    deg = np.fromiter((len(nb) for nb in neighbors), dtype=np.intp, count=len(neighbors))
    flat = np.fromiter((j for nb in neighbors for j in nb), dtype=np.intp)
    offsets = np.concatenate(([0], np.cumsum(deg)[:-1]))
    out = np.add.reduceat(x[flat], offsets, axis=0) / deg[:, None]

    def bwd(g):
        gx = np.zeros_like(x)
        np.add.at(gx, flat, np.repeat(g / deg[:, None], deg, axis=0))
        return (gx,)

    return _emit(out, (h,), bwd)


def softmax(v: Tensor) -> Tensor:
    x = v.values
    if x.ndim != 1 or x.size == 0:
        raise ShapeError(f"softmax: expected a non-empty vector, got shape {x.shape}")
    e = np.exp(x - x.max())
    y = e / e.sum()
    return _emit(y, (v,), lambda g: (y * (g - g @ y),))


def log_softmax(v: Tensor) -> Tensor:
    x = v.values
    if x.ndim != 1 or x.size == 0:
        raise ShapeError(f"log_softmax: expected a non-empty vector, got shape {x.shape}")
    z = x - x.max()
    out = z - np.log(np.exp(z).sum())
    y = np.exp(out)
    return _emit(out, (v,), lambda g: (g - y * g.sum(),))


def masked_max_pool(rows: Tensor, mask: Sequence[bool] | None = None) -> Tensor:
    """Column-wise max over the rows whose mask entry is true.

    The gradient of each column goes to its first maximal row.
    """
    x = rows.values
    if x.ndim != 2:
        raise ShapeError(f"masked_max_pool: expected a matrix, got shape {x.shape}")
    if mask is None:
        keep = np.arange(x.shape[0])
    else:
        if len(mask) != x.shape[0]:
            raise ShapeError(f"masked_max_pool: mask length {len(mask)} for shape {x.shape}")
        keep = np.flatnonzero(np.asarray(mask, dtype=bool))
        if keep.size == 0:
            raise ValueError("masked_max_pool: every row is masked out")
    arg = keep[np.argmax(x[keep], axis=0)]
    cols = np.arange(x.shape[1])
    out = x[arg, cols]

    def bwd(g):
        gx = np.zeros_like(x)
        gx[arg, cols] = g
        return (gx,)

    return _emit(out, (rows,), bwd)


def cosine(u: Tensor, v: Tensor) -> Tensor:
    """dot(u, v) / max(|u| |v|, eps); zero vectors give 0 instead of NaN."""
    a, b = u.values, v.values
    if a.ndim != 1 or a.shape != b.shape or a.size == 0:
        raise _mismatch("cosine", a.shape, b.shape)
    na, nb = np.sqrt(a @ a), np.sqrt(b @ b)
    clamped = na * nb < COSINE_EPS
    d = COSINE_EPS if clamped else na * nb
    ab = a @ b
    c = ab / d

    def bwd(g):
        if clamped:
            return g * b / d, g * a / d
        ga = b / d - c * a / (na * na)
        gb = a / d - c * b / (nb * nb)
        return g * ga, g * gb

    return _emit(np.asarray(c), (u, v), bwd)


_KINDS: dict[str, Callable] = {
    "matmul": matmul,
    "add": add,
    "elementwise_mul": mul,
    "sigmoid": sigmoid,
    "tanh": tanh,
    "relu": relu,
    "concat": concat,
    "mean_rows": mean_rows,
    "sum_rows": sum_rows,
    "scale": scale,
}


def forward_op(kind: str, inputs: Sequence[Tensor], *args) -> Tensor:
    """Apply a primitive by name; ``scale`` takes the factor as an extra arg."""
    try:
        fn = _KINDS[kind]
    except KeyError:
        raise ValueError(f"unknown op kind {kind!r}") from None
    if kind == "concat":
        return fn(inputs, *args)
    return fn(*inputs, *args)
