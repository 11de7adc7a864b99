"""Reverse-mode automatic differentiation over dense float64 numpy arrays.

Every operation that touches a gradient-requiring tensor records a closure
that scatters the upstream gradient back to its parents; ``backward`` replays
those closures in reverse topological order. Operations on tensors that do
not require gradients return plain constants, so inference builds no tape.

All math is double precision. Tensors are immutable after construction except
for their ``grad`` buffers (and parameter ``data``, which the optimizer
updates between steps).
"""

from __future__ import annotations

from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import ConfigError, ContractError, MaskError, ShapeError

Array = np.ndarray


def _as_f64(x) -> Array:
    return np.asarray(x, dtype=np.float64)


class Tensor:
    """A dense float64 array plus an optional gradient buffer.

    ``requires_grad`` marks leaves (parameters) and anything computed from
    them. ``grad`` is allocated lazily for intermediates and accumulates
    across backward passes until ``zero_grad`` resets it.
    """

    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward_fn")

    def __init__(self, data, requires_grad: bool = False):
        self.data = _as_f64(data)
        self.requires_grad = bool(requires_grad)
        self.grad: Array | None = np.zeros_like(self.data) if requires_grad else None
        self._parents: tuple[Tensor, ...] = ()
        self._backward_fn: Callable[[Array], None] | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def item(self) -> float:
        return float(self.data.reshape(()))

    def zero_grad(self) -> None:
        if self.requires_grad:
            self.grad = np.zeros_like(self.data)

    def backward(self) -> None:
        backward(self)

    # -- operator sugar -------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __pow__(self, exponent):
        return power(self, exponent)

    def __getitem__(self, key):
        return index(self, key)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"


def _lift(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _from_op(data: Array, parents: tuple[Tensor, ...], backward_fn) -> Tensor:
    out = Tensor.__new__(Tensor)
    out.data = data
    out.requires_grad = True
    out.grad = None
    out._parents = parents
    out._backward_fn = backward_fn
    return out


def _tracked(*tensors: Tensor) -> bool:
    return any(t.requires_grad for t in tensors)


def _accumulate(t: Tensor, g: Array) -> None:
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad += g


def _reduce_to(g: Array, shape: tuple[int, ...]) -> Array:
    """Sum out the dimensions numpy broadcasting introduced."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


def backward(loss: Tensor) -> None:
    """Populate ``grad`` on everything ``loss`` depends on.

    ``loss`` must be a scalar. Repeated calls accumulate into existing
    gradient buffers; call ``zero_grad`` on parameters between steps.
    """
    if not isinstance(loss, Tensor):
        raise ContractError("backward expects a Tensor")
    if loss.data.size != 1:
        raise ContractError(f"backward expects a scalar loss, got shape {loss.data.shape}")

    # Iterative post-order traversal; recursion would overflow on long chains.
    topo: list[Tensor] = []
    visited: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            topo.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if parent.requires_grad and id(parent) not in visited:
                stack.append((parent, False))

    _accumulate(loss, np.ones_like(loss.data))
    for node in reversed(topo):
        if node._backward_fn is not None:
            node._backward_fn(node.grad)


# -- arithmetic ---------------------------------------------------------

def add(a, b) -> Tensor:
    a, b = _lift(a), _lift(b)
    data = a.data + b.data
    if not _tracked(a, b):
        return Tensor(data)

    def bw(g: Array) -> None:
        _accumulate(a, _reduce_to(g, a.data.shape))
        _accumulate(b, _reduce_to(g, b.data.shape))

    return _from_op(data, (a, b), bw)


def sub(a, b) -> Tensor:
    a, b = _lift(a), _lift(b)
    data = a.data - b.data
    if not _tracked(a, b):
        return Tensor(data)

    def bw(g: Array) -> None:
        _accumulate(a, _reduce_to(g, a.data.shape))
        _accumulate(b, _reduce_to(-g, b.data.shape))

    return _from_op(data, (a, b), bw)


def mul(a, b) -> Tensor:
    a, b = _lift(a), _lift(b)
    data = a.data * b.data
    if not _tracked(a, b):
        return Tensor(data)

    def bw(g: Array) -> None:
        if a.requires_grad:
            _accumulate(a, _reduce_to(g * b.data, a.data.shape))
        if b.requires_grad:
            _accumulate(b, _reduce_to(g * a.data, b.data.shape))

    return _from_op(data, (a, b), bw)


def div(a, b) -> Tensor:
    a, b = _lift(a), _lift(b)
    data = a.data / b.data
    if not _tracked(a, b):
        return Tensor(data)

    def bw(g: Array) -> None:
        if a.requires_grad:
            _accumulate(a, _reduce_to(g / b.data, a.data.shape))
        if b.requires_grad:
            _accumulate(b, _reduce_to(-g * a.data / (b.data * b.data), b.data.shape))

    return _from_op(data, (a, b), bw)


def power(a, exponent: float) -> Tensor:
    a = _lift(a)
    p = float(exponent)
    data = a.data ** p
    if not _tracked(a):
        return Tensor(data)

    def bw(g: Array) -> None:
        _accumulate(a, g * p * a.data ** (p - 1.0))

    return _from_op(data, (a,), bw)


def matmul(a, b) -> Tensor:
    a, b = _lift(a), _lift(b)
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError(f"matmul needs >=2-D operands, got {a.data.shape} @ {b.data.shape}")
    if a.data.shape[-1] != b.data.shape[-2]:
        raise ShapeError(f"matmul inner dimensions disagree: {a.data.shape} @ {b.data.shape}")
    data = np.matmul(a.data, b.data)
    if not _tracked(a, b):
        return Tensor(data)

    def bw(g: Array) -> None:
        if a.requires_grad:
            ga = np.matmul(g, np.swapaxes(b.data, -1, -2))
            _accumulate(a, _reduce_to(ga, a.data.shape))
        if b.requires_grad:
            gb = np.matmul(np.swapaxes(a.data, -1, -2), g)
            _accumulate(b, _reduce_to(gb, b.data.shape))

    return _from_op(data, (a, b), bw)


def linear(x, w, bias) -> Tensor:
    """``x @ w + bias`` with shape checking on all three operands."""
    x, w, bias = _lift(x), _lift(w), _lift(bias)
    if w.ndim != 2 or x.data.shape[-1] != w.data.shape[0]:
        raise ShapeError(f"linear: input {x.data.shape} incompatible with weight {w.data.shape}")
    if bias.data.shape != (w.data.shape[1],):
        raise ShapeError(f"linear: bias {bias.data.shape} incompatible with weight {w.data.shape}")
    return add(matmul(x, w), bias)


# -- reductions and shaping ---------------------------------------------

def tensor_sum(a, axis=None, keepdims: bool = False) -> Tensor:
    a = _lift(a)
    data = a.data.sum(axis=axis, keepdims=keepdims)
    if not _tracked(a):
        return Tensor(data)

    def bw(g: Array) -> None:
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        _accumulate(a, np.broadcast_to(g, a.data.shape))

    return _from_op(data, (a,), bw)


def tensor_mean(a, axis=None, keepdims: bool = False) -> Tensor:
    a = _lift(a)
    count = a.data.size if axis is None else np.prod(
        [a.data.shape[ax] for ax in (axis if isinstance(axis, tuple) else (axis,))]
    )
    data = a.data.mean(axis=axis, keepdims=keepdims)
    if not _tracked(a):
        return Tensor(data)

    def bw(g: Array) -> None:
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        _accumulate(a, np.broadcast_to(g, a.data.shape) / count)

    return _from_op(data, (a,), bw)


def reshape(a, shape: Sequence[int]) -> Tensor:
    a = _lift(a)
    data = a.data.reshape(shape)
    if not _tracked(a):
        return Tensor(data)

    def bw(g: Array) -> None:
        _accumulate(a, g.reshape(a.data.shape))

    return _from_op(data, (a,), bw)


def transpose(a, axes: Sequence[int]) -> Tensor:
    a = _lift(a)
    axes = tuple(axes)
    data = a.data.transpose(axes)
    if not _tracked(a):
        return Tensor(data)
    inverse = tuple(int(i) for i in np.argsort(axes))

    def bw(g: Array) -> None:
        _accumulate(a, g.transpose(inverse))

    return _from_op(data, (a,), bw)


def index(a, key) -> Tensor:
    """Basic (slice/int/tuple) indexing. Use ``take_rows`` for array indices."""
    a = _lift(a)
    data = a.data[key]
    if not _tracked(a):
        return Tensor(data)

    def bw(g: Array) -> None:
        buf = np.zeros_like(a.data)
        buf[key] += g
        _accumulate(a, buf)

    return _from_op(np.ascontiguousarray(data), (a,), bw)


def take_rows(table, indices) -> Tensor:
    """Gather rows of a 2-D table; backward scatter-adds (handles repeats)."""
    table = _lift(table)
    idx = np.asarray(indices, dtype=np.int64)
    if table.ndim != 2:
        raise ShapeError(f"take_rows expects a 2-D table, got {table.data.shape}")
    if idx.size and (idx.min() < 0 or idx.max() >= table.data.shape[0]):
        raise IndexError(f"row index out of range for table with {table.data.shape[0]} rows")
    data = table.data[idx]
    if not _tracked(table):
        return Tensor(data)

    def bw(g: Array) -> None:
        buf = np.zeros_like(table.data)
        np.add.at(buf, idx, g)
        _accumulate(table, buf)

    return _from_op(data, (table,), bw)


def concat(tensors: Iterable, axis: int = -1) -> Tensor:
    parts = [_lift(t) for t in tensors]
    data = np.concatenate([p.data for p in parts], axis=axis)
    if not _tracked(*parts):
        return Tensor(data)
    sizes = [p.data.shape[axis] for p in parts]
    offsets = np.cumsum([0] + sizes)

    def bw(g: Array) -> None:
        moved = np.moveaxis(g, axis, 0)
        for p, lo, hi in zip(parts, offsets[:-1], offsets[1:]):
            _accumulate(p, np.moveaxis(moved[lo:hi], 0, axis))

    return _from_op(data, tuple(parts), bw)


# -- nonlinearities ------------------------------------------------------

def relu(a) -> Tensor:
    a = _lift(a)
    data = np.maximum(a.data, 0.0)
    if not _tracked(a):
        return Tensor(data)

    def bw(g: Array) -> None:
        _accumulate(a, g * (a.data > 0.0))

    return _from_op(data, (a,), bw)


def sigmoid(a) -> Tensor:
    a = _lift(a)
    x = a.data
    # Piecewise form avoids exp overflow for large |x|.
    data = np.where(x >= 0.0, 1.0 / (1.0 + np.exp(-np.abs(x))),
                    np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))
    if not _tracked(a):
        return Tensor(data)

    def bw(g: Array) -> None:
        _accumulate(a, g * data * (1.0 - data))

    return _from_op(data, (a,), bw)


def tanh(a) -> Tensor:
    a = _lift(a)
    data = np.tanh(a.data)
    if not _tracked(a):
        return Tensor(data)

    def bw(g: Array) -> None:
        _accumulate(a, g * (1.0 - data * data))

    return _from_op(data, (a,), bw)


def absolute(a) -> Tensor:
    """Elementwise |x| with subgradient 0 at x == 0."""
    a = _lift(a)
    data = np.abs(a.data)
    if not _tracked(a):
        return Tensor(data)

    def bw(g: Array) -> None:
        _accumulate(a, g * np.sign(a.data))

    return _from_op(data, (a,), bw)


_ACTIVATIONS = {"relu": relu, "sigmoid": sigmoid, "tanh": tanh}


def activation(a, kind: str) -> Tensor:
    try:
        fn = _ACTIVATIONS[kind]
    except KeyError:
        raise ConfigError(f"unknown activation kind {kind!r}; expected one of {sorted(_ACTIVATIONS)}")
    return fn(a)


def softmax_rows(a, mask: Array | None = None) -> Tensor:
    """Softmax over the last axis; masked-out entries are exactly zero.

    ``mask`` is boolean, True where an entry participates. Rows are
    stabilized by subtracting the row max over unmasked entries.
    """
    a = _lift(a)
    x = a.data
    if mask is not None:
        keep = np.broadcast_to(np.asarray(mask, dtype=bool), x.shape)
        if not keep.any(axis=-1).all():
            raise MaskError("softmax_rows: some row has every entry masked")
        shifted = np.where(keep, x, -np.inf)
        shifted = shifted - shifted.max(axis=-1, keepdims=True)
        e = np.where(keep, np.exp(shifted), 0.0)
    else:
        e = np.exp(x - x.max(axis=-1, keepdims=True))
    data = e / e.sum(axis=-1, keepdims=True)
    if not _tracked(a):
        return Tensor(data)

    def bw(g: Array) -> None:
        # dx = y * (g - sum(g*y)); masked entries have y == 0, hence dx == 0.
        inner = (g * data).sum(axis=-1, keepdims=True)
        _accumulate(a, data * (g - inner))

    return _from_op(data, (a,), bw)


def dropout(a, p: float, training: bool, rng: np.random.Generator | None = None) -> Tensor:
    """Inverted dropout: zero with probability p, scale survivors by 1/(1-p).

    Identity (the input tensor itself) in inference mode or at p == 0.
    """
    if not 0.0 <= p < 1.0:
        raise ConfigError(f"dropout probability must be in [0, 1), got {p}")
    a = _lift(a)
    if not training or p == 0.0:
        return a
    if rng is None:
        raise ConfigError("dropout in training mode needs a seeded generator")
    scale = 1.0 / (1.0 - p)
    mask = (rng.random(a.data.shape) >= p) * scale
    data = a.data * mask
    if not _tracked(a):
        return Tensor(data)

    def bw(g: Array) -> None:
        _accumulate(a, g * mask)

    return _from_op(data, (a,), bw)


def layer_norm(a, gain, bias, eps: float = 1e-5) -> Tensor:
    """Normalize over the last axis, then apply elementwise gain and bias."""
    a, gain, bias = _lift(a), _lift(gain), _lift(bias)
    d = a.data.shape[-1]
    if gain.data.shape != (d,) or bias.data.shape != (d,):
        raise ShapeError(f"layer_norm: gain/bias must be ({d},), got {gain.data.shape}/{bias.data.shape}")
    mu = a.data.mean(axis=-1, keepdims=True)
    centered = a.data - mu
    var = (centered * centered).mean(axis=-1, keepdims=True)
    rstd = 1.0 / np.sqrt(var + eps)
    xhat = centered * rstd
    data = xhat * gain.data + bias.data
    if not _tracked(a, gain, bias):
        return Tensor(data)

    def bw(g: Array) -> None:
        if gain.requires_grad:
            _accumulate(gain, (g * xhat).reshape(-1, d).sum(axis=0))
        if bias.requires_grad:
            _accumulate(bias, g.reshape(-1, d).sum(axis=0))
        if a.requires_grad:
            gx = g * gain.data
            # d/dx of (x - mu) * rstd, with mu and rstd functions of x.
            gsum = gx.sum(axis=-1, keepdims=True)
            gdot = (gx * xhat).sum(axis=-1, keepdims=True)
            _accumulate(a, rstd * (gx - gsum / d - xhat * gdot / d))

    return _from_op(data, (a, gain, bias), bw)


def zeros(shape, requires_grad: bool = False) -> Tensor:
    return Tensor(np.zeros(shape), requires_grad=requires_grad)
