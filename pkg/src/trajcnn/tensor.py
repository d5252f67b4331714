"""Minimal dense tensor with tape-based reverse-mode differentiation.

Only the operations the trajectory models need are provided. Every
differentiable op appends a :class:`Node` to the execution record; calling
:func:`backward` on a scalar loss replays the reachable nodes in reverse
execution order and accumulates gradients into leaf tensors that have
``requires_grad`` set.

Data is float32 unless a float64 array is passed in; float64 exists for
gradient verification.
"""
from __future__ import annotations

import contextlib
import itertools
import threading
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import kernels

_seq = itertools.count()
_state = threading.local()


def grad_enabled() -> bool:
    return getattr(_state, "enabled", True)


class DimensionError(ValueError):
    """Operand shapes are incompatible."""


@contextlib.contextmanager
def no_grad():
    """Disable graph recording inside the block (per thread)."""
    prev = grad_enabled()
    _state.enabled = False
    try:
        yield
    finally:
        _state.enabled = prev


def _as_array(data, dtype=None) -> np.ndarray:
    if dtype is None:
        keep = isinstance(data, np.ndarray) and data.dtype in (np.float32, np.float64)
        dtype = data.dtype if keep else np.float32
    arr = np.asarray(data, dtype=dtype)
    if not arr.flags.c_contiguous:
        arr = np.ascontiguousarray(arr)
    return arr


class Tensor:
    """Dense array with an optional gradient accumulator."""

    __slots__ = ("data", "grad", "requires_grad", "name", "_node")

    def __init__(self, data, requires_grad: bool = False, dtype=None, name: str | None = None):
        self.data = _as_array(data, dtype)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self.name = name
        self._node: Node | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self) -> int:
        return self.data.size

    def numpy(self) -> np.ndarray:
        return self.data

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self) -> None:
        backward(self)

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{flag})"

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        return mul(self, other)


@dataclass
class Node:
    """One executed operation: inputs, output and the vector-Jacobian product."""

    seq: int
    op: str
    inputs: tuple[Tensor, ...]
    output: Tensor
    vjp: Callable[[np.ndarray], Sequence[np.ndarray | None]]


@dataclass
class Graph:
    """Operations reachable from a tensor, in execution order."""

    nodes: list[Node] = field(default_factory=list)

    @classmethod
    def from_output(cls, out: Tensor) -> "Graph":
        seen: dict[int, Node] = {}
        stack = [out]
        while stack:
            t = stack.pop()
            node = t._node
            if node is None or node.seq in seen:
                continue
            seen[node.seq] = node
            stack.extend(node.inputs)
        return cls([seen[k] for k in sorted(seen)])


def _record(op: str, out_data: np.ndarray, inputs: tuple[Tensor, ...], vjp) -> Tensor:
    out = Tensor(out_data)
    if grad_enabled() and any(t.requires_grad for t in inputs):
        out.requires_grad = True
        out._node = Node(next(_seq), op, inputs, out, vjp)
    return out


def _tensor(x, like: Tensor | None = None) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(x, dtype=like.dtype if like is not None else None)


def backward(loss: Tensor) -> None:
    """Accumulate d(loss)/d(leaf) into ``.grad`` of every leaf requiring grad.

    Gradients add onto existing ``.grad`` values; call ``zero_grad`` between
    steps.
    """
    if loss.size != 1:
        raise ValueError(f"backward needs a scalar loss, got shape {loss.shape}")
    seed = np.ones_like(loss.data)
    if loss._node is None:
        if loss.requires_grad:
            _accumulate(loss, seed)
        return
    grads: dict[int, np.ndarray] = {id(loss): seed}
    for node in reversed(Graph.from_output(loss).nodes):
        g = grads.pop(id(node.output), None)
        if g is None:
            continue
        for inp, gi in zip(node.inputs, node.vjp(g)):
            if gi is None or not inp.requires_grad:
                continue
            if inp._node is None:
                _accumulate(inp, gi)
            elif id(inp) in grads:
                grads[id(inp)] = grads[id(inp)] + gi
            else:
                grads[id(inp)] = gi


def _accumulate(t: Tensor, g: np.ndarray) -> None:
    g = g.astype(t.dtype, copy=False).reshape(t.shape)
    if t.grad is None:
        t.grad = g.copy()
    else:
        t.grad += g


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


# --------------------------------------------------------------------------
# operations


def linear(x, weight, bias=None) -> Tensor:
    """``x @ weight + bias`` over the last axis of ``x``."""
    x, weight = _tensor(x), _tensor(weight)
    if x.shape[-1] != weight.shape[0] or weight.data.ndim != 2:
        raise DimensionError(f"linear: input {x.shape} incompatible with weight {weight.shape}")
    out = x.data @ weight.data
    inputs = (x, weight)
    if bias is not None:
        bias = _tensor(bias)
        if bias.shape != (weight.shape[1],):
            raise DimensionError(f"linear: bias {bias.shape} incompatible with weight {weight.shape}")
        out = out + bias.data
        inputs = (x, weight, bias)
    xd, wd = x.data, weight.data

    def vjp(g):
        gx = g @ wd.T
        gw = xd.reshape(-1, xd.shape[-1]).T @ g.reshape(-1, g.shape[-1])
        if len(inputs) == 3:
            return gx, gw, g.reshape(-1, g.shape[-1]).sum(axis=0)
        return gx, gw

    return _record("linear", out, inputs, vjp)


def matmul(x, weight) -> Tensor:
    return linear(x, weight)


def conv1d(x, kernel, bias, pad: int) -> Tensor:
    """Zero-padded, stride-1, full-window temporal convolution.

    ``x`` is ``(T, C_in)`` or ``(B, T, C_in)``; ``kernel`` is
    ``(K, C_in, C_out)``. Output length is ``T + 2*pad - K + 1``.
    """
    x, kernel, bias = _tensor(x), _tensor(kernel), _tensor(bias)
    if pad < 0:
        raise ValueError(f"conv1d: pad must be non-negative, got {pad}")
    squeeze = x.data.ndim == 2
    xd = x.data[None] if squeeze else x.data
    if xd.ndim != 3 or kernel.data.ndim != 3 or xd.shape[2] != kernel.shape[1]:
        raise DimensionError(f"conv1d: input {x.shape} incompatible with kernel {kernel.shape}")
    if bias.shape != (kernel.shape[2],):
        raise DimensionError(f"conv1d: bias {bias.shape} incompatible with kernel {kernel.shape}")
    K, T = kernel.shape[0], xd.shape[1]
    if K > T + 2 * pad:
        raise ValueError(f"conv1d: kernel size {K} exceeds padded length {T + 2 * pad}; empty output")
    xd = np.ascontiguousarray(xd)
    wd = kernel.data
    out = kernels.conv1d_forward(xd, wd, bias.data, pad)

    def vjp(g):
        g3 = np.ascontiguousarray(g[None] if squeeze else g)
        gx, gw, gb = kernels.conv1d_backward(xd, wd, g3, pad)
        return (gx[0] if squeeze else gx), gw, gb

    return _record("conv1d", out[0] if squeeze else out, (x, kernel, bias), vjp)


def relu(x) -> Tensor:
    x = _tensor(x)
    mask = x.data > 0
    return _record("relu", x.data * mask, (x,), lambda g: (g * mask,))


def sigmoid(x) -> Tensor:
    x = _tensor(x)
    d = x.data
    e = np.exp(-np.abs(d))
    out = np.where(d >= 0, 1.0 / (1.0 + e), e / (1.0 + e)).astype(d.dtype, copy=False)
    return _record("sigmoid", out, (x,), lambda g: (g * out * (1 - out),))


def tanh(x) -> Tensor:
    x = _tensor(x)
    out = np.tanh(x.data)
    return _record("tanh", out, (x,), lambda g: (g * (1 - out * out),))


def add(a, b) -> Tensor:
    a = _tensor(a)
    b = _tensor(b, like=a)
    sa, sb = a.shape, b.shape
    return _record("add", a.data + b.data, (a, b),
                   lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)))


def sub(a, b) -> Tensor:
    a = _tensor(a)
    b = _tensor(b, like=a)
    sa, sb = a.shape, b.shape
    return _record("sub", a.data - b.data, (a, b),
                   lambda g: (_unbroadcast(g, sa), -_unbroadcast(g, sb)))


def mul(a, b) -> Tensor:
    a = _tensor(a)
    b = _tensor(b, like=a)
    ad, bd = a.data, b.data
    return _record("mul", ad * bd, (a, b),
                   lambda g: (_unbroadcast(g * bd, ad.shape), _unbroadcast(g * ad, bd.shape)))


def mse_loss(pred, target) -> Tensor:
    """Mean of squared differences over all elements."""
    pred = _tensor(pred)
    target = _tensor(target, like=pred)
    if pred.shape != target.shape:
        raise DimensionError(f"mse_loss: pred {pred.shape} vs target {target.shape}")
    diff = pred.data - target.data
    n = diff.size
    out = np.asarray(np.sum(diff * diff) / n, dtype=pred.dtype)
    return _record("mse_loss", out, (pred, target),
                   lambda g: (g * 2.0 * diff / n, g * -2.0 * diff / n))


def reshape(x, shape) -> Tensor:
    x = _tensor(x)
    old = x.shape
    return _record("reshape", x.data.reshape(shape), (x,), lambda g: (g.reshape(old),))


def concat_flatten(x) -> Tensor:
    """Row-major flatten of the trailing ``(T, C)`` axes."""
    x = _tensor(x)
    if x.data.ndim <= 2:
        return reshape(x, (x.size,))
    return reshape(x, x.shape[:-2] + (x.shape[-2] * x.shape[-1],))


def take(x, index) -> Tensor:
    """Basic (slice/int) indexing with a scatter-back gradient."""
    x = _tensor(x)
    shape, dtype = x.shape, x.dtype

    def vjp(g):
        full = np.zeros(shape, dtype=dtype)
        full[index] = g
        return (full,)

    return _record("take", np.ascontiguousarray(x.data[index]), (x,), vjp)


def stack(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = tuple(_tensor(t) for t in tensors)
    out = np.stack([t.data for t in tensors], axis=axis)

    def vjp(g):
        return tuple(np.take(g, i, axis=axis) for i in range(len(tensors)))

    return _record("stack", out, tensors, vjp)
