"""Minimal reverse-mode autodiff over numpy arrays.

A Tensor wraps a float64 ndarray plus an optional backward closure; calling
``backward()`` on a scalar walks the graph in reverse topological order and
accumulates gradients into every node with ``requires_grad``. Only the ops
the pose models need are provided.
"""

from __future__ import annotations

import numpy as np


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum grad over axes that were broadcast up from ``shape``."""
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


class Tensor:
    """numpy-backed value in the autodiff graph."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents: tuple[Tensor, ...] = ()
        self._backward = None

    # -- graph plumbing ----------------------------------------------------

    @staticmethod
    def _result(data, parents, backward) -> "Tensor":
        out = Tensor(data)
        if any(p.requires_grad for p in parents):
            out.requires_grad = True
            out._parents = parents
            out._backward = backward
        return out

    def backward(self):
        """Reverse-mode pass from this scalar; accumulates into .grad."""
        if self.data.size != 1:
            raise ValueError("backward() requires a scalar tensor")
        topo: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen and p.requires_grad:
                    stack.append((p, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward is None or node.grad is None:
                continue
            for parent, g in zip(node._parents, node._backward(node.grad)):
                if g is None or not parent.requires_grad:
                    continue
                parent.grad = g if parent.grad is None else parent.grad + g

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def item(self) -> float:
        return float(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    # -- arithmetic ---------------------------------------------------------

    def __add__(self, other):
        other = as_tensor(other)
        a, b = self, other
        return Tensor._result(
            a.data + b.data,
            (a, b),
            lambda g: (_unbroadcast(g, a.data.shape), _unbroadcast(g, b.data.shape)),
        )

    __radd__ = __add__

    def __neg__(self):
        return Tensor._result(-self.data, (self,), lambda g: (-g,))

    def __sub__(self, other):
        return self + (-as_tensor(other))

    def __rsub__(self, other):
        return as_tensor(other) + (-self)

    def __mul__(self, other):
        other = as_tensor(other)
        a, b = self, other
        return Tensor._result(
            a.data * b.data,
            (a, b),
            lambda g: (
                _unbroadcast(g * b.data, a.data.shape),
                _unbroadcast(g * a.data, b.data.shape),
            ),
        )

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = as_tensor(other)
        a, b = self, other
        return Tensor._result(
            a.data / b.data,
            (a, b),
            lambda g: (
                _unbroadcast(g / b.data, a.data.shape),
                _unbroadcast(-g * a.data / (b.data * b.data), b.data.shape),
            ),
        )

    def __pow__(self, n):
        if not isinstance(n, (int, float)):
            raise TypeError("only scalar exponents are supported")
        a = self
        return Tensor._result(
            a.data**n, (a,), lambda g: (g * n * a.data ** (n - 1),)
        )

    def __matmul__(self, other):
        other = as_tensor(other)
        a, b = self, other
        if a.ndim < 2 or b.ndim < 2:
            raise ValueError("matmul requires tensors with ndim >= 2")
        if a.data.shape[-1] != b.data.shape[-2]:
            raise ValueError(
                f"matmul shape mismatch: {a.data.shape} @ {b.data.shape}"
            )
        return Tensor._result(
            a.data @ b.data,
            (a, b),
            lambda g: (
                _unbroadcast(g @ b.data.swapaxes(-1, -2), a.data.shape),
                _unbroadcast(a.data.swapaxes(-1, -2) @ g, b.data.shape),
            ),
        )

    # -- shape ops ----------------------------------------------------------

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        a = self
        return Tensor._result(
            a.data.reshape(shape), (a,), lambda g: (g.reshape(a.data.shape),)
        )

    def swapaxes(self, ax1, ax2):
        a = self
        return Tensor._result(
            a.data.swapaxes(ax1, ax2), (a,), lambda g: (g.swapaxes(ax1, ax2),)
        )

    def __getitem__(self, idx):
        # Basic (non-repeating) indexing only: slices, ints, ellipsis.
        a = self

        def bw(g):
            z = np.zeros_like(a.data)
            z[idx] = z[idx] + g
            return (z,)

        return Tensor._result(a.data[idx], (a,), bw)

    # -- reductions ----------------------------------------------------------

    def sum(self, axis=None, keepdims=False):
        a = self

        def bw(g):
            if axis is None:
                return (np.broadcast_to(g, a.data.shape).copy(),)
            gk = g if keepdims else np.expand_dims(g, axis)
            return (np.broadcast_to(gk, a.data.shape).copy(),)

        return Tensor._result(a.data.sum(axis=axis, keepdims=keepdims), (a,), bw)

    def mean(self, axis=None, keepdims=False):
        count = self.data.size if axis is None else self.data.shape[axis]
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / count)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _unary(x, value, dvalue):
    """dvalue(out_data, in_data) -> local derivative."""
    x = as_tensor(x)
    out_data = value(x.data)
    return Tensor._result(out_data, (x,), lambda g: (g * dvalue(out_data, x.data),))


def tanh(x):
    return _unary(x, np.tanh, lambda y, _: 1.0 - y * y)


def sigmoid(x):
    return _unary(x, _sigmoid_np, lambda y, _: y * (1.0 - y))


def relu(x):
    return _unary(x, lambda v: np.maximum(v, 0.0), lambda _, v: (v > 0).astype(np.float64))


def exp(x):
    return _unary(x, np.exp, lambda y, _: y)


def log(x):
    return _unary(x, np.log, lambda _, v: 1.0 / v)


def sqrt(x):
    return _unary(x, np.sqrt, lambda y, _: 0.5 / y)


def sin(x):
    return _unary(x, np.sin, lambda _, v: np.cos(v))


def _sigmoid_np(v):
    out = np.empty_like(v)
    pos = v >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-v[pos]))
    ev = np.exp(v[~pos])
    out[~pos] = ev / (1.0 + ev)
    return out


def concat(tensors, axis=-1):
    tensors = [as_tensor(t) for t in tensors]
    shapes = [t.data.shape for t in tensors]
    ax = axis if axis >= 0 else axis + len(shapes[0])
    splits = np.cumsum([s[ax] for s in shapes])[:-1]

    def bw(g):
        return tuple(np.split(g, splits, axis=ax))

    return Tensor._result(
        np.concatenate([t.data for t in tensors], axis=ax), tuple(tensors), bw
    )


def stack(tensors, axis=0):
    tensors = [as_tensor(t) for t in tensors]

    def bw(g):
        return tuple(np.take(g, i, axis=axis) for i in range(len(tensors)))

    return Tensor._result(np.stack([t.data for t in tensors], axis=axis), tuple(tensors), bw)


class Parameter(Tensor):
    """Named trainable tensor."""

    __slots__ = ("name",)

    def __init__(self, data, name: str):
        super().__init__(data, requires_grad=True)
        self.name = name

    def __repr__(self):
        return f"Parameter({self.name!r}, shape={self.data.shape})"


def zero_grads(params) -> None:
    values = params.values() if isinstance(params, dict) else params
    for p in values:
        p.grad = None
