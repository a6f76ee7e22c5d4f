"""Reverse-mode differentiation over float64 numpy arrays.

Every primitive evaluates eagerly and records a closure that pushes the
output adjoint back to its parents.  ``backward`` walks ancestors in
reverse creation order, which is a valid reverse topological order because
a node can only be created after its parents.
"""

from __future__ import annotations

import itertools
import math
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

__all__ = [
    "Node", "const", "var", "backward",
    "add", "sub", "mul", "div", "neg", "matmul", "scale", "sum", "mean",
    "log2", "square", "ramp", "relu", "sigmoid", "tanh", "reshape", "concat",
    "slice", "transpose",
]

_ids = itertools.count()
_LN2 = math.log(2.0)


class Node:
    __slots__ = ("value", "grad", "parents", "op", "requires_grad", "_backward", "uid")

    def __init__(self, value, parents: Sequence["Node"] = (), op: str = "leaf",
                 backward: Optional[Callable[[np.ndarray], None]] = None,
                 requires_grad: bool = False):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad: Optional[np.ndarray] = None
        self.parents = tuple(parents)
        self.op = op
        self.requires_grad = requires_grad or any(p.requires_grad for p in self.parents)
        self._backward = backward if self.requires_grad else None
        self.uid = next(_ids)

    @property
    def shape(self):
        return self.value.shape

    @property
    def ndim(self):
        return self.value.ndim

    def __repr__(self):
        return f"Node(op={self.op!r}, shape={self.value.shape})"

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, idx):
        return slice(self, idx)


def const(x) -> Node:
    return x if isinstance(x, Node) else Node(x)


def var(x) -> Node:
    """Leaf that collects an adjoint."""
    return Node(x, requires_grad=True)


def _acc(node: Node, g: np.ndarray) -> None:
    if not node.requires_grad:
        return
    if node.grad is None:
        node.grad = np.array(g, dtype=np.float64, copy=True)
    else:
        node.grad += g


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    if g.shape == tuple(shape):
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def _check_broadcast(op: str, a: Node, b: Node):
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ValueError(f"{op}: incompatible shapes {a.shape} and {b.shape}") from None


def add(a, b) -> Node:
    a, b = const(a), const(b)
    _check_broadcast("add", a, b)

    def bw(g):
        _acc(a, _unbroadcast(g, a.shape))
        _acc(b, _unbroadcast(g, b.shape))
    return Node(a.value + b.value, (a, b), "add", bw)


def sub(a, b) -> Node:
    a, b = const(a), const(b)
    _check_broadcast("sub", a, b)

    def bw(g):
        _acc(a, _unbroadcast(g, a.shape))
        _acc(b, _unbroadcast(-g, b.shape))
    return Node(a.value - b.value, (a, b), "sub", bw)


def mul(a, b) -> Node:
    a, b = const(a), const(b)
    _check_broadcast("mul", a, b)

    def bw(g):
        if a.requires_grad:
            _acc(a, _unbroadcast(g * b.value, a.shape))
        if b.requires_grad:
            _acc(b, _unbroadcast(g * a.value, b.shape))
    return Node(a.value * b.value, (a, b), "mul", bw)


def div(a, b) -> Node:
    a, b = const(a), const(b)
    _check_broadcast("div", a, b)
    out = a.value / b.value

    def bw(g):
        if a.requires_grad:
            _acc(a, _unbroadcast(g / b.value, a.shape))
        if b.requires_grad:
            _acc(b, _unbroadcast(-g * out / b.value, b.shape))
    return Node(out, (a, b), "div", bw)


def neg(a) -> Node:
    a = const(a)
    return Node(-a.value, (a,), "neg", lambda g: _acc(a, -g))


def scale(a, c: float) -> Node:
    a = const(a)
    c = float(c)
    return Node(a.value * c, (a,), "scale", lambda g: _acc(a, g * c))


def matmul(a, b) -> Node:
    """``np.matmul`` semantics, including batched stacks; 1-D operands are not supported."""
    a, b = const(a), const(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ValueError(f"matmul: incompatible shapes {a.shape} and {b.shape}")
    try:
        np.broadcast_shapes(a.shape[:-2], b.shape[:-2])
    except ValueError:
        raise ValueError(f"matmul: incompatible shapes {a.shape} and {b.shape}") from None

    def bw(g):
        if a.requires_grad:
            _acc(a, _unbroadcast(g @ np.swapaxes(b.value, -1, -2), a.shape))
        if b.requires_grad:
            _acc(b, _unbroadcast(np.swapaxes(a.value, -1, -2) @ g, b.shape))
    return Node(a.value @ b.value, (a, b), "matmul", bw)


def sum(a, axis=None, keepdims: bool = False) -> Node:  # noqa: A001 - mirrors numpy
    a = const(a)
    out = a.value.sum(axis=axis, keepdims=keepdims)

    def bw(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        _acc(a, np.broadcast_to(g, a.shape))
    return Node(out, (a,), "sum", bw)


def mean(a, axis=None, keepdims: bool = False) -> Node:
    a = const(a)
    if axis is None:
        n = a.value.size
    else:
        axes = (axis,) if np.isscalar(axis) else tuple(axis)
        n = int(np.prod([a.shape[ax] for ax in axes]))
    return scale(sum(a, axis, keepdims), 1.0 / n)


def log2(a) -> Node:
    a = const(a)
    return Node(np.log2(a.value), (a,), "log2", lambda g: _acc(a, g / (a.value * _LN2)))


def square(a) -> Node:
    a = const(a)
    return Node(a.value * a.value, (a,), "square", lambda g: _acc(a, 2.0 * g * a.value))


def ramp(a) -> Node:
    """``max(0, x)``; the subgradient at 0 is 0."""
    a = const(a)
    mask = a.value > 0
    return Node(np.where(mask, a.value, 0.0), (a,), "ramp", lambda g: _acc(a, g * mask))


def relu(a) -> Node:
    n = ramp(a)
    n.op = "relu"
    return n


def sigmoid(a) -> Node:
    a = const(a)
    s = 0.5 * (1.0 + np.tanh(0.5 * a.value))
    return Node(s, (a,), "sigmoid", lambda g: _acc(a, g * s * (1.0 - s)))


def tanh(a) -> Node:
    a = const(a)
    t = np.tanh(a.value)
    return Node(t, (a,), "tanh", lambda g: _acc(a, g * (1.0 - t * t)))


def reshape(a, shape) -> Node:
    a = const(a)
    try:
        out = a.value.reshape(shape)
    except ValueError:
        raise ValueError(f"reshape: cannot reshape {a.shape} into {tuple(shape)}") from None
    return Node(out, (a,), "reshape", lambda g: _acc(a, g.reshape(a.shape)))


def transpose(a, axes=None) -> Node:
    a = const(a)
    inv = None if axes is None else np.argsort(axes)
    return Node(np.transpose(a.value, axes), (a,), "transpose",
                lambda g: _acc(a, np.transpose(g, inv)))


def concat(nodes: Iterable, axis: int = -1) -> Node:
    nodes = [const(n) for n in nodes]
    if not nodes:
        raise ValueError("concat: no inputs")
    ref = list(nodes[0].shape)
    ax = axis % len(ref)
    for n in nodes[1:]:
        s = list(n.shape)
        if len(s) != len(ref) or s[:ax] + s[ax + 1:] != ref[:ax] + ref[ax + 1:]:
            raise ValueError(f"concat: shapes {nodes[0].shape} and {n.shape} disagree off axis {axis}")
    sizes = [n.shape[ax] for n in nodes]
    cuts = np.cumsum(sizes)[:-1]

    def bw(g):
        for n, part in zip(nodes, np.split(g, cuts, axis=ax)):
            _acc(n, part)
    return Node(np.concatenate([n.value for n in nodes], axis=ax), nodes, "concat", bw)


def slice(a, idx) -> Node:  # noqa: A001
    a = const(a)
    out = a.value[idx]

    def bw(g):
        full = np.zeros(a.shape)
        np.add.at(full, idx, g)
        _acc(a, full)
    return Node(out, (a,), "slice", bw)


def _ancestors(root: Node) -> list:
    seen = {root.uid: root}
    stack = [root]
    while stack:
        n = stack.pop()
        for p in n.parents:
            if p.uid not in seen and p.requires_grad:
                seen[p.uid] = p
                stack.append(p)
    return sorted(seen.values(), key=lambda n: n.uid, reverse=True)


def backward(output: Node) -> None:
    """Fill ``.grad`` of every differentiable ancestor of a scalar ``output``."""
    if output.value.size != 1:
        raise ValueError(f"backward needs a scalar output, got shape {output.shape}")
    order = _ancestors(output)
    for n in order:
        n.grad = None
    output.grad = np.ones(output.shape)
    for n in order:
        if n._backward is not None and n.grad is not None:
            n._backward(n.grad)
