"""Minimal reverse-mode automatic differentiation on dense float64 arrays.

A :class:`Node` wraps a numpy array together with references to its parent
nodes and the local backward rule. Calling :func:`backward` on a scalar-valued
node runs one reverse topological sweep and accumulates ``grad`` on every node
that requires gradients. The op set is deliberately small: 2-D batched
arithmetic, matmul, the elementwise nonlinearities used by the conditioner
networks, reductions, and a few structural ops (concat, gather, column
permutation) needed by invertible layers.

Everything is computed in float64. Graphs are single-use: build, run backward
once, discard.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

Array = np.ndarray


def _as_array(x) -> Array:
    return np.asarray(x, dtype=np.float64)


class Node:
    """One vertex of a computation graph.

    ``value`` and ``grad`` always share a shape. Leaf nodes created with
    ``requires_grad=True`` are the trainable parameters; constants keep
    ``requires_grad=False`` and stop the backward sweep.
    """

    __slots__ = ("value", "grad", "parents", "_backward", "requires_grad")

    def __init__(
        self,
        value,
        parents: Sequence["Node"] = (),
        backward: Callable[[Array], None] | None = None,
        requires_grad: bool | None = None,
    ):
        self.value = _as_array(value)
        self.grad: Array | None = None
        self.parents = tuple(parents)
        self._backward = backward
        if requires_grad is None:
            requires_grad = any(p.requires_grad for p in self.parents)
        self.requires_grad = requires_grad

    @property
    def shape(self):
        return self.value.shape

    def __repr__(self):
        return f"Node(shape={self.value.shape}, requires_grad={self.requires_grad})"

    # operator sugar
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
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, key):
        return getitem(self, key)


def parameter(value) -> Node:
    return Node(value, requires_grad=True)


def constant(value) -> Node:
    return Node(value, requires_grad=False)


def _wrap(x) -> Node:
    return x if isinstance(x, Node) else constant(x)


def _unbroadcast(grad: Array, shape: tuple[int, ...]) -> Array:
    """Sum ``grad`` down to ``shape`` undoing numpy broadcasting."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _accum(node: Node, g: Array) -> None:
    if not node.requires_grad:
        return
    g = _unbroadcast(_as_array(g), node.value.shape)
    if node.grad is None:
        node.grad = np.zeros_like(node.value)
    node.grad += g


# ---------------------------------------------------------------------------
# arithmetic


def add(a, b) -> Node:
    a, b = _wrap(a), _wrap(b)
    out_val = a.value + b.value

    def bw(g):
        _accum(a, g)
        _accum(b, g)

    return Node(out_val, (a, b), bw)


def sub(a, b) -> Node:
    a, b = _wrap(a), _wrap(b)
    out_val = a.value - b.value

    def bw(g):
        _accum(a, g)
        _accum(b, -g)

    return Node(out_val, (a, b), bw)


def mul(a, b) -> Node:
    a, b = _wrap(a), _wrap(b)
    out_val = a.value * b.value

    def bw(g):
        _accum(a, g * b.value)
        _accum(b, g * a.value)

    return Node(out_val, (a, b), bw)


def div(a, b) -> Node:
    a, b = _wrap(a), _wrap(b)
    out_val = a.value / b.value

    def bw(g):
        _accum(a, g / b.value)
        _accum(b, -g * out_val / b.value)

    return Node(out_val, (a, b), bw)


def neg(a) -> Node:
    a = _wrap(a)

    def bw(g):
        _accum(a, -g)

    return Node(-a.value, (a,), bw)


def matmul(a, b) -> Node:
    a, b = _wrap(a), _wrap(b)
    out_val = a.value @ b.value

    def bw(g):
        _accum(a, g @ b.value.T)
        _accum(b, a.value.T @ g)

    return Node(out_val, (a, b), bw)


# ---------------------------------------------------------------------------
# elementwise nonlinearities


def exp(a) -> Node:
    a = _wrap(a)
    out_val = np.exp(a.value)

    def bw(g):
        _accum(a, g * out_val)

    return Node(out_val, (a,), bw)


def log(a) -> Node:
    a = _wrap(a)

    def bw(g):
        _accum(a, g / a.value)

    return Node(np.log(a.value), (a,), bw)


def sqrt(a) -> Node:
    a = _wrap(a)
    out_val = np.sqrt(a.value)

    def bw(g):
        _accum(a, g * 0.5 / out_val)

    return Node(out_val, (a,), bw)


def square(a) -> Node:
    a = _wrap(a)

    def bw(g):
        _accum(a, g * 2.0 * a.value)

    return Node(a.value * a.value, (a,), bw)


def tanh(a) -> Node:
    a = _wrap(a)
    out_val = np.tanh(a.value)

    def bw(g):
        _accum(a, g * (1.0 - out_val * out_val))

    return Node(out_val, (a,), bw)


def relu(a) -> Node:
    # subgradient at 0 is taken as 0
    a = _wrap(a)
    mask = a.value > 0.0

    def bw(g):
        _accum(a, g * mask)

    return Node(np.where(mask, a.value, 0.0), (a,), bw)


def softplus(a) -> Node:
    a = _wrap(a)
    z = a.value
    out_val = np.logaddexp(0.0, z)

    def bw(g):
        _accum(a, g / (1.0 + np.exp(-z)))

    return Node(out_val, (a,), bw)


def softmax(a) -> Node:
    """Softmax over the last axis."""
    a = _wrap(a)
    shifted = a.value - a.value.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    out_val = e / e.sum(axis=-1, keepdims=True)

    def bw(g):
        inner = (g * out_val).sum(axis=-1, keepdims=True)
        _accum(a, out_val * (g - inner))

    return Node(out_val, (a,), bw)


def clip(a, lo: float, hi: float) -> Node:
    """Clamp values; gradient is identity inside [lo, hi], zero outside."""
    a = _wrap(a)
    mask = (a.value >= lo) & (a.value <= hi)

    def bw(g):
        _accum(a, g * mask)

    return Node(np.clip(a.value, lo, hi), (a,), bw)


# ---------------------------------------------------------------------------
# reductions


def nsum(a, axis=None) -> Node:
    a = _wrap(a)
    out_val = a.value.sum(axis=axis)

    def bw(g):
        if axis is None:
            _accum(a, np.broadcast_to(g, a.value.shape))
        else:
            _accum(a, np.broadcast_to(np.expand_dims(g, axis), a.value.shape))

    return Node(out_val, (a,), bw)


def nmean(a, axis=None) -> Node:
    a = _wrap(a)
    count = a.value.size if axis is None else a.value.shape[axis]
    return nsum(a, axis=axis) * (1.0 / count)


def cumsum(a) -> Node:
    """Cumulative sum along the last axis."""
    a = _wrap(a)

    def bw(g):
        _accum(a, np.flip(np.cumsum(np.flip(g, axis=-1), axis=-1), axis=-1))

    return Node(np.cumsum(a.value, axis=-1), (a,), bw)


# ---------------------------------------------------------------------------
# structural ops


def getitem(a, key) -> Node:
    a = _wrap(a)
    out_val = a.value[key]

    def bw(g):
        if a.requires_grad:
            buf = np.zeros_like(a.value)
            np.add.at(buf, key, g)
            _accum(a, buf)

    return Node(out_val, (a,), bw)


def reshape(a, shape) -> Node:
    a = _wrap(a)

    def bw(g):
        _accum(a, g.reshape(a.value.shape))

    return Node(a.value.reshape(shape), (a,), bw)


def concat(nodes: Sequence, axis: int = -1) -> Node:
    nodes = [_wrap(n) for n in nodes]
    out_val = np.concatenate([n.value for n in nodes], axis=axis)
    sizes = [n.value.shape[axis] for n in nodes]
    offsets = np.cumsum([0, *sizes])

    def bw(g):
        for n, lo, hi in zip(nodes, offsets[:-1], offsets[1:]):
            _accum(n, np.take(g, range(lo, hi), axis=axis))

    return Node(out_val, tuple(nodes), bw)


def take_last(a, idx: Array) -> Node:
    """Gather along the last axis: out[..., ] = a[..., idx[...]].

    ``idx`` has the leading shape of ``a`` (one index per row); the result
    drops the last axis. Indices are data-dependent constants, so no gradient
    flows through them.
    """
    a = _wrap(a)
    idx = np.asarray(idx)
    out_val = np.take_along_axis(a.value, idx[..., None], axis=-1)[..., 0]

    def bw(g):
        if a.requires_grad:
            buf = np.zeros_like(a.value)
            np.add.at(buf.reshape(-1, a.value.shape[-1]),
                      (np.arange(idx.size), idx.reshape(-1)),
                      g.reshape(-1))
            _accum(a, buf)

    return Node(out_val, (a,), bw)


def where(cond: Array, a, b) -> Node:
    """Select elementwise by a constant boolean mask."""
    a, b = _wrap(a), _wrap(b)
    cond = np.asarray(cond, dtype=bool)

    def bw(g):
        _accum(a, np.where(cond, g, 0.0))
        _accum(b, np.where(cond, 0.0, g))

    return Node(np.where(cond, a.value, b.value), (a, b), bw)


def permute_cols(a, perm: Array) -> Node:
    """Reorder the columns of a 2-D node; the Jacobian is a permutation."""
    a = _wrap(a)
    perm = np.asarray(perm)
    inv = np.empty_like(perm)
    inv[perm] = np.arange(perm.size)

    def bw(g):
        _accum(a, g[:, inv])

    return Node(a.value[:, perm], (a,), bw)


# ---------------------------------------------------------------------------
# backward sweep


def topo_order(root: Node) -> list[Node]:
    """Reverse-postorder of the subgraph that requires gradients."""
    order: list[Node] = []
    seen: set[int] = set()
    stack: list[tuple[Node, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen or not node.requires_grad:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            stack.append((p, False))
    return order


def backward(root: Node) -> None:
    """Accumulate gradients of a scalar ``root`` into every reachable node."""
    if root.value.size != 1:
        raise ValueError(f"backward requires a scalar root, got shape {root.value.shape}")
    order = topo_order(root)
    root.grad = np.ones_like(root.value)
    for node in reversed(order):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)


def zero_grad(params: Sequence[Node]) -> None:
    for p in params:
        p.grad = None
