"""A small reverse-mode gradient tape over numpy arrays.

Only the operations the models need are provided. Every op records its
inputs and a closure that pushes the output gradient back to them; ``backward``
walks the graph in reverse topological order.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

DTYPE = np.float64


class Tensor:
    __slots__ = ("value", "grad", "parents", "_back", "requires_grad")

    def __init__(self, value, parents: tuple = (), back=None, requires_grad: bool = False):
        self.value = np.asarray(value, dtype=DTYPE)
        self.grad: np.ndarray | None = None
        self.parents = parents
        self._back = back
        self.requires_grad = requires_grad or any(p.requires_grad for p in parents)

    @property
    def shape(self) -> tuple:
        return self.value.shape

    def _acc(self, g: np.ndarray) -> None:
        if not self.requires_grad:
            return
        self.grad = g if self.grad is None else self.grad + g

    def backward(self, grad: np.ndarray | None = None) -> None:
        order, seen = [], set()
        stack = [(self, False)]
        while stack:
            node, done = stack.pop()
            if done:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node.parents:
                if id(p) not in seen and p.requires_grad:
                    stack.append((p, False))
        self.grad = np.ones_like(self.value) if grad is None else grad
        for node in reversed(order):
            if node._back is not None and node.grad is not None:
                node._back(node.grad)

    # operator sugar
    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return add(self, scale(_as_tensor(other), -1.0))

    def __mul__(self, other):
        return mul(self, other)

    def __matmul__(self, other):
        return matmul(self, other)


def param(value) -> Tensor:
    return Tensor(value, requires_grad=True)


def const(value) -> Tensor:
    return Tensor(value)


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else const(x)


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out = Tensor(a.value + b.value, (a, b))

    def back(g):
        a._acc(_unbroadcast(g, a.shape))
        b._acc(_unbroadcast(g, b.shape))
    out._back = back
    return out


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out = Tensor(a.value * b.value, (a, b))

    def back(g):
        a._acc(_unbroadcast(g * b.value, a.shape))
        b._acc(_unbroadcast(g * a.value, b.shape))
    out._back = back
    return out


def scale(a: Tensor, c: float) -> Tensor:
    out = Tensor(a.value * c, (a,))
    out._back = lambda g: a._acc(g * c)
    return out


def matmul(a, b) -> Tensor:
    """np.matmul semantics, including batched operands."""
    a, b = _as_tensor(a), _as_tensor(b)
    out = Tensor(np.matmul(a.value, b.value), (a, b))

    def back(g):
        if a.requires_grad:
            ga = np.matmul(g, np.swapaxes(b.value, -1, -2)) if b.value.ndim > 1 else np.multiply.outer(g, b.value)
            a._acc(_unbroadcast(ga, a.shape))
        if b.requires_grad:
            gb = np.matmul(np.swapaxes(a.value, -1, -2), g) if a.value.ndim > 1 else np.multiply.outer(a.value, g)
            b._acc(_unbroadcast(gb, b.shape))
    out._back = back
    return out


def spmm(m: sp.spmatrix, x: Tensor) -> Tensor:
    """Constant sparse matrix times a dense tensor."""
    m = sp.csr_matrix(m)
    out = Tensor(m @ x.value, (x,))
    mt = m.T.tocsr()
    out._back = lambda g: x._acc(mt @ g)
    return out


def relu(x: Tensor) -> Tensor:
    mask = x.value > 0
    out = Tensor(x.value * mask, (x,))
    out._back = lambda g: x._acc(g * mask)
    return out


def tanh(x: Tensor) -> Tensor:
    y = np.tanh(x.value)
    out = Tensor(y, (x,))
    out._back = lambda g: x._acc(g * (1.0 - y * y))
    return out


def softmax(x: Tensor, axis: int = -1, mask: np.ndarray | None = None) -> Tensor:
    """Softmax along ``axis``; ``mask`` (broadcastable, True = keep) zeroes excluded entries."""
    y = x.value + np.where(mask, 0.0, -np.inf) if mask is not None else x.value.copy()
    y -= y.max(axis=axis, keepdims=True)
    np.exp(y, out=y)
    y /= y.sum(axis=axis, keepdims=True)
    out = Tensor(y, (x,))

    def back(g):
        gx = g * y
        gx -= y * gx.sum(axis=axis, keepdims=True)
        x._acc(gx)
    out._back = back
    return out


def reshape(x: Tensor, shape: tuple) -> Tensor:
    old = x.shape
    out = Tensor(x.value.reshape(shape), (x,))
    out._back = lambda g: x._acc(g.reshape(old))
    return out


def transpose(x: Tensor, axes: tuple) -> Tensor:
    inv = tuple(np.argsort(axes))
    out = Tensor(np.transpose(x.value, axes), (x,))
    out._back = lambda g: x._acc(np.transpose(g, inv))
    return out


def gather_rows(table: Tensor, idx: np.ndarray) -> Tensor:
    """Embedding lookup: ``table[idx]`` for an integer index array of any shape."""
    out = Tensor(table.value[idx], (table,))

    def back(g):
        gt = np.zeros_like(table.value)
        np.add.at(gt, idx.reshape(-1), g.reshape(-1, table.shape[-1]))
        table._acc(gt)
    out._back = back
    return out


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    mu = x.value.mean(axis=-1, keepdims=True)
    xc = x.value - mu
    inv = 1.0 / np.sqrt((xc * xc).mean(axis=-1, keepdims=True) + eps)
    xhat = xc * inv
    out = Tensor(xhat * gain.value + bias.value, (x, gain, bias))

    def back(g):
        gain._acc(_unbroadcast(g * xhat, gain.shape))
        bias._acc(_unbroadcast(g, bias.shape))
        gx = g * gain.value
        n = x.shape[-1]
        x._acc(inv / n * (n * gx - gx.sum(axis=-1, keepdims=True)
                          - xhat * (gx * xhat).sum(axis=-1, keepdims=True)))
    out._back = back
    return out


def concat(parts: list[Tensor], axis: int = -1) -> Tensor:
    sizes = [p.shape[axis] for p in parts]
    out = Tensor(np.concatenate([p.value for p in parts], axis=axis), tuple(parts))

    def back(g):
        for p, piece in zip(parts, np.split(g, np.cumsum(sizes)[:-1], axis=axis)):
            p._acc(piece)
    out._back = back
    return out


def weighted_sum(x: Tensor, w: np.ndarray, axis: int) -> Tensor:
    """Sum of ``x * w`` along ``axis`` with a constant weight (used for masked means)."""
    out = Tensor((x.value * w).sum(axis=axis), (x,))
    out._back = lambda g: x._acc(np.expand_dims(g, axis) * w)
    return out


def segment_softmax(x: Tensor, seg: np.ndarray, nseg: int) -> Tensor:
    """Softmax of a column vector within contiguous or scattered segments."""
    v = x.value[:, 0]
    mx = np.full(nseg, -np.inf)
    np.maximum.at(mx, seg, v)
    e = np.exp(v - mx[seg])
    tot = np.bincount(seg, weights=e, minlength=nseg)
    y = (e / tot[seg])[:, None]
    out = Tensor(y, (x,))

    def back(g):
        s = np.bincount(seg, weights=(g * y)[:, 0], minlength=nseg)
        x._acc(y * (g - s[seg][:, None]))
    out._back = back
    return out


def segment_max(x: Tensor, seg: np.ndarray, nseg: int) -> Tensor:
    """Row-wise max over the rows of each segment; ties send gradient to the first row."""
    rows = np.empty((nseg, x.shape[1]), dtype=np.int64)
    for s in range(nseg):
        members = np.flatnonzero(seg == s)
        rows[s] = members[np.argmax(x.value[members], axis=0)]
    cols = np.arange(x.shape[1])
    out = Tensor(x.value[rows, cols], (x,))

    def back(g):
        gx = np.zeros_like(x.value)
        np.add.at(gx, (rows, np.broadcast_to(cols, rows.shape)), g)
        x._acc(gx)
    out._back = back
    return out


def cross_entropy(logits: Tensor, targets: np.ndarray, weights: np.ndarray | None = None) -> Tensor:
    """Weighted mean negative log-likelihood of integer targets; weights are per class."""
    z = logits.value - logits.value.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    n = len(targets)
    w = np.ones(n) if weights is None else weights[targets]
    total = w.sum()
    out = Tensor(-(w * logp[np.arange(n), targets]).sum() / total, (logits,))

    def back(g):
        p = np.exp(logp)
        p[np.arange(n), targets] -= 1.0
        logits._acc(g * p * (w / total)[:, None])
    out._back = back
    return out


def softmax_np(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)
