"""Minimal dense-tensor reverse-mode differentiation on numpy arrays.

Just enough surface for the graph encoder and pointer decoder: elementwise
arithmetic, matmul, activations, row gather/scatter, per-head reductions and
a masked log-softmax. Everything runs in float64 with a fixed summation
order, so runs are reproducible and finite-difference checks are tight.
"""

from __future__ import annotations

import numpy as np


def _unbroadcast(grad: np.ndarray, shape) -> np.ndarray:
    if grad.shape == tuple(shape):
        return grad
    g = grad
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g.reshape(shape)


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_bwd", "name")

    def __init__(self, data, requires_grad=False, parents=(), bwd=None, name=""):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad or any(p.requires_grad for p in parents)
        self._parents = parents
        self._bwd = bwd
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    def item(self) -> float:
        return float(self.data)

    def _accumulate(self, grad: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += grad

    def backward(self, grad=None) -> None:
        if grad is None:
            grad = np.ones_like(self.data)
        topo: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in seen or not node.requires_grad:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                stack.append((p, False))
        self._accumulate(np.asarray(grad, dtype=np.float64))
        for node in reversed(topo):
            if node._bwd is not None and node.grad is not None:
                node._bwd(node.grad)

    # operators delegate to the module-level ops
    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __matmul__(self, other):
        return matmul(self, other)

    def __neg__(self):
        return scale(self, -1.0)


def _wrap(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float64))


def add(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    out = Tensor(a.data + b.data, parents=(a, b))

    def bwd(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g, b.shape))

    out._bwd = bwd
    return out


def sub(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    out = Tensor(a.data - b.data, parents=(a, b))

    def bwd(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(-g, b.shape))

    out._bwd = bwd
    return out


def mul(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    out = Tensor(a.data * b.data, parents=(a, b))

    def bwd(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g * b.data, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g * a.data, b.shape))

    out._bwd = bwd
    return out


def div(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    out = Tensor(a.data / b.data, parents=(a, b))

    def bwd(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g / b.data, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(-g * a.data / (b.data * b.data), b.shape))

    out._bwd = bwd
    return out


def scale(a, k: float) -> Tensor:
    a = _wrap(a)
    out = Tensor(a.data * k, parents=(a,))
    out._bwd = lambda g: a._accumulate(g * k) if a.requires_grad else None
    return out


def matmul(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    out = Tensor(a.data @ b.data, parents=(a, b))

    def bwd(g):
        if a.requires_grad:
            a._accumulate(g @ b.data.T)
        if b.requires_grad:
            b._accumulate(a.data.T @ g)

    out._bwd = bwd
    return out


def tanh(a) -> Tensor:
    a = _wrap(a)
    y = np.tanh(a.data)
    out = Tensor(y, parents=(a,))
    out._bwd = lambda g: a._accumulate(g * (1.0 - y * y)) if a.requires_grad else None
    return out


def sigmoid(a) -> Tensor:
    a = _wrap(a)
    y = 1.0 / (1.0 + np.exp(-a.data))
    out = Tensor(y, parents=(a,))
    out._bwd = lambda g: a._accumulate(g * y * (1.0 - y)) if a.requires_grad else None
    return out


def leaky_relu(a, slope: float = 0.2) -> Tensor:
    a = _wrap(a)
    mask = np.where(a.data > 0, 1.0, slope)
    out = Tensor(a.data * mask, parents=(a,))
    out._bwd = lambda g: a._accumulate(g * mask) if a.requires_grad else None
    return out


def exp(a) -> Tensor:
    a = _wrap(a)
    y = np.exp(a.data)
    out = Tensor(y, parents=(a,))
    out._bwd = lambda g: a._accumulate(g * y) if a.requires_grad else None
    return out


def log(a) -> Tensor:
    a = _wrap(a)
    out = Tensor(np.log(a.data), parents=(a,))
    out._bwd = lambda g: a._accumulate(g / a.data) if a.requires_grad else None
    return out


def tsum(a) -> Tensor:
    a = _wrap(a)
    out = Tensor(a.data.sum(), parents=(a,))
    out._bwd = (
        lambda g: a._accumulate(np.full_like(a.data, float(g)))
        if a.requires_grad
        else None
    )
    return out


def gather_rows(a, idx) -> Tensor:
    a = _wrap(a)
    idx = np.asarray(idx, dtype=np.int64)
    out = Tensor(a.data[idx], parents=(a,))

    def bwd(g):
        if a.requires_grad:
            acc = np.zeros_like(a.data)
            np.add.at(acc, idx, g)
            a._accumulate(acc)

    out._bwd = bwd
    return out


def scatter_add_rows(a, idx, n_rows: int) -> Tensor:
    a = _wrap(a)
    idx = np.asarray(idx, dtype=np.int64)
    data = np.zeros((n_rows,) + a.data.shape[1:], dtype=np.float64)
    np.add.at(data, idx, a.data)
    out = Tensor(data, parents=(a,))
    out._bwd = lambda g: a._accumulate(g[idx]) if a.requires_grad else None
    return out


def slice_cols(a, start: int, stop: int) -> Tensor:
    a = _wrap(a)
    out = Tensor(a.data[:, start:stop], parents=(a,))

    def bwd(g):
        if a.requires_grad:
            acc = np.zeros_like(a.data)
            acc[:, start:stop] = g
            a._accumulate(acc)

    out._bwd = bwd
    return out


def concat_rows(tensors) -> Tensor:
    tensors = [_wrap(t) for t in tensors]
    out = Tensor(np.concatenate([t.data for t in tensors], axis=0), parents=tuple(tensors))
    sizes = [t.data.shape[0] for t in tensors]

    def bwd(g):
        off = 0
        for t, sz in zip(tensors, sizes):
            if t.requires_grad:
                t._accumulate(g[off : off + sz])
            off += sz

    out._bwd = bwd
    return out


def heads_dot(h, a, heads: int) -> Tensor:
    """Per-head inner product: (N, heads*d) x (heads, d) -> (N, heads)."""
    h, a = _wrap(h), _wrap(a)
    n = h.data.shape[0]
    d = a.data.shape[1]
    h3 = h.data.reshape(n, heads, d)
    out = Tensor(np.einsum("nhd,hd->nh", h3, a.data), parents=(h, a))

    def bwd(g):
        if h.requires_grad:
            h._accumulate((g[:, :, None] * a.data[None]).reshape(n, heads * d))
        if a.requires_grad:
            a._accumulate(np.einsum("nh,nhd->hd", g, h3))

    out._bwd = bwd
    return out


def heads_scale(h, s, heads: int) -> Tensor:
    """Scale each head block of (E, heads*d) by the matching (E, heads) column."""
    h, s = _wrap(h), _wrap(s)
    e = h.data.shape[0]
    d = h.data.shape[1] // heads
    h3 = h.data.reshape(e, heads, d)
    out = Tensor((h3 * s.data[:, :, None]).reshape(e, heads * d), parents=(h, s))

    def bwd(g):
        g3 = g.reshape(e, heads, d)
        if h.requires_grad:
            h._accumulate((g3 * s.data[:, :, None]).reshape(e, heads * d))
        if s.requires_grad:
            s._accumulate(np.einsum("ehd,ehd->eh", g3, h3))

    out._bwd = bwd
    return out


def log_softmax_vec(a, mask_add=None) -> Tensor:
    """Log-softmax over a 1-D tensor; mask_add is a constant additive bias."""
    a = _wrap(a)
    x = a.data if mask_add is None else a.data + mask_add
    m = x.max()
    z = x - m
    lse = np.log(np.exp(z).sum())
    y = z - lse
    out = Tensor(y, parents=(a,))
    p = np.exp(y)
    out._bwd = (
        lambda g: a._accumulate(g - p * g.sum()) if a.requires_grad else None
    )
    return out


def flatten(a) -> Tensor:
    a = _wrap(a)
    out = Tensor(a.data.reshape(-1), parents=(a,))
    out._bwd = (
        lambda g: a._accumulate(g.reshape(a.data.shape)) if a.requires_grad else None
    )
    return out


def take(a, i: int) -> Tensor:
    """Scalar pick from a 1-D tensor."""
    a = _wrap(a)
    out = Tensor(a.data[i], parents=(a,))

    def bwd(g):
        if a.requires_grad:
            acc = np.zeros_like(a.data)
            acc[i] = g
            a._accumulate(acc)

    out._bwd = bwd
    return out


class Adam:
    """Deterministic Adam over an ordered parameter dict."""

    def __init__(self, params: dict[str, Tensor], lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self.m = {k: np.zeros_like(p.data) for k, p in params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in params.items()}

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad = None

    def step(self) -> None:
        self.step_count += 1
        b1c = 1.0 - self.beta1**self.step_count
        b2c = 1.0 - self.beta2**self.step_count
        for k, p in self.params.items():
            if p.grad is None:
                continue
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * p.grad
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * (p.grad * p.grad)
            m_hat = self.m[k] / b1c
            v_hat = self.v[k] / b2c
            p.data -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)
