"""Minimal reverse-mode autodiff over numpy arrays.

Only the operations the model stack needs: dense/sparse matmul, broadcast
add/mul, tanh, relu, reductions, softmax over a vector, row gather, a
weighted sum of matrices, and cross entropy from logits. Each op records a
backward closure; Tensor.backward runs them in reverse topological order.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp


class Tensor:
    __slots__ = ("values", "grad", "requires_grad", "_parents", "_backward", "name")

    def __init__(self, values, requires_grad=False, _parents=(), _backward=None, name=""):
        self.values = np.asarray(values, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = _parents
        self._backward = _backward
        self.name = name

    @property
    def shape(self):
        return self.values.shape

    def zero_grad(self):
        self.grad = None

    def _accumulate(self, g):
        if self.grad is None:
            self.grad = np.zeros_like(self.values)
        self.grad += g

    def backward(self):
        if self.values.size != 1:
            raise ValueError("backward() needs a scalar output")
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
                if id(p) not in seen:
                    stack.append((p, False))
        self.grad = np.ones_like(self.values)
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    def __repr__(self):
        return f"Tensor(shape={self.values.shape}, requires_grad={self.requires_grad})"


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)

def _needs(*ts: Tensor) -> bool:
    return any(t.requires_grad for t in ts)


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum out axes that numpy broadcasting added or stretched."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out = Tensor(a.values + b.values, _needs(a, b), (a, b))

    def backward(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g, a.values.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g, b.values.shape))

    out._backward = backward
    return out


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out = Tensor(a.values * b.values, _needs(a, b), (a, b))

    def backward(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g * b.values, a.values.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g * a.values, b.values.shape))

    out._backward = backward
    return out


def matmul(a: Tensor, b: Tensor) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out = Tensor(a.values @ b.values, _needs(a, b), (a, b))

    def backward(g):
        if b.values.ndim == 1:
            # (n,k) @ (k,) -> (n,)
            if a.requires_grad:
                a._accumulate(np.outer(g, b.values))
            if b.requires_grad:
                b._accumulate(a.values.T @ g)
        else:
            if a.requires_grad:
                a._accumulate(g @ b.values.T)
            if b.requires_grad:
                b._accumulate(a.values.T @ g)

    out._backward = backward
    return out


def spmm(matrix: sp.csr_array, x: Tensor) -> Tensor:
    """Constant sparse matrix times dense tensor."""
    x = _as_tensor(x)
    out = Tensor(matrix @ x.values, x.requires_grad, (x,))

    def backward(g):
        if x.requires_grad:
            x._accumulate(matrix.T @ g)

    out._backward = backward
    return out


def tanh(t: Tensor) -> Tensor:
    t = _as_tensor(t)
    y = np.tanh(t.values)
    out = Tensor(y, t.requires_grad, (t,))

    def backward(g):
        if t.requires_grad:
            t._accumulate(g * (1.0 - y * y))

    out._backward = backward
    return out


def relu(t: Tensor) -> Tensor:
    t = _as_tensor(t)
    out = Tensor(np.maximum(t.values, 0.0), t.requires_grad, (t,))

    def backward(g):
        if t.requires_grad:
            t._accumulate(g * (t.values > 0))

    out._backward = backward
    return out


def mean(t: Tensor) -> Tensor:
    t = _as_tensor(t)
    out = Tensor(t.values.mean(), t.requires_grad, (t,))

    def backward(g):
        if t.requires_grad:
            t._accumulate(np.full_like(t.values, g / t.values.size))

    out._backward = backward
    return out


def stack_scalars(parts: list[Tensor]) -> Tensor:
    """Stack scalar tensors into a 1-D vector."""
    parts = [_as_tensor(p) for p in parts]
    out = Tensor(
        np.array([float(p.values) for p in parts]), _needs(*parts), tuple(parts)
    )

    def backward(g):
        for i, p in enumerate(parts):
            if p.requires_grad:
                p._accumulate(np.asarray(g[i]).reshape(p.values.shape))

    out._backward = backward
    return out


def softmax(t: Tensor) -> Tensor:
    """Softmax of a 1-D vector."""
    t = _as_tensor(t)
    shifted = t.values - t.values.max()
    e = np.exp(shifted)
    s = e / e.sum()
    out = Tensor(s, t.requires_grad, (t,))

    def backward(g):
        if t.requires_grad:
            t._accumulate(s * (g - np.dot(g, s)))

    out._backward = backward
    return out


def weighted_sum(mats: list[Tensor], weights: Tensor) -> Tensor:
    """sum_i weights[i] * mats[i] for same-shape matrices."""
    mats = [_as_tensor(m) for m in mats]
    weights = _as_tensor(weights)
    if len(mats) != weights.values.shape[0]:
        raise ValueError("one weight per matrix required")
    value = sum(w * m.values for w, m in zip(weights.values, mats))
    out = Tensor(value, _needs(weights, *mats), (weights, *mats))

    def backward(g):
        for i, m in enumerate(mats):
            if m.requires_grad:
                m._accumulate(weights.values[i] * g)
        if weights.requires_grad:
            wg = np.array([(g * m.values).sum() for m in mats])
            weights._accumulate(wg)

    out._backward = backward
    return out


def gather_rows(t: Tensor, idx: np.ndarray) -> Tensor:
    t = _as_tensor(t)
    idx = np.asarray(idx, dtype=np.int64)
    out = Tensor(t.values[idx], t.requires_grad, (t,))

    def backward(g):
        if t.requires_grad:
            full = np.zeros_like(t.values)
            np.add.at(full, idx, g)
            t._accumulate(full)

    out._backward = backward
    return out


def dropout(t: Tensor, rate: float, rng: np.random.Generator) -> Tensor:
    """Zero a fraction `rate` of entries and rescale survivors by 1/(1-rate)."""
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    if rate == 0.0:
        return t
    mask = (rng.random(t.values.shape) >= rate) / (1.0 - rate)
    return mul(t, Tensor(mask))


def cross_entropy_from_logits(logits: Tensor, targets: np.ndarray) -> Tensor:
    """Mean negative log softmax probability of the target class per row."""
    logits = _as_tensor(logits)
    targets = np.asarray(targets, dtype=np.int64)
    n = logits.values.shape[0]
    if targets.shape != (n,):
        raise ValueError(f"expected {n} targets, got shape {targets.shape}")
    shifted = logits.values - logits.values.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    log_probs = shifted - log_z
    loss = -log_probs[np.arange(n), targets].mean()
    out = Tensor(loss, logits.requires_grad, (logits,))

    def backward(g):
        if logits.requires_grad:
            grad = np.exp(log_probs)
            grad[np.arange(n), targets] -= 1.0
            logits._accumulate(g * grad / n)

    out._backward = backward
    return out


def assert_finite(t: Tensor, context: str = "") -> Tensor:
    if not np.all(np.isfinite(t.values)):
        raise FloatingPointError(f"non-finite values{' in ' + context if context else ''}")
    return t
