"""Minimal dense tensor algebra with reverse-mode differentiation.

A Tensor wraps a 2-D float64 array plus the closures needed to push a
cotangent back to its parents. Calling ``backward(loss, seed)`` walks the
recorded graph once in reverse topological order and accumulates
gradients (in float64) on every tensor created with requires_grad=True.

Only the primitives the encoder and losses need are provided; shapes are
checked eagerly so mistakes fail at construction, not deep inside
backward. Broadcasting is limited to adding a 1 x d row vector to an
n x d matrix.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .streams import as_generator


class Tensor:
    """Node in the computation tape."""

    __slots__ = ("values", "grad", "parents", "vjps", "requires_grad", "active", "name")

    def __init__(self, values, parents=(), vjps=(), requires_grad=False, name=None):
        v = np.asarray(values, dtype=np.float64)
        if v.ndim == 1:
            v = v.reshape(1, -1)
        if v.ndim != 2:
            raise ValueError(f"tensors are 2-D, got shape {v.shape}")
        self.values = v
        self.grad = None
        self.parents = parents
        self.vjps = vjps
        self.requires_grad = requires_grad
        self.active = requires_grad or any(p.active for p in parents)
        self.name = name

    @property
    def shape(self):
        return self.values.shape

    def __repr__(self):
        tag = f" name={self.name}" if self.name else ""
        return f"Tensor(shape={self.values.shape}, active={self.active}{tag})"


def parameter(values, name=None) -> Tensor:
    return Tensor(np.array(values, dtype=np.float64), requires_grad=True, name=name)


def constant(values, name=None) -> Tensor:
    return Tensor(values, name=name)


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else constant(x)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"matmul shape mismatch: {a.shape} @ {b.shape}")
    return Tensor(a.values @ b.values, (a, b),
                  (lambda g: g @ b.values.T, lambda g: a.values.T @ g))


def matmul_sparse(s, x: Tensor) -> Tensor:
    """Multiply by a constant scipy CSR matrix (used for neighbor sums
    and mean readout); only x is differentiated."""
    x = _as_tensor(x)
    if s.shape[1] != x.shape[0]:
        raise ValueError(f"sparse matmul shape mismatch: {s.shape} @ {x.shape}")
    st = s.T.tocsr()
    return Tensor(s @ x.values, (x,), (lambda g: st @ g,))


def transpose(a: Tensor) -> Tensor:
    a = _as_tensor(a)
    return Tensor(a.values.T, (a,), (lambda g: g.T,))


def add(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise sum; b may be a 1 x d row broadcast over a's rows."""
    a, b = _as_tensor(a), _as_tensor(b)
    if a.shape == b.shape:
        return Tensor(a.values + b.values, (a, b), (lambda g: g, lambda g: g))
    if b.shape == (1, a.shape[1]):
        return Tensor(a.values + b.values, (a, b),
                      (lambda g: g, lambda g: g.sum(axis=0, keepdims=True)))
    raise ValueError(f"add shape mismatch: {a.shape} + {b.shape}")


def mul(a: Tensor, b: Tensor) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.shape != b.shape:
        raise ValueError(f"mul shape mismatch: {a.shape} * {b.shape}")
    return Tensor(a.values * b.values, (a, b),
                  (lambda g: g * b.values, lambda g: g * a.values))


def scale(a: Tensor, c: float) -> Tensor:
    a = _as_tensor(a)
    c = float(c)
    return Tensor(a.values * c, (a,), (lambda g: g * c,))


def relu(a: Tensor) -> Tensor:
    a = _as_tensor(a)
    mask = a.values > 0
    return Tensor(np.where(mask, a.values, 0.0), (a,), (lambda g: g * mask,))


def dropout(a: Tensor, rate: float, train: bool, rng=None) -> Tensor:
    """Inverted dropout: keep with prob 1-rate, scale survivors by
    1/(1-rate). Identity when train is False or rate is 0."""
    a = _as_tensor(a)
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    if not train or rate == 0.0:
        return Tensor(a.values.copy(), (a,), (lambda g: g,))
    if rng is None:
        raise ValueError("dropout in training mode needs an rng")
    gen = as_generator(rng)
    mask = (gen.random(a.shape) >= rate) / (1.0 - rate)
    return Tensor(a.values * mask, (a,), (lambda g: g * mask,))


def concat_cols(parts) -> Tensor:
    parts = [_as_tensor(p) for p in parts]
    rows = {p.shape[0] for p in parts}
    if len(rows) != 1:
        raise ValueError(f"concat_cols row mismatch: {[p.shape for p in parts]}")
    widths = [p.shape[1] for p in parts]
    edges = np.concatenate([[0], np.cumsum(widths)])
    vjps = tuple((lambda lo, hi: lambda g: g[:, lo:hi])(edges[i], edges[i + 1])
                 for i in range(len(parts)))
    return Tensor(np.concatenate([p.values for p in parts], axis=1), tuple(parts), vjps)


def row_sum(a: Tensor) -> Tensor:
    a = _as_tensor(a)
    n = a.shape[1]
    return Tensor(a.values.sum(axis=1, keepdims=True), (a,),
                  (lambda g: np.repeat(g, n, axis=1),))


def row_mean(a: Tensor) -> Tensor:
    a = _as_tensor(a)
    n = a.shape[1]
    return Tensor(a.values.mean(axis=1, keepdims=True), (a,),
                  (lambda g: np.repeat(g / n, n, axis=1),))


def mean_all(a: Tensor) -> Tensor:
    a = _as_tensor(a)
    count = a.values.size
    return Tensor(np.array([[a.values.mean()]]), (a,),
                  (lambda g: np.full(a.shape, g[0, 0] / count),))


def l2_normalize_rows(a: Tensor, eps: float = 1e-12) -> Tensor:
    """Each row x becomes x / max(||x||_2, eps)."""
    a = _as_tensor(a)
    norms = np.linalg.norm(a.values, axis=1, keepdims=True)
    denom = np.maximum(norms, eps)
    out = a.values / denom

    def vjp(g):
        # rows at the eps floor are a plain scaling; normal rows also
        # project out the radial component
        raw = g / denom
        floored = norms <= eps
        dots = np.sum(g * out, axis=1, keepdims=True)
        return np.where(floored, raw, raw - out * dots / denom)

    return Tensor(out, (a,), (vjp,))


def log_softmax(a: Tensor) -> Tensor:
    a = _as_tensor(a)
    shifted = a.values - a.values.max(axis=1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    out = shifted - lse
    softmax = np.exp(out)
    return Tensor(out, (a,),
                  (lambda g: g - softmax * g.sum(axis=1, keepdims=True),))


def backward(root: Tensor, seed_grad=None) -> None:
    """Accumulate gradients of root (weighted by seed_grad) on all
    requires_grad tensors reachable from it. seed_grad defaults to ones
    and must match root's shape."""
    if seed_grad is None:
        seed_grad = np.ones(root.shape)
    seed_grad = np.asarray(seed_grad, dtype=np.float64)
    if seed_grad.shape != root.values.shape:
        raise ValueError(f"seed gradient shape {seed_grad.shape} != root shape {root.values.shape}")

    order = []
    seen = set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen or not node.active:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            stack.append((p, False))

    grads = {id(root): seed_grad}
    for node in reversed(order):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node.requires_grad:
            node.grad = g if node.grad is None else node.grad + g
        for p, vjp in zip(node.parents, node.vjps):
            if not p.active:
                continue
            contrib = vjp(g)
            if id(p) in grads:
                grads[id(p)] = grads[id(p)] + contrib
            else:
                grads[id(p)] = contrib


def zero_grads(tensors) -> None:
    for t in tensors:
        t.grad = None
