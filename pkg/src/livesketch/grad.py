"""Dense float64 tensors with reverse-mode automatic differentiation.

The tape is dynamic: every operation on tracked tensors records its parents
and a closure that pushes gradients back to them. ``backward`` runs a single
iterative topological sweep, so each node's closure fires exactly once and
repeated passes over identical inputs are bit-for-bit reproducible.

Tensors are immutable values as far as the graph is concerned; reusing an
output of one tape as input to a later one should go through ``detach`` (or
``.data``), otherwise the old graph is dragged into the new backward pass.
"""

from __future__ import annotations

from contextlib import contextmanager

import numpy as np


class DimensionError(ValueError):
    """Shape-incompatible operands."""


_GRAD_ENABLED = [True]


@contextmanager
def no_grad():
    """Disable graph recording inside the block (pure inference)."""
    _GRAD_ENABLED.append(False)
    try:
        yield
    finally:
        _GRAD_ENABLED.pop()


def is_tracing() -> bool:
    return _GRAD_ENABLED[-1]


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad=False, _parents=(), _backward=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = _parents
        self._backward = _backward

    @property
    def shape(self):
        return self.data.shape

    @property
    def _tracked(self) -> bool:
        return self.requires_grad or bool(self._parents)

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def item(self) -> float:
        return float(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, tracked={self._tracked})"

    # -- operator sugar -----------------------------------------------------

    def __add__(self, other):
        return add(self, as_tensor(other))

    def __radd__(self, other):
        return add(as_tensor(other), self)

    def __sub__(self, other):
        return sub(self, as_tensor(other))

    def __rsub__(self, other):
        return sub(as_tensor(other), self)

    def __mul__(self, other):
        return mul(self, as_tensor(other))

    def __rmul__(self, other):
        return mul(as_tensor(other), self)

    def __truediv__(self, other):
        return div(self, as_tensor(other))

    def __rtruediv__(self, other):
        return div(as_tensor(other), self)

    def __neg__(self):
        return mul(self, as_tensor(-1.0))

    def __pow__(self, exponent):
        return power(self, exponent)

    def __matmul__(self, other):
        return matmul(self, as_tensor(other))

    def __getitem__(self, key):
        return take(self, key)

    def sum(self, axis=None, keepdims=False):
        return tensor_sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return tensor_mean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        return reshape(self, shape if len(shape) > 1 else shape[0])

    def transpose(self, axes=None):
        return transpose(self, axes)

    @property
    def T(self):
        return transpose(self, None)


def as_tensor(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def parameter(data, rng=None) -> Tensor:
    """Leaf tensor that accumulates gradients."""
    return Tensor(np.array(data, dtype=np.float64), requires_grad=True)


def _make(data, parents, backward_fn):
    if _GRAD_ENABLED[-1] and any(p._tracked for p in parents):
        return Tensor(data, _parents=tuple(parents), _backward=backward_fn)
    return Tensor(data)


def _unbroadcast(grad: np.ndarray, shape) -> np.ndarray:
    """Reduce a gradient back to the shape it was broadcast from."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


# -- arithmetic ---------------------------------------------------------------


def add(a: Tensor, b: Tensor) -> Tensor:
    try:
        out = a.data + b.data
    except ValueError:
        raise DimensionError(f"add: incompatible shapes {a.shape} vs {b.shape}")

    def backward(g):
        if a.grad is not None:
            a.grad += _unbroadcast(g, a.data.shape)
        if b.grad is not None:
            b.grad += _unbroadcast(g, b.data.shape)

    return _make(out, (a, b), backward)


def sub(a: Tensor, b: Tensor) -> Tensor:
    try:
        out = a.data - b.data
    except ValueError:
        raise DimensionError(f"sub: incompatible shapes {a.shape} vs {b.shape}")

    def backward(g):
        if a.grad is not None:
            a.grad += _unbroadcast(g, a.data.shape)
        if b.grad is not None:
            b.grad -= _unbroadcast(g, b.data.shape)

    return _make(out, (a, b), backward)


def mul(a: Tensor, b: Tensor) -> Tensor:
    try:
        out = a.data * b.data
    except ValueError:
        raise DimensionError(f"mul: incompatible shapes {a.shape} vs {b.shape}")

    def backward(g):
        if a.grad is not None:
            a.grad += _unbroadcast(g * b.data, a.data.shape)
        if b.grad is not None:
            b.grad += _unbroadcast(g * a.data, b.data.shape)

    return _make(out, (a, b), backward)


def div(a: Tensor, b: Tensor) -> Tensor:
    try:
        out = a.data / b.data
    except ValueError:
        raise DimensionError(f"div: incompatible shapes {a.shape} vs {b.shape}")

    def backward(g):
        if a.grad is not None:
            a.grad += _unbroadcast(g / b.data, a.data.shape)
        if b.grad is not None:
            b.grad += _unbroadcast(-g * a.data / (b.data * b.data), b.data.shape)

    return _make(out, (a, b), backward)


def power(a: Tensor, exponent: float) -> Tensor:
    exponent = float(exponent)
    out = a.data**exponent

    def backward(g):
        if a.grad is not None:
            a.grad += g * exponent * a.data ** (exponent - 1.0)

    return _make(out, (a,), backward)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise DimensionError(f"matmul expects 2-D operands, got {a.shape} and {b.shape}")
    if a.data.shape[1] != b.data.shape[0]:
        raise DimensionError(f"matmul: inner dimensions differ, {a.shape} vs {b.shape}")
    out = a.data @ b.data

    def backward(g):
        if a.grad is not None:
            a.grad += g @ b.data.T
        if b.grad is not None:
            b.grad += a.data.T @ g

    return _make(out, (a, b), backward)


# -- elementwise nonlinearities ------------------------------------------------


def tanh(a: Tensor) -> Tensor:
    out = np.tanh(a.data)

    def backward(g):
        if a.grad is not None:
            a.grad += g * (1.0 - out * out)

    return _make(out, (a,), backward)


def sigmoid(a: Tensor) -> Tensor:
    out = np.empty_like(a.data)
    pos = a.data >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-a.data[pos]))
    ez = np.exp(a.data[~pos])
    out[~pos] = ez / (1.0 + ez)

    def backward(g):
        if a.grad is not None:
            a.grad += g * out * (1.0 - out)

    return _make(out, (a,), backward)


def relu(a: Tensor) -> Tensor:
    out = np.maximum(a.data, 0.0)

    def backward(g):
        if a.grad is not None:
            a.grad += g * (a.data > 0)

    return _make(out, (a,), backward)


def exp(a: Tensor) -> Tensor:
    out = np.exp(a.data)

    def backward(g):
        if a.grad is not None:
            a.grad += g * out

    return _make(out, (a,), backward)


def log(a: Tensor) -> Tensor:
    out = np.log(a.data)

    def backward(g):
        if a.grad is not None:
            a.grad += g / a.data

    return _make(out, (a,), backward)


def softplus(a: Tensor) -> Tensor:
    out = np.logaddexp(0.0, a.data)

    def backward(g):
        if a.grad is not None:
            # derivative is sigmoid(x), computed stably
            s = np.empty_like(a.data)
            pos = a.data >= 0
            s[pos] = 1.0 / (1.0 + np.exp(-a.data[pos]))
            ez = np.exp(a.data[~pos])
            s[~pos] = ez / (1.0 + ez)
            a.grad += g * s

    return _make(out, (a,), backward)


def clamp_max(a: Tensor, ceiling: float) -> Tensor:
    """Elementwise min(a, ceiling); gradient passes only where a <= ceiling."""
    out = np.minimum(a.data, ceiling)

    def backward(g):
        if a.grad is not None:
            a.grad += g * (a.data <= ceiling)

    return _make(out, (a,), backward)


# -- shape manipulation ---------------------------------------------------------


def reshape(a: Tensor, shape) -> Tensor:
    out = a.data.reshape(shape)

    def backward(g):
        if a.grad is not None:
            a.grad += g.reshape(a.data.shape)

    return _make(out, (a,), backward)


def transpose(a: Tensor, axes=None) -> Tensor:
    out = np.transpose(a.data, axes)
    inverse = None if axes is None else np.argsort(axes)

    def backward(g):
        if a.grad is not None:
            a.grad += np.transpose(g, inverse)

    return _make(out, (a,), backward)


def take(a: Tensor, key) -> Tensor:
    """Basic (slice/int/tuple) indexing; fancy indexing is not supported."""
    out = a.data[key]

    def backward(g):
        if a.grad is not None:
            a.grad[key] += g

    return _make(out, (a,), backward)


def concat(tensors, axis=0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    out = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def backward(g):
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            if t.grad is not None:
                idx = [slice(None)] * g.ndim
                idx[axis] = slice(lo, hi)
                t.grad += g[tuple(idx)]

    return _make(out, tuple(tensors), backward)


# -- reductions ----------------------------------------------------------------


def tensor_sum(a: Tensor, axis=None, keepdims=False) -> Tensor:
    out = a.data.sum(axis=axis, keepdims=keepdims)

    def backward(g):
        if a.grad is None:
            return
        if axis is None:
            a.grad += g
        elif keepdims:
            a.grad += np.broadcast_to(g, a.data.shape)
        else:
            a.grad += np.broadcast_to(np.expand_dims(g, axis), a.data.shape)

    return _make(out, (a,), backward)


def tensor_mean(a: Tensor, axis=None, keepdims=False) -> Tensor:
    if axis is None:
        count = a.data.size
    else:
        axes = axis if isinstance(axis, tuple) else (axis,)
        count = int(np.prod([a.data.shape[i] for i in axes]))
    return tensor_sum(a, axis=axis, keepdims=keepdims) * (1.0 / count)


# -- normalizations and distances ------------------------------------------------


def softmax(a: Tensor, axis=-1) -> Tensor:
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        if a.grad is not None:
            inner = (g * out).sum(axis=axis, keepdims=True)
            a.grad += out * (g - inner)

    return _make(out, (a,), backward)


def log_softmax(a: Tensor, axis=-1) -> Tensor:
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    out = shifted - lse

    def backward(g):
        if a.grad is not None:
            a.grad += g - np.exp(out) * g.sum(axis=axis, keepdims=True)

    return _make(out, (a,), backward)


def l2_norm(a: Tensor, axis=None, keepdims=False, eps: float = 0.0) -> Tensor:
    """sqrt(sum(a**2) + eps); eps > 0 smooths the gradient at the origin."""
    sq = tensor_sum(mul(a, a), axis=axis, keepdims=keepdims)
    if eps:
        sq = add(sq, as_tensor(eps))
    return power(sq, 0.5)


def squared_distance(a: Tensor, b: Tensor, axis=None) -> Tensor:
    d = sub(a, b)
    return tensor_sum(mul(d, d), axis=axis)


def normalize_rows(a: Tensor, floor: float = 1e-12) -> Tensor:
    """Rows rescaled to unit L2 norm; zero rows are left (numerically) at zero."""
    sq = tensor_sum(mul(a, a), axis=-1, keepdims=True)
    norm = power(add(sq, as_tensor(floor * floor)), 0.5)
    return div(a, norm)


# -- convolution -----------------------------------------------------------------


def conv2d(x: Tensor, w: Tensor, b: Tensor, stride: int = 1, padding: int = 0) -> Tensor:
    """NCHW convolution via kernel-offset gather; backward scatters with +=."""
    n, c, h, wd = x.data.shape
    oc, ic, kh, kw = w.data.shape
    if ic != c:
        raise DimensionError(f"conv2d: input channels {c} != kernel channels {ic}")
    oh = (h + 2 * padding - kh) // stride + 1
    ow = (wd + 2 * padding - kw) // stride + 1
    xp = np.pad(x.data, ((0, 0), (0, 0), (padding, padding), (padding, padding)))

    cols = np.empty((n, c, kh, kw, oh, ow))
    for u in range(kh):
        for v in range(kw):
            cols[:, :, u, v] = xp[:, :, u : u + stride * oh : stride, v : v + stride * ow : stride]
    cols2 = cols.reshape(n, c * kh * kw, oh * ow)
    wf = w.data.reshape(oc, c * kh * kw)
    out = np.einsum("ok,nkp->nop", wf, cols2).reshape(n, oc, oh, ow)
    out += b.data.reshape(1, oc, 1, 1)

    def backward(g):
        gf = g.reshape(n, oc, oh * ow)
        if b.grad is not None:
            b.grad += g.sum(axis=(0, 2, 3))
        if w.grad is not None:
            w.grad += np.einsum("nop,nkp->ok", gf, cols2).reshape(w.data.shape)
        if x.grad is not None:
            gcols = np.einsum("ok,nop->nkp", wf, gf).reshape(n, c, kh, kw, oh, ow)
            gxp = np.zeros_like(xp)
            for u in range(kh):
                for v in range(kw):
                    gxp[:, :, u : u + stride * oh : stride, v : v + stride * ow : stride] += gcols[:, :, u, v]
            if padding:
                x.grad += gxp[:, :, padding:-padding, padding:-padding]
            else:
                x.grad += gxp

    return _make(out, (x, w, b), backward)


# -- backward sweep ---------------------------------------------------------------


def backward(root: Tensor) -> None:
    """Reverse-mode sweep from a scalar root; fills .grad on every tracked node."""
    if root.data.size != 1:
        raise ValueError(f"backward requires a scalar root, got shape {root.shape}")

    topo = []
    visited = set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            topo.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in visited:
                stack.append((p, False))

    for node in topo:
        node.grad = np.zeros_like(node.data)
    root.grad = np.ones_like(root.data)
    for node in reversed(topo):
        if node._backward is not None:
            node._backward(node.grad)
