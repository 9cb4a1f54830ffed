"""Small neural-net building blocks on top of the autodiff tape."""

from __future__ import annotations

import numpy as np

from . import grad
from .grad import Tensor, as_tensor


def glorot(rng: np.random.Generator, fan_in: int, fan_out: int, shape=None) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape or (fan_in, fan_out))


def linear(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    return grad.matmul(x, w) + b


def lstm_step(x: Tensor, h: Tensor, c: Tensor, wx: Tensor, wh: Tensor, b: Tensor):
    """One LSTM cell step over a batch; gate order i, f, g, o."""
    hidden = wh.shape[0]
    z = grad.matmul(x, wx) + grad.matmul(h, wh) + b
    i = grad.sigmoid(z[:, 0:hidden])
    f = grad.sigmoid(z[:, hidden : 2 * hidden])
    g = grad.tanh(z[:, 2 * hidden : 3 * hidden])
    o = grad.sigmoid(z[:, 3 * hidden : 4 * hidden])
    c_new = f * c + i * g
    h_new = o * grad.tanh(c_new)
    return h_new, c_new


def lstm_params(rng: np.random.Generator, input_dim: int, hidden: int):
    """(wx, wh, b) arrays with forget-gate bias started at 1."""
    wx = glorot(rng, input_dim, 4 * hidden)
    wh = glorot(rng, hidden, 4 * hidden)
    b = np.zeros(4 * hidden)
    b[hidden : 2 * hidden] = 1.0
    return wx, wh, b


def masked_update(new: Tensor, old: Tensor, mask: Tensor) -> Tensor:
    """Keep `old` rows where mask is 0 (padding), take `new` where 1."""
    return new * mask + old * (1.0 - mask)


def bce_with_logits(logits: Tensor, targets) -> Tensor:
    """Elementwise binary cross-entropy, numerically stable form."""
    t = as_tensor(targets)
    return grad.softplus(logits) - logits * t


def cross_entropy(logits: Tensor, labels: np.ndarray) -> Tensor:
    """Mean softmax cross-entropy for integer class labels."""
    lsm = grad.log_softmax(logits, axis=-1)
    n, k = lsm.shape
    onehot = np.zeros((n, k))
    onehot[np.arange(n), labels] = 1.0
    return -grad.tensor_sum(lsm * onehot) * (1.0 / n)
