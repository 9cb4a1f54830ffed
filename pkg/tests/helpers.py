"""Shared test utilities: finite-difference oracles and tiny fixtures."""

from __future__ import annotations

import numpy as np

from livesketch.grad import Tensor


def fd_gradients(loss_fn, arrays: dict[str, np.ndarray], step: float = 1e-5) -> dict[str, np.ndarray]:
    """Central finite differences of a scalar function of named arrays.

    `loss_fn` receives a dict of plain numpy arrays and returns a float. The
    arrays are perturbed one coordinate at a time, so this stays independent
    of the autodiff path it is used to check.
    """
    grads = {}
    base = {k: v.copy() for k, v in arrays.items()}
    for name, arr in base.items():
        g = np.zeros_like(arr)
        flat = arr.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            hi = loss_fn(base)
            flat[i] = orig - step
            lo = loss_fn(base)
            flat[i] = orig
            gflat[i] = (hi - lo) / (2.0 * step)
        grads[name] = g
    return grads


def max_rel_error(analytic: dict[str, np.ndarray], numeric: dict[str, np.ndarray]) -> float:
    worst = 0.0
    for name in analytic:
        a = analytic[name].ravel()
        n = numeric[name].ravel()
        denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), 1e-8)
        worst = max(worst, float(np.max(np.abs(a - n) / denom)))
    return worst


def tensor_dict(arrays: dict[str, np.ndarray]) -> dict[str, Tensor]:
    return {k: Tensor(v.copy(), requires_grad=True) for k, v in arrays.items()}
