"""Shared oracles for the test suite.

``numeric_grad`` is the independent finite-difference oracle: it only ever
calls the forward path, never the tape, so it stays independent of the
backward rules it is used to check.
"""

from __future__ import annotations

import numpy as np

from motionadapt.autodiff import Tensor, no_grad


def numeric_grad(f, x: np.ndarray, step: float = 1e-5) -> np.ndarray:
    """Central finite differences of scalar-valued f at x, elementwise."""
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = grad.reshape(-1)
    with no_grad():
        for i in range(flat.size):
            keep = flat[i]
            flat[i] = keep + step
            hi = float(f(x))
            flat[i] = keep - step
            lo = float(f(x))
            flat[i] = keep
            gflat[i] = (hi - lo) / (2.0 * step)
    return grad


def rel_err(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """Max elementwise relative error with an absolute floor of 1."""
    a = np.asarray(analytic, dtype=np.float64)
    f = np.asarray(numeric, dtype=np.float64)
    denom = np.maximum(1.0, np.maximum(np.abs(a), np.abs(f)))
    return float((np.abs(a - f) / denom).max())


def grad_of(fn, *arrays: np.ndarray, step: float = 1e-5) -> list[np.ndarray]:
    """Finite-difference gradients of fn(*tensors) w.r.t. each array input.

    ``fn`` receives Tensors and must return a scalar Tensor.
    """
    arrays = [np.asarray(a, dtype=np.float64) for a in arrays]

    grads = []
    for target in range(len(arrays)):
        def f(x, target=target):
            args = [Tensor(x if j == target else arrays[j]) for j in range(len(arrays))]
            return fn(*args).item()

        grads.append(numeric_grad(f, arrays[target].copy(), step=step))
    return grads
