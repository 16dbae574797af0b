"""Central finite-difference checking of tape gradients (f64 only)."""

from __future__ import annotations

import numpy as np

from .tensor import Tensor, backward


def grad_check(f, x: Tensor, h: float = 1e-5) -> float:
    """Worst relative error between tape and central-difference gradients.

    f maps a tensor to a scalar Tensor. Relative error per coordinate is
    |a - n| / max(|a|, |n|, 1e-8); the maximum over coordinates is returned.
    """
    if x.dtype != np.float64:
        raise ValueError(f"grad_check needs float64 inputs, got {x.dtype.name}")
    if not x.is_leaf():
        raise ValueError("grad_check needs a leaf tensor (gradients only "
                         "accumulate into leaves)")
    if not x.data.flags["C_CONTIGUOUS"]:
        x.data = np.ascontiguousarray(x.data)   # the FD loop writes via a flat view
    x.requires_grad = True
    x.zero_grad()
    loss = f(x)
    if loss.data.size != 1:
        raise ValueError(f"grad_check: f must return a scalar, got shape {loss.shape}")
    backward(loss)
    analytic = np.zeros_like(x.data) if x.grad is None else x.grad.copy()

    numeric = np.zeros_like(x.data)
    flat = x.data.reshape(-1)
    nflat = numeric.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        f_plus = float(f(x).data)
        flat[i] = orig - h
        f_minus = float(f(x).data)
        flat[i] = orig
        nflat[i] = (f_plus - f_minus) / (2.0 * h)

    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-8)
    return float(np.max(np.abs(analytic - numeric) / denom))
