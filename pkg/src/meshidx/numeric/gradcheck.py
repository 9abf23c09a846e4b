from __future__ import annotations

from typing import Callable, Mapping

import numpy as np

from .tensor import Tensor


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-6) -> np.ndarray:
    """Coordinate-wise ``|a - n| / max(|a|, |n|, floor)``."""
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return np.abs(analytic - numeric) / denom


def numeric_gradient(
    f: Callable[[Mapping[str, Tensor]], Tensor],
    params: Mapping[str, Tensor],
    name: str,
    eps: float = 1e-5,
) -> np.ndarray:
    x = params[name].data
    out = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = out.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        hi = float(f(params).data)
        flat[i] = orig - eps
        lo = float(f(params).data)
        flat[i] = orig
        gflat[i] = (hi - lo) / (2.0 * eps)
    return out


def analytic_gradients(
    f: Callable[[Mapping[str, Tensor]], Tensor],
    params: Mapping[str, Tensor],
) -> dict[str, np.ndarray]:
    for p in params.values():
        p.requires_grad = True
        p.zero_grad()
    f(params).backward()
    return {k: (p.grad if p.grad is not None else np.zeros_like(p.data)) for k, p in params.items()}


def grad_check(
    f: Callable[[Mapping[str, Tensor]], Tensor],
    params: Mapping[str, Tensor],
    eps: float = 1e-5,
    floor: float = 1e-6,
) -> dict[str, float]:
    """Compare reverse-mode gradients of scalar ``f`` with central differences.

    Returns the maximum coordinate-wise relative error per parameter name.
    ``f`` must be deterministic (run dropout in inference mode).
    """
    analytic = analytic_gradients(f, params)
    report = {}
    for name in params:
        num = numeric_gradient(f, params, name, eps)
        err = relative_error(analytic[name], num, floor)
        report[name] = float(err.max()) if err.size else 0.0
    return report
