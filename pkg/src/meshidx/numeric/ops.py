"""Differentiable primitives used by the indexing model.

All ops accept leading batch dimensions where that makes sense, so a
minibatch of documents runs through one graph instead of one per document.
"""

from __future__ import annotations

from typing import Optional

import numpy as np
import scipy.sparse as sp

from .tensor import Tensor, as_tensor, make_node

PROB_EPS = 1e-7


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return make_node(
        a.data + b.data,
        (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)),
    )


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return make_node(
        a.data * b.data,
        (a, b),
        lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)),
    )


def total(x: Tensor, axis: Optional[int] = None, keepdims: bool = False) -> Tensor:
    """Sum over ``axis`` (all axes when None)."""

    def backward(g):
        if axis is None:
            return (np.broadcast_to(g, x.shape).copy(),)
        gg = g if keepdims else np.expand_dims(g, axis)
        return (np.broadcast_to(gg, x.shape).copy(),)

    return make_node(np.sum(x.data, axis=axis, keepdims=keepdims), (x,), backward)


def matmul(a, b) -> Tensor:
    """Matrix product over the last two axes, numpy broadcasting on the rest.

    Gradients: dA = dC @ B^T, dB = A^T @ dC, summed over broadcast axes.
    """
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise ValueError(f"matmul needs at least 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ValueError(f"matmul shape mismatch: {a.shape} @ {b.shape}")

    def backward(g):
        ga = g @ np.swapaxes(b.data, -1, -2)
        gb = np.swapaxes(a.data, -1, -2) @ g
        return _unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape)

    return make_node(a.data @ b.data, (a, b), backward)


def const_matmul(m, x: Tensor) -> Tensor:
    """``m @ x`` for a constant (dense or scipy sparse) matrix ``m``."""
    if m.shape[1] != x.shape[0]:
        raise ValueError(f"matmul shape mismatch: {m.shape} @ {x.shape}")
    mt = m.T

    def backward(g):
        out = mt @ g
        return (np.asarray(out.todense() if sp.issparse(out) else out),)

    out = m @ x.data
    return make_node(np.asarray(out), (x,), backward)


def swap_last(x: Tensor) -> Tensor:
    return make_node(np.swapaxes(x.data, -1, -2), (x,), lambda g: (np.swapaxes(g, -1, -2),))


def relu(x: Tensor) -> Tensor:
    pos = x.data > 0
    return make_node(np.where(pos, x.data, 0.0), (x,), lambda g: (g * pos,))


def identity(x: Tensor) -> Tensor:
    return x


def sigmoid(x: Tensor) -> Tensor:
    z = x.data
    # split by sign so exp never overflows
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return make_node(out, (x,), lambda g: (g * out * (1.0 - out),))


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    z = x.data
    zmax = np.max(z, axis=axis, keepdims=True)
    zmax = np.where(np.isfinite(zmax), zmax, 0.0)
    e = np.exp(z - zmax)
    s = e / np.sum(e, axis=axis, keepdims=True)

    def backward(g):
        return (s * (g - np.sum(g * s, axis=axis, keepdims=True)),)

    return make_node(s, (x,), backward)


def masked_fill(x: Tensor, mask: np.ndarray, value: float) -> Tensor:
    """Replace entries where ``mask`` is False by ``value`` (no gradient there)."""
    keep = np.broadcast_to(np.asarray(mask, dtype=bool), x.shape)
    return make_node(np.where(keep, x.data, value), (x,), lambda g: (np.where(keep, g, 0.0),))


def dropout(
    x: Tensor,
    rate: float,
    rng: Optional[np.random.Generator] = None,
    training: bool = True,
) -> Tensor:
    """Inverted dropout: survivors are scaled by 1/(1-rate); identity at inference."""
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must lie in [0, 1), got {rate}")
    if not training or rate == 0.0:
        return x
    if rng is None:
        rng = np.random.default_rng()
    keep = (rng.random(x.shape) >= rate) / (1.0 - rate)
    return make_node(x.data * keep, (x,), lambda g: (g * keep,))


def embed(ids, table: Tensor) -> Tensor:
    """Row lookup ``table[ids]``; gradients scatter-add back into the table."""
    ids = np.asarray(ids, dtype=np.int64)
    n = table.shape[0]
    if ids.size and (ids.min() < 0 or ids.max() >= n):
        bad = ids[(ids < 0) | (ids >= n)].ravel()[0]
        raise IndexError(f"embedding id {int(bad)} out of range for table of {n} rows")

    def backward(g):
        gt = np.zeros_like(table.data)
        np.add.at(gt, ids.ravel(), g.reshape(-1, table.shape[1]))
        return (gt,)

    return make_node(table.data[ids], (table,), backward)


def dilated_conv1d(x: Tensor, kernels: Tensor, dilation: int = 1) -> Tensor:
    """Valid 1-D convolution with spaced taps.

    ``x`` is ``(..., l, c_in)`` and ``kernels`` is ``(s, c_in, c_out)``;
    ``out[t] = sum_j x[t + j*dilation] @ kernels[j]`` for
    ``t < l - (s-1)*dilation``.
    """
    if dilation < 1:
        raise ValueError(f"dilation must be a positive integer, got {dilation}")
    s, c_in, c_out = kernels.shape
    l = x.shape[-2]
    if x.shape[-1] != c_in:
        raise ValueError(f"input has {x.shape[-1]} channels, kernels expect {c_in}")
    l_out = l - (s - 1) * dilation
    if l_out < 1:
        raise ValueError(
            f"sequence of length {l} is shorter than the receptive field "
            f"{(s - 1) * dilation + 1}; pad the input first"
        )
    xd, kd = x.data, kernels.data
    out = np.zeros(x.shape[:-2] + (l_out, c_out), dtype=np.result_type(xd, kd))
    for j in range(s):
        out += xd[..., j * dilation : j * dilation + l_out, :] @ kd[j]

    def backward(g):
        gx = np.zeros_like(xd)
        gk = np.zeros_like(kd)
        g2 = g.reshape(-1, c_out)
        x2 = xd.reshape(-1, l, c_in)
        for j in range(s):
            sl = slice(j * dilation, j * dilation + l_out)
            gx[..., sl, :] += g @ kd[j].T
            gk[j] = x2[:, sl, :].reshape(-1, c_in).T @ g2
        return gx, gk

    return make_node(out, (x, kernels), backward)


def bce_loss(pred: Tensor, target, eps: float = PROB_EPS) -> Tensor:
    """Binary cross-entropy summed over every entry.

    Predictions are clamped to ``[eps, 1-eps]`` before the logs; clamped
    entries pass no gradient.
    """
    y = np.asarray(target, dtype=pred.data.dtype)
    if y.shape != pred.shape:
        raise ValueError(f"prediction shape {pred.shape} != target shape {y.shape}")
    p = np.clip(pred.data, eps, 1.0 - eps)
    inside = (pred.data > eps) & (pred.data < 1.0 - eps)
    loss = np.sum(-y * np.log(p) - (1.0 - y) * np.log(1.0 - p))

    def backward(g):
        return (g * np.where(inside, -y / p + (1.0 - y) / (1.0 - p), 0.0),)

    return make_node(np.asarray(loss), (pred,), backward)
