"""Fused training-epoch and scoring kernels for the 7-layer autoencoder.

The kernels are written once in numpy-compatible form; the numba backend
compiles the same source, the numpy backend runs it as-is (the batch
dimension keeps the plain path vectorized).  Weight layout is six affine
stages; ReLU follows stages 0, 1, 3 and 4, the bottleneck stage 2 and the
output stage 5 stay linear.

The per-sample loss is the unsquared euclidean norm of the reconstruction
residual; a zero residual uses the zero subgradient.  Updates are plain
mini-batch gradient descent applied in place.
"""

from __future__ import annotations

import numpy as np

from . import NUMBA, get_backend


def _epoch_update(w0, b0, w1, b1, w2, b2, w3, b3, w4, b4, w5, b5, x, perm, batch_size, lr):
    n = perm.shape[0]
    total = 0.0
    for s in range(0, n, batch_size):
        idx = perm[s : s + batch_size]
        xb = x[idx]
        bsz = xb.shape[0]
        z1 = np.dot(xb, w0) + b0
        a1 = np.maximum(z1, 0.0)
        z2 = np.dot(a1, w1) + b1
        a2 = np.maximum(z2, 0.0)
        z3 = np.dot(a2, w2) + b2
        z4 = np.dot(z3, w3) + b3
        a4 = np.maximum(z4, 0.0)
        z5 = np.dot(a4, w4) + b4
        a5 = np.maximum(z5, 0.0)
        out = np.dot(a5, w5) + b5
        r = out - xb
        norms = np.sqrt(np.sum(r * r, axis=1))
        total += np.sum(norms)
        scale = np.where(norms > 0.0, 1.0 / (norms * bsz), 0.0)
        d5 = r * scale.reshape(-1, 1)
        gw5 = np.dot(a5.T, d5)
        gb5 = np.sum(d5, axis=0)
        da5 = np.dot(d5, w5.T)
        dz5 = np.where(z5 > 0.0, da5, 0.0)
        gw4 = np.dot(a4.T, dz5)
        gb4 = np.sum(dz5, axis=0)
        da4 = np.dot(dz5, w4.T)
        dz4 = np.where(z4 > 0.0, da4, 0.0)
        gw3 = np.dot(z3.T, dz4)
        gb3 = np.sum(dz4, axis=0)
        dz3 = np.dot(dz4, w3.T)
        gw2 = np.dot(a2.T, dz3)
        gb2 = np.sum(dz3, axis=0)
        da2 = np.dot(dz3, w2.T)
        dz2 = np.where(z2 > 0.0, da2, 0.0)
        gw1 = np.dot(a1.T, dz2)
        gb1 = np.sum(dz2, axis=0)
        da1 = np.dot(dz2, w1.T)
        dz1 = np.where(z1 > 0.0, da1, 0.0)
        gw0 = np.dot(xb.T, dz1)
        gb0 = np.sum(dz1, axis=0)
        w0 -= lr * gw0
        b0 -= lr * gb0
        w1 -= lr * gw1
        b1 -= lr * gb1
        w2 -= lr * gw2
        b2 -= lr * gb2
        w3 -= lr * gw3
        b3 -= lr * gb3
        w4 -= lr * gw4
        b4 -= lr * gb4
        w5 -= lr * gw5
        b5 -= lr * gb5
    return total / n


def _forward_norms(w0, b0, w1, b1, w2, b2, w3, b3, w4, b4, w5, b5, x):
    z1 = np.dot(x, w0) + b0
    a1 = np.maximum(z1, 0.0)
    z2 = np.dot(a1, w1) + b1
    a2 = np.maximum(z2, 0.0)
    z3 = np.dot(a2, w2) + b2
    z4 = np.dot(z3, w3) + b3
    a4 = np.maximum(z4, 0.0)
    z5 = np.dot(a4, w4) + b4
    a5 = np.maximum(z5, 0.0)
    out = np.dot(a5, w5) + b5
    r = out - x
    return np.sqrt(np.sum(r * r, axis=1))


_jitted_epoch = None
_jitted_norms = None


def _epoch_impl():
    global _jitted_epoch
    if _jitted_epoch is None:
        import numba

        _jitted_epoch = numba.njit(cache=True)(_epoch_update)
    return _jitted_epoch


def _norms_impl():
    global _jitted_norms
    if _jitted_norms is None:
        import numba

        _jitted_norms = numba.njit(cache=True)(_forward_norms)
    return _jitted_norms


def _flatten(weights, biases):
    flat = []
    for w, b in zip(weights, biases):
        flat.append(w)
        flat.append(b)
    return flat


def epoch_update(weights, biases, x, perm, batch_size, lr):
    """Run one shuffled epoch of mini-batch gradient descent in place.

    Returns the mean per-sample reconstruction norm seen during the epoch
    (evaluated at the pre-update parameters of each batch).
    """
    if len(weights) != 6:
        raise ValueError("epoch kernel is specialized for six affine stages")
    args = (*_flatten(weights, biases), x, perm, int(batch_size), float(lr))
    if get_backend() == NUMBA:
        return _epoch_impl()(*args)
    return _epoch_update(*args)


def forward_norms(weights, biases, x):
    """Per-sample reconstruction norms for a batch, without gradients."""
    if len(weights) != 6:
        raise ValueError("scoring kernel is specialized for six affine stages")
    args = (*_flatten(weights, biases), x)
    if get_backend() == NUMBA:
        return _norms_impl()(*args)
    return _forward_norms(*args)
