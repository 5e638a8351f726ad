"""Differentiable layers used by the network, channel-last (H, W, C)."""
from dataclasses import dataclass

import numpy as np

from .tensor import as_tensor, make


def conv1x1(x, kernel, bias):
    """Per-pixel affine map: (H, W, Cin) x (Cin, Cout) + (Cout,)."""
    x, kernel, bias = as_tensor(x), as_tensor(kernel), as_tensor(bias)
    if x.shape[-1] != kernel.shape[0]:
        raise ValueError(f"conv1x1 channel mismatch: input {x.shape[-1]}, kernel {kernel.shape}")
    if bias.shape != (kernel.shape[1],):
        raise ValueError(f"bias shape {bias.shape} does not match {kernel.shape[1]} outputs")
    lead = x.shape[:-1]
    flat = x.data.reshape(-1, x.shape[-1])
    out = (flat @ kernel.data + bias.data).reshape(lead + (kernel.shape[1],))

    def backward(g):
        g2 = g.reshape(-1, kernel.shape[1])
        return (
            (g2 @ kernel.data.T).reshape(x.shape),
            flat.T @ g2,
            g2.sum(axis=0),
        )

    return make(out, (x, kernel, bias), backward, "conv1x1")


def _patches(xp, h, w):
    """(H, W, 9, C) view-copy of the 3x3 neighbourhoods of padded ``xp``."""
    return np.stack(
        [xp[dy:dy + h, dx:dx + w] for dy in range(3) for dx in range(3)], axis=2
    )


def conv3x3(x, kernel, bias):
    """Cross-correlation with a 3x3 window, zero padding 1, stride 1."""
    x, kernel, bias = as_tensor(x), as_tensor(kernel), as_tensor(bias)
    if x.ndim != 3:
        raise ValueError(f"conv3x3 expects (H, W, C), got {x.shape}")
    h, w, cin = x.shape
    if kernel.shape[:3] != (3, 3, cin):
        raise ValueError(f"conv3x3 kernel {kernel.shape} does not fit {cin} input channels")
    cout = kernel.shape[3]
    xp = np.pad(x.data, ((1, 1), (1, 1), (0, 0)))
    cols = _patches(xp, h, w).reshape(h * w, 9 * cin)
    kmat = kernel.data.reshape(9 * cin, cout)
    out = (cols @ kmat + bias.data).reshape(h, w, cout)

    def backward(g):
        g2 = g.reshape(h * w, cout)
        gk = (cols.T @ g2).reshape(kernel.shape)
        gcols = (g2 @ kmat.T).reshape(h, w, 9, cin)
        gxp = np.zeros_like(xp)
        for k in range(9):
            dy, dx = divmod(k, 3)
            gxp[dy:dy + h, dx:dx + w] += gcols[:, :, k]
        return gxp[1:-1, 1:-1], gk, g2.sum(axis=0)

    return make(out, (x, kernel, bias), backward, "conv3x3")


def prelu(x, slope):
    """max(x, 0) + slope * min(x, 0) with a learnable scalar slope."""
    x, slope = as_tensor(x), as_tensor(slope)
    neg = x.data < 0
    out = np.where(neg, slope.data * x.data, x.data)
    return make(
        out,
        (x, slope),
        lambda g: (np.where(neg, slope.data * g, g), np.sum(g * x.data * neg).reshape(slope.shape)),
        "prelu",
    )


def leaky_relu(x, slope=0.2):
    x = as_tensor(x)
    neg = x.data < 0
    return make(
        np.where(neg, slope * x.data, x.data),
        (x,),
        lambda g: (np.where(neg, slope * g, g),),
        "leaky_relu",
    )


def elu(x, alpha=1.0):
    x = as_tensor(x)
    neg = x.data < 0
    em = alpha * np.expm1(np.minimum(x.data, 0.0))
    out = np.where(neg, em, x.data)
    return make(out, (x,), lambda g: (np.where(neg, g * (em + alpha), g),), "elu")


def _softmax(z, axis):
    z = z - z.max(axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def _softmax_backward(y, g, axis):
    return y * (g - (g * y).sum(axis=axis, keepdims=True))


def softmax(x, axis=-1):
    x = as_tensor(x)
    y = _softmax(x.data, axis)
    return make(y, (x,), lambda g: (_softmax_backward(y, g, axis),), "softmax")


def masked_softmax(x, mask, axis=-1):
    """Softmax restricted to entries where ``mask`` is true; others are 0.

    Every slice along ``axis`` must contain at least one unmasked entry.
    """
    x = as_tensor(x)
    mask = np.asarray(mask, dtype=bool)
    if not np.all(mask.any(axis=axis)):
        raise ValueError("masked_softmax: a slice has no admissible entry")
    z = np.where(mask, x.data, -np.inf)
    z = z - z.max(axis=axis, keepdims=True)
    e = np.where(mask, np.exp(z), 0.0)
    y = e / e.sum(axis=axis, keepdims=True)
    return make(y, (x,), lambda g: (_softmax_backward(y, g, axis),), "masked_softmax")


@dataclass
class BatchNormState:
    """Running statistics of one batch-norm layer (not trainable)."""

    mean: np.ndarray
    var: np.ndarray
    momentum: float = 0.1
    eps: float = 1e-5

    @classmethod
    def create(cls, channels, momentum=0.1, eps=1e-5):
        return cls(np.zeros(channels), np.ones(channels), momentum, eps)


def batchnorm(x, gamma, beta, state, training=True):
    """Per-channel normalisation over every leading position.

    In training mode the whole input is the batch: statistics come from it and
    the running estimates are updated (unbiased variance, as is conventional).
    In eval mode the running estimates are used.
    """
    x, gamma, beta = as_tensor(x), as_tensor(gamma), as_tensor(beta)
    c = x.shape[-1]
    if gamma.shape != (c,) or beta.shape != (c,):
        raise ValueError(f"batchnorm parameters must have length {c}")
    flat = x.data.reshape(-1, c)
    n = flat.shape[0]
    if training:
        mu = flat.mean(axis=0)
        var = flat.var(axis=0)
        m = state.momentum
        unbiased = var * n / max(n - 1, 1)
        state.mean = (1 - m) * state.mean + m * mu
        state.var = (1 - m) * state.var + m * unbiased
    else:
        mu, var = state.mean, state.var
    inv = 1.0 / np.sqrt(var + state.eps)
    xhat = (flat - mu) * inv
    out = (xhat * gamma.data + beta.data).reshape(x.shape)

    def backward(g):
        g2 = g.reshape(-1, c)
        ggamma = (g2 * xhat).sum(axis=0)
        gbeta = g2.sum(axis=0)
        gx_hat = g2 * gamma.data
        if training:
            gx = inv / n * (n * gx_hat - gx_hat.sum(axis=0) - xhat * (gx_hat * xhat).sum(axis=0))
        else:
            gx = gx_hat * inv
        return gx.reshape(x.shape), ggamma, gbeta

    return make(out, (x, gamma, beta), backward, "batchnorm")


def masked_cross_entropy(probs, labels, mask, floor=1e-12):
    """Mean negative log-probability of the true class over masked pixels.

    ``probs`` is (..., n_classes), ``labels`` integer class indices with the
    leading shape and ``mask`` selects the N contributing positions.
    """
    probs = as_tensor(probs)
    labels = np.asarray(labels)
    mask = np.asarray(mask, dtype=bool)
    n = int(mask.sum())
    if n == 0:
        raise ValueError("cross-entropy over an empty mask (N = 0)")
    ncls = probs.shape[-1]
    p2 = probs.data.reshape(-1, ncls)
    rows = np.flatnonzero(mask.reshape(-1))
    cls = labels.reshape(-1)[rows].astype(int)
    picked = p2[rows, cls]
    clamped = np.maximum(picked, floor)
    out = -np.log(clamped).sum() / n

    def backward(g):
        gp = np.zeros_like(p2)
        gp[rows, cls] = -g / (n * clamped) * (picked >= floor)
        return (gp.reshape(probs.shape),)

    return make(np.array(out), (probs,), backward, "cross_entropy")
