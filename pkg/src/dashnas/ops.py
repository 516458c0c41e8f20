"""Differentiable elementwise, reduction, and loss operations.

No general broadcasting: binary ops require equal shapes, except the explicit
per-channel helpers (``add_channel``, ``mul_channel``) which align a length-C
vector with axis 1.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .tensor import Tensor


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _check_same(a: Tensor, b: Tensor, op: str) -> None:
    if a.shape != b.shape:
        raise ValueError(f"{op}: shape mismatch {a.shape} vs {b.shape}")


def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _check_same(a, b, "add")
    return Tensor.from_op(a.data + b.data, (a, b), lambda g: (g, g), "add")


def sub(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _check_same(a, b, "sub")
    return Tensor.from_op(a.data - b.data, (a, b), lambda g: (g, -g), "sub")


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _check_same(a, b, "mul")
    ad, bd = a.data, b.data
    return Tensor.from_op(ad * bd, (a, b), lambda g: (g * bd, g * ad), "mul")


def scale(a: Tensor, s: float) -> Tensor:
    return Tensor.from_op(a.data * s, (a,), lambda g: (g * s,), "scale")


def add_n(tensors: Sequence[Tensor]) -> Tensor:
    """Sum equally shaped tensors, left to right."""
    if not tensors:
        raise ValueError("add_n needs at least one tensor")
    for t in tensors[1:]:
        _check_same(tensors[0], t, "add_n")
    out = tensors[0].data.copy()
    for t in tensors[1:]:
        out += t.data
    return Tensor.from_op(out, tuple(tensors), lambda g: (g,) * len(tensors), "add_n")


def weighted_sum(tensors: Sequence[Tensor], weights: Tensor, index: Sequence[int] | None = None) -> Tensor:
    """Return ``sum_i weights[index[i]] * tensors[i]`` with gradients to both sides."""
    if index is None:
        index = range(len(tensors))
    index = list(index)
    if len(index) != len(tensors) or not tensors:
        raise ValueError("weighted_sum: one weight index per tensor required")
    if weights.ndim != 1:
        raise ValueError("weighted_sum: weights must be a vector")
    w = weights.data
    out = np.zeros_like(tensors[0].data)
    for t, j in zip(tensors, index):
        _check_same(tensors[0], t, "weighted_sum")
        out += w[j] * t.data

    def backward(g):
        gw = np.zeros_like(w)
        grads = []
        for t, j in zip(tensors, index):
            gw[j] += np.vdot(g, t.data)
            grads.append(g * w[j])
        return (*grads, gw)

    return Tensor.from_op(out, (*tensors, weights), backward, "weighted_sum")


def _channel_shape(x: Tensor, v: Tensor) -> tuple:
    if v.ndim != 1 or x.ndim < 2 or x.shape[1] != v.shape[0]:
        raise ValueError(f"per-channel op: vector {v.shape} does not match axis 1 of {x.shape}")
    return (1, -1) + (1,) * (x.ndim - 2)


def _reduce_to_channel(g: np.ndarray) -> np.ndarray:
    axes = (0,) + tuple(range(2, g.ndim))
    return g.sum(axis=axes)


def add_channel(x: Tensor, bias: Tensor) -> Tensor:
    shape = _channel_shape(x, bias)
    return Tensor.from_op(x.data + bias.data.reshape(shape), (x, bias),
                          lambda g: (g, _reduce_to_channel(g)), "add_channel")


def mul_channel(x: Tensor, gain: Tensor) -> Tensor:
    shape = _channel_shape(x, gain)
    xd, gd = x.data, gain.data.reshape(shape)
    return Tensor.from_op(xd * gd, (x, gain),
                          lambda g: (g * gd, _reduce_to_channel(g * xd)), "mul_channel")


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ValueError(f"matmul: incompatible shapes {a.shape} @ {b.shape}")
    ad, bd = a.data, b.data
    return Tensor.from_op(ad @ bd, (a, b), lambda g: (g @ bd.T, ad.T @ g), "matmul")


def add_row(x: Tensor, bias: Tensor) -> Tensor:
    """Add a feature-bias vector to every row of a 2-D tensor."""
    if x.ndim != 2 or bias.shape != (x.shape[1],):
        raise ValueError(f"add_row: bias {bias.shape} does not match {x.shape}")
    return Tensor.from_op(x.data + bias.data, (x, bias), lambda g: (g, g.sum(axis=0)), "add_row")


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0
    return Tensor.from_op(np.where(mask, x.data, 0.0), (x,), lambda g: (g * mask,), "relu")


def square(x: Tensor) -> Tensor:
    xd = x.data
    return Tensor.from_op(xd * xd, (x,), lambda g: (2.0 * xd * g,), "square")


def total(x: Tensor) -> Tensor:
    shape = x.shape
    return Tensor.from_op(np.sum(x.data), (x,), lambda g: (np.full(shape, float(g)),), "sum")


def mean(x: Tensor) -> Tensor:
    shape, n = x.shape, x.size
    return Tensor.from_op(np.mean(x.data), (x,), lambda g: (np.full(shape, float(g) / n),), "mean")


def reshape(x: Tensor, shape) -> Tensor:
    old = x.shape
    return Tensor.from_op(x.data.reshape(shape), (x,), lambda g: (g.reshape(old),), "reshape")


def spatial_mean(x: Tensor) -> Tensor:
    """Global average pool: [B, C, *spatial] -> [B, C]."""
    axes = tuple(range(2, x.ndim))
    count = int(np.prod([x.shape[a] for a in axes]))
    shape = x.shape

    def backward(g):
        return (np.broadcast_to(g.reshape(g.shape + (1,) * len(axes)), shape) / count,)

    return Tensor.from_op(x.data.mean(axis=axes), (x,), backward, "spatial_mean")


def subsample(x: Tensor, stride: int) -> Tensor:
    """Keep every ``stride``-th position along each spatial axis."""
    if stride == 1:
        return x
    sl = (slice(None), slice(None)) + (slice(None, None, stride),) * (x.ndim - 2)
    shape = x.shape

    def backward(g):
        out = np.zeros(shape)
        out[sl] = g
        return (out,)

    return Tensor.from_op(x.data[sl].copy(), (x,), backward, "subsample")


def dropout(x: Tensor, p: float, rng: np.random.Generator) -> Tensor:
    """Inverted dropout; identity when ``p == 0``."""
    if p <= 0.0:
        return x
    if p >= 1.0:
        raise ValueError("dropout rate must be < 1")
    mask = (rng.random(x.shape) >= p) / (1.0 - p)
    return Tensor.from_op(x.data * mask, (x,), lambda g: (g * mask,), "dropout")


def softmax(logits: Tensor, temperature: float = 1.0) -> Tensor:
    """Softmax of a vector at the given temperature."""
    if logits.ndim != 1:
        raise ValueError("softmax expects a vector")
    z = logits.data / temperature
    e = np.exp(z - z.max())
    p = e / e.sum()

    def backward(g):
        return ((p * (g - np.dot(g, p))) / temperature,)

    return Tensor.from_op(p, (logits,), backward, "softmax")


def log_softmax(x: Tensor) -> Tensor:
    """Row-wise log-softmax of a [B, C] tensor."""
    z = x.data - x.data.max(axis=1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=1, keepdims=True))
    out = z - lse
    p = np.exp(out)

    def backward(g):
        return (g - p * g.sum(axis=1, keepdims=True),)

    return Tensor.from_op(out, (x,), backward, "log_softmax")


def cross_entropy(logits: Tensor, labels) -> Tensor:
    """Mean negative log-likelihood of integer ``labels`` under log-softmax(logits)."""
    labels = np.asarray(labels, dtype=np.int64)
    b, c = logits.shape
    if labels.shape != (b,):
        raise ValueError("cross_entropy: one label per row required")
    if labels.min() < 0 or labels.max() >= c:
        raise ValueError(f"cross_entropy: label out of range [0, {c})")
    logp = log_softmax(logits)
    rows = np.arange(b)
    picked = logp.data[rows, labels]

    def backward(g):
        out = np.zeros((b, c))
        out[rows, labels] = -float(g) / b
        return (out,)

    return Tensor.from_op(-picked.mean(), (logp,), backward, "nll")


def mse(pred: Tensor, target) -> Tensor:
    target = np.asarray(target.data if isinstance(target, Tensor) else target, dtype=np.float64)
    if target.shape != pred.shape:
        raise ValueError(f"mse: shape mismatch {pred.shape} vs {target.shape}")
    diff = pred.data - target
    n = diff.size
    return Tensor.from_op(np.mean(diff * diff), (pred,), lambda g: (2.0 * float(g) * diff / n,), "mse")


def bce_with_logits(logits: Tensor, targets) -> Tensor:
    """Mean binary cross-entropy on logits, computed in the stable softplus form."""
    t = np.asarray(targets.data if isinstance(targets, Tensor) else targets, dtype=np.float64)
    if t.shape != logits.shape:
        raise ValueError(f"bce_with_logits: shape mismatch {logits.shape} vs {t.shape}")
    z = logits.data
    loss = np.maximum(z, 0.0) - z * t + np.log1p(np.exp(-np.abs(z)))
    sig = 1.0 / (1.0 + np.exp(-z))
    n = z.size
    return Tensor.from_op(loss.mean(), (logits,), lambda g: (float(g) * (sig - t) / n,), "bce_with_logits")


def batch_norm(x: Tensor, gain: Tensor, shift: Tensor, eps: float = 1e-5,
               stats: tuple | None = None) -> tuple:
    """Per-channel normalization over batch and spatial axes, then affine.

    With ``stats=(mean, var)`` those running values are used instead of batch
    statistics (evaluation mode). Returns ``(output, batch_mean, batch_var)``
    where the batch moments are biased estimates (``None`` in evaluation mode).
    """
    shape = _channel_shape(x, gain)
    axes = (0,) + tuple(range(2, x.ndim))
    xd = x.data
    count = xd.size // xd.shape[1]
    if stats is None:
        mu = xd.mean(axis=axes)
        var = xd.var(axis=axes)
    else:
        mu, var = stats
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (xd - mu.reshape(shape)) * inv.reshape(shape)
    gd, bd = gain.data.reshape(shape), shift.data.reshape(shape)
    out = xhat * gd + bd
    training = stats is None

    def backward(g):
        g_gain = _reduce_to_channel(g * xhat)
        g_shift = _reduce_to_channel(g)
        dxhat = g * gd
        if training:
            s1 = _reduce_to_channel(dxhat).reshape(shape)
            s2 = _reduce_to_channel(dxhat * xhat).reshape(shape)
            dx = inv.reshape(shape) / count * (count * dxhat - s1 - xhat * s2)
        else:
            dx = dxhat * inv.reshape(shape)
        return dx, g_gain, g_shift

    y = Tensor.from_op(out, (x, gain, shift), backward, "batch_norm")
    return (y, mu, var) if training else (y, None, None)
