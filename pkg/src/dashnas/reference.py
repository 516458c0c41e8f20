"""Slow, obviously-correct oracles used by the test-suite and ``verify``.

Nothing here shares code with the fast paths it checks.
"""

from __future__ import annotations

import numpy as np


def dft(x) -> np.ndarray:
    """O(n^2) DFT by direct summation, ``X[j] = sum_t x[t] exp(-2 pi i j t / n)``."""
    x = np.asarray(x, dtype=np.complex128)
    n = x.shape[-1]
    out = np.zeros(x.shape, dtype=np.complex128)
    for j in range(n):
        for t in range(n):
            out[..., j] += x[..., t] * np.exp(-2j * np.pi * j * t / n)
    return out


def circular_conv(x, w) -> np.ndarray:
    """Nested-loop circular convolution of a length-n signal with a kernel of any length."""
    x = np.asarray(x, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    n = len(x)
    out = np.zeros(n)
    for t in range(n):
        for j in range(len(w)):
            out[t] += w[j] * x[(t - j) % n]
    return out


def conv1d(x, w, dilation: int = 1, padding: str = "circular") -> np.ndarray:
    """Multi-channel 1-D dilated convolution, x [B, Ci, n], w [Co, Ci, k]."""
    x = np.asarray(x, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    b, ci, n = x.shape
    co, _, k = w.shape
    out = np.zeros((b, co, n))
    for bi in range(b):
        for o in range(co):
            for i in range(ci):
                for t in range(n):
                    acc = 0.0
                    for j in range(k):
                        s = t - j * dilation
                        if padding == "circular":
                            acc += w[o, i, j] * x[bi, i, s % n]
                        elif s >= 0:
                            acc += w[o, i, j] * x[bi, i, s]
                    out[bi, o, t] += acc
    return out


def conv2d(x, w, dilation: int = 1, padding: str = "circular") -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    b, ci, n1, n2 = x.shape
    co, _, k, _ = w.shape
    out = np.zeros((b, co, n1, n2))
    for t1 in range(n1):
        for t2 in range(n2):
            for j1 in range(k):
                for j2 in range(k):
                    s1, s2 = t1 - j1 * dilation, t2 - j2 * dilation
                    if padding == "circular":
                        s1, s2 = s1 % n1, s2 % n2
                    elif s1 < 0 or s2 < 0:
                        continue
                    out[:, :, t1, t2] += np.einsum("oi,bi->bo", w[:, :, j1, j2], x[:, :, s1, s2])
    return out


def aggconv(x, weights: dict, alpha, ops, padding: str = "circular") -> np.ndarray:
    """Sum over candidates of alpha * Conv_{k,d}(x), each candidate by brute force."""
    alpha = np.asarray(alpha, dtype=np.float64)
    conv = conv1d if np.ndim(x) == 3 else conv2d
    total = None
    for a, (k, d) in zip(alpha, ops):
        y = a * conv(x, weights[(k, d)], d, padding)
        total = y if total is None else total + y
    return total


def op_counts(strategy: str, c_in: int, c_out: int, n: int, kernel_sizes, dilations) -> tuple:
    """Non-FFT MULT/ADD counts by tallying each algorithm step separately.

    Returns ``(mults, adds)``; for the dash strategy only the non-FFT part.
    """
    cands = [(k, d) for k in kernel_sizes for d in dilations]
    d_bar = max((k - 1) * d + 1 for k, d in cands)
    mults = adds = 0
    if strategy == "mixed-results":
        for k, _ in cands:
            mults += c_in * c_out * k * n  # candidate convolution
            adds += c_in * c_out * k * n
            mults += c_out * n  # alpha scaling of its output
            adds += c_out * n  # accumulation into the sum
        return mults, adds
    for k, _ in cands:
        mults += c_in * c_out * k  # alpha * kernel
        adds += c_in * c_out * d_bar  # padded kernel added into the merge
    if strategy == "mixed-weights":
        mults += c_in * c_out * d_bar * n
        adds += c_in * c_out * d_bar * n
        return mults, adds
    mults += c_in * c_out * n  # spectral products
    adds += c_in * c_out * n  # channel summation
    return mults, adds
