"""Radix-2 FFT with cached twiddle tables, and FFT-based circular convolution.

Transforms act along the last axis and are vectorized over all leading axes.
Forward transforms are unnormalized, ``X[j] = sum_t x[t] exp(-2 pi i j t / n)``;
the inverse carries the ``1/n`` factor.
"""

from __future__ import annotations

import threading
from collections import Counter
from contextlib import contextmanager
from functools import lru_cache

import numpy as np

_counters = threading.local()
_BLOCK_ELEMENTS = 1 << 15  # complex entries per transform block (512 KiB)


def is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def next_power_of_two(n: int) -> int:
    return 1 if n <= 1 else 1 << (int(n) - 1).bit_length()


class FftPlan:
    """Bit-reversal permutation and per-stage twiddles for one transform length."""

    def __init__(self, n: int):
        if not is_power_of_two(n):
            raise ValueError(f"FFT length must be a power of two, got {n}")
        self.n = n
        bits = n.bit_length() - 1
        idx = np.arange(n)
        rev = np.zeros(n, dtype=np.int64)
        for b in range(bits):
            rev |= ((idx >> b) & 1) << (bits - 1 - b)
        self.bitrev = rev
        self.twiddles = []
        h = 1
        while h < n:
            self.twiddles.append(np.exp(-2j * np.pi * np.arange(h) / (2 * h)))
            h *= 2
        for t in self.twiddles:
            t.setflags(write=False)
        self.bitrev.setflags(write=False)

    def _transform(self, x: np.ndarray, inverse: bool) -> np.ndarray:
        x = np.asarray(x, dtype=np.complex128)
        rows = int(np.prod(x.shape[:-1]))
        block = max(1, _BLOCK_ELEMENTS // self.n)
        if rows <= block:
            return self._transform_block(x, inverse)
        # keep each stage's working set cache-sized
        flat = x.reshape(rows, self.n)
        out = np.empty_like(flat)
        for start in range(0, rows, block):
            out[start:start + block] = self._transform_block(flat[start:start + block], inverse)
        return out.reshape(x.shape)

    def _transform_block(self, x: np.ndarray, inverse: bool) -> np.ndarray:
        lead = x.shape[:-1]
        a = x[..., self.bitrev]
        out = np.empty_like(a)
        h = 1
        for tw in self.twiddles:
            shape = lead + (self.n // (2 * h), 2, h)
            blocks, dest = a.reshape(shape), out.reshape(shape)
            odd = blocks[..., 1, :]
            if h > 1:
                odd = odd * (tw.conj() if inverse else tw)
            np.add(blocks[..., 0, :], odd, out=dest[..., 0, :])
            np.subtract(blocks[..., 0, :], odd, out=dest[..., 1, :])
            a, out = out, a
            h *= 2
        if inverse:
            a /= self.n
        return a

    def forward(self, x: np.ndarray) -> np.ndarray:
        _check_length(x, self.n)
        return self._transform(x, inverse=False)

    def inverse(self, X: np.ndarray) -> np.ndarray:
        _check_length(X, self.n)
        return self._transform(X, inverse=True)


def _check_length(x: np.ndarray, n: int) -> None:
    if np.shape(x)[-1] != n:
        raise ValueError(f"buffer length {np.shape(x)[-1]} does not match plan length {n}")


@lru_cache(maxsize=64)
def get_plan(n: int) -> FftPlan:
    return FftPlan(n)


@contextmanager
def count_transforms():
    """Collect the number of 1-D (or n-D) transforms issued inside the block, by tag."""
    stack = getattr(_counters, "stack", None)
    if stack is None:
        stack = _counters.stack = []
    c = Counter()
    stack.append(c)
    try:
        yield c
    finally:
        stack.remove(c)


def _record(tag: str, count: int) -> None:
    for c in getattr(_counters, "stack", ()):
        c[tag] += count


def fft(x: np.ndarray, plan: FftPlan | None = None) -> np.ndarray:
    x = np.asarray(x)
    plan = plan or get_plan(x.shape[-1])
    return plan.forward(x)


def ifft(X: np.ndarray, plan: FftPlan | None = None) -> np.ndarray:
    X = np.asarray(X)
    plan = plan or get_plan(X.shape[-1])
    return plan.inverse(X)


def fftn(x: np.ndarray, ndim: int, tag: str | None = None) -> np.ndarray:
    """Transform the trailing ``ndim`` axes; one counted transform per leading index."""
    if tag is not None:
        _record(tag, int(np.prod(x.shape[:-ndim])))
    out = fft(x)
    for ax in range(2, ndim + 1):
        out = np.moveaxis(fft(np.moveaxis(out, -ax, -1)), -1, -ax)
    return out


def ifftn(X: np.ndarray, ndim: int, tag: str | None = None) -> np.ndarray:
    if tag is not None:
        _record(tag, int(np.prod(X.shape[:-ndim])))
    out = ifft(X)
    for ax in range(2, ndim + 1):
        out = np.moveaxis(ifft(np.moveaxis(out, -ax, -1)), -1, -ax)
    return out


@lru_cache(maxsize=64)
def _real_tables(m: int) -> tuple:
    """Mirror index ``(h - k) mod h`` and the split twiddles for length-m real transforms."""
    h = m // 2
    tw = np.exp(-2j * np.pi * np.arange(h) / m)
    mirror = (-np.arange(h)) % h
    fwd, inv = -0.5j * tw, 0.5j * np.conj(tw)
    for t in (mirror, fwd, inv):
        t.setflags(write=False)
    return mirror, fwd, inv


def rfft(x: np.ndarray) -> np.ndarray:
    """Spectrum bins ``0..m/2`` of a real signal, via one complex transform of length m/2."""
    x = np.asarray(x, dtype=np.float64)
    m = x.shape[-1]
    if m < 2:
        return fft(x)[..., : m // 2 + 1]
    h = m // 2
    mirror, fwd, _ = _real_tables(m)
    z = np.empty(x.shape[:-1] + (h,), dtype=np.complex128)
    z.real, z.imag = x[..., 0::2], x[..., 1::2]
    Z = fft(z)
    Zr = np.conj(Z[..., mirror])
    even = Z + Zr
    even *= 0.5
    odd = Z - Zr
    odd *= fwd
    out = np.empty(x.shape[:-1] + (h + 1,), dtype=np.complex128)
    np.add(even, odd, out=out[..., :h])
    out[..., h] = even[..., 0] - odd[..., 0]
    return out


def irfft(X: np.ndarray, m: int) -> np.ndarray:
    """Real signal of length ``m`` from its bins ``0..m/2`` (inverse of :func:`rfft`)."""
    X = np.asarray(X, dtype=np.complex128)
    if X.shape[-1] != m // 2 + 1:
        raise ValueError(f"{X.shape[-1]} bins do not match length {m}")
    if m < 2:
        return ifft(X).real
    h = m // 2
    _, _, inv = _real_tables(m)
    Xr = np.conj(X[..., h:0:-1])  # conj(X[h - k]) for k = 0..h-1
    Xk = X[..., :h]
    even = Xk + Xr
    even *= 0.5
    odd = Xk - Xr
    odd *= inv
    even += odd
    z = ifft(even)
    out = np.empty(X.shape[:-1] + (m,))
    out[..., 0::2] = z.real
    out[..., 1::2] = z.imag
    return out


def rfftn(x: np.ndarray, ndim: int, tag: str | None = None) -> np.ndarray:
    """Real transform over the trailing ``ndim`` axes; the last axis keeps bins ``0..m/2``."""
    if tag is not None:
        _record(tag, int(np.prod(x.shape[:-ndim])))
    out = rfft(x)
    for ax in range(2, ndim + 1):
        out = np.moveaxis(fft(np.moveaxis(out, -ax, -1)), -1, -ax)
    return out


def irfftn(X: np.ndarray, ndim: int, m: int, tag: str | None = None) -> np.ndarray:
    """Inverse of :func:`rfftn`; ``m`` is the full length of the last axis."""
    if tag is not None:
        _record(tag, int(np.prod(X.shape[:-ndim])))
    for ax in range(2, ndim + 1):
        X = np.moveaxis(ifft(np.moveaxis(X, -ax, -1)), -1, -ax)
    return irfft(X, m)


def circular_conv_fft(x: np.ndarray, w_padded: np.ndarray) -> np.ndarray:
    """Circular convolution of two equal-length real signals via the FFT."""
    x = np.asarray(x, dtype=np.float64)
    w_padded = np.asarray(w_padded, dtype=np.float64)
    if x.shape[-1] != w_padded.shape[-1]:
        raise ValueError(f"length mismatch: {x.shape[-1]} vs {w_padded.shape[-1]}")
    plan = get_plan(x.shape[-1])
    return plan.inverse(plan.forward(x) * plan.forward(w_padded)).real
