"""Aggregated convolution over a (kernel size, dilation) search space.

The mixture ``sum_{k,d} alpha[k,d] * Conv_{k,d}(x)`` can be computed three ways:

* mixed-results: one dilated convolution per candidate, then a weighted sum;
* mixed-weights: merge the alpha-weighted, dilated, zero-padded kernels, then
  convolve once with the merged kernel;
* dash: merge as in mixed-weights, then convolve through the FFT, transforming
  each input channel once and summing channels in the frequency domain.

Convolution uses the true-convolution orientation ``y[t] = sum_j w[j] x[t - j*d]``.
``padding="circular"`` wraps indices modulo the input length, which makes the
three strategies algebraically identical; ``padding="causal"`` treats positions
before the start as zero.
"""

from __future__ import annotations

import json
import math
from contextlib import contextmanager
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Optional

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from . import ops, spectral
from .tensor import Tensor

PADDINGS = ("circular", "causal")

# element budget for one materialized window block in the direct convolution
_WINDOW_BUDGET = 1 << 22

_faults: set = set()


class MixStrategy(str, Enum):
    MIXED_RESULTS = "mixed-results"
    MIXED_WEIGHTS = "mixed-weights"
    DASH = "dash"


class DilationImpl(str, Enum):
    ZERO_INSERTION = "zero-insertion"
    KRONECKER = "kronecker"


@contextmanager
def inject_fault(name: str):
    """Test hook. ``"orientation"`` makes the direct convolution use correlation orientation."""
    _faults.add(name)
    try:
        yield
    finally:
        _faults.discard(name)


@dataclass(frozen=True)
class SearchSpace:
    """Candidate kernel sizes K and dilations D; candidates are K x D in (k, d) order."""

    kernel_sizes: tuple
    dilations: tuple
    allow_even: bool = False

    def __post_init__(self):
        ks = tuple(sorted({int(k) for k in self.kernel_sizes}))
        ds = tuple(sorted({int(d) for d in self.dilations}))
        if not ks or not ds:
            raise ValueError("search space needs at least one kernel size and one dilation")
        if ks[0] < 1 or ds[0] < 1:
            raise ValueError("kernel sizes and dilations must be >= 1")
        if not self.allow_even and any(k % 2 == 0 for k in ks):
            raise ValueError(f"even kernel sizes {ks} need allow_even=True")
        object.__setattr__(self, "kernel_sizes", ks)
        object.__setattr__(self, "dilations", ds)

    @property
    def ops(self) -> list:
        return [(k, d) for k in self.kernel_sizes for d in self.dilations]

    @property
    def size(self) -> int:
        return len(self.kernel_sizes) * len(self.dilations)

    @property
    def k_bar(self) -> int:
        return len(self.dilations) * sum(self.kernel_sizes)

    @property
    def d_bar(self) -> int:
        return max((k - 1) * d + 1 for k, d in self.ops)

    def index(self, k: int, d: int) -> int:
        return self.kernel_sizes.index(k) * len(self.dilations) + self.dilations.index(d)

    def to_dict(self) -> dict:
        return {"K": list(self.kernel_sizes), "D": list(self.dilations)}

    @classmethod
    def from_dict(cls, doc: dict) -> "SearchSpace":
        return cls(tuple(doc["K"]), tuple(doc["D"]), allow_even=bool(doc.get("allow_even", False)))


def effective_size(k: int, d: int) -> int:
    return (k - 1) * d + 1


class KernelBank:
    """Undilated weights ``w[k, d]`` of shape [c_out, c_in, k] (or [c_out, c_in, k, k])."""

    def __init__(self, weights: dict, c_in: int, c_out: int, ndim: int = 1):
        self.weights = dict(weights)
        self.c_in, self.c_out, self.ndim = c_in, c_out, ndim
        for (k, _), w in self.weights.items():
            if w.shape != (c_out, c_in) + (k,) * ndim:
                raise ValueError(f"kernel ({k}) has shape {w.shape}")

    @classmethod
    def initialize(cls, space: SearchSpace, c_in: int, c_out: int, rng: np.random.Generator,
                   ndim: int = 1) -> "KernelBank":
        """Fan-in uniform init, bound ``1/sqrt(c_in * k)`` per candidate."""
        weights = {}
        for k, d in space.ops:
            bound = 1.0 / math.sqrt(c_in * k)
            data = rng.uniform(-bound, bound, size=(c_out, c_in) + (k,) * ndim)
            weights[(k, d)] = Tensor(data, requires_grad=True, name=f"w[{k},{d}]")
        return cls(weights, c_in, c_out, ndim)

    def __getitem__(self, key) -> Tensor:
        return self.weights[key]

    def parameters(self) -> list:
        return list(self.weights.values())

    def check_space(self, space: SearchSpace) -> None:
        if set(self.weights) != set(space.ops):
            raise ValueError("kernel bank entries do not match the search space")


class ArchParams:
    """Architecture logits for one layer plus the simplex relaxation settings."""

    def __init__(self, size: int, temperature: float = 1.0, mode: str = "softmax",
                 seed: int = 0, logits: Optional[np.ndarray] = None):
        if temperature <= 0:
            raise ValueError("temperature must be positive")
        if mode not in ("softmax", "gumbel_softmax"):
            raise ValueError(f"unknown relaxation mode {mode!r}")
        init = np.zeros(size) if logits is None else np.asarray(logits, dtype=np.float64)
        if init.shape != (size,):
            raise ValueError("logits length must equal the number of candidates")
        self.logits = Tensor(init, requires_grad=True, name="alpha_logits")
        self.temperature = temperature
        self.mode = mode
        self.rng = np.random.default_rng(seed)
        self.alpha_override: Optional[np.ndarray] = None
        # when set, reused by every forward instead of fresh per-call noise
        self.fixed_noise: Optional[np.ndarray] = None

    def draw_noise(self) -> np.ndarray:
        u = self.rng.uniform(np.finfo(float).tiny, 1.0, size=self.logits.shape)
        return -np.log(-np.log(u))

    @property
    def size(self) -> int:
        return self.logits.shape[0]


def normalize_alpha(arch: ArchParams) -> Tensor:
    """Map logits to the simplex. Gumbel mode adds Gumbel(0, 1) noise, fresh per call unless fixed."""
    if arch.alpha_override is not None:
        return Tensor(arch.alpha_override)
    z = arch.logits
    if not np.all(np.isfinite(z.data)):
        raise FloatingPointError("non-finite architecture logits")
    if arch.mode == "gumbel_softmax":
        noise = arch.fixed_noise if arch.fixed_noise is not None else arch.draw_noise()
        z = ops.add(z, Tensor(noise))
    return ops.softmax(z, arch.temperature)


def argmax_op(alpha: np.ndarray, space: SearchSpace) -> tuple:
    """Largest-weight candidate; exact ties go to the lexicographically lowest (k, d)."""
    return space.ops[int(np.argmax(alpha))]


# ---------------------------------------------------------------- dilation

def _dilate_array(w: np.ndarray, d: int, impl: DilationImpl, ndim: int) -> np.ndarray:
    if d < 1:
        raise ValueError("dilation must be >= 1")
    if d == 1:
        return w.copy()
    k = w.shape[-1]
    size = effective_size(k, d)
    if DilationImpl(impl) is DilationImpl.KRONECKER:
        pattern = np.zeros((d,) * ndim)
        pattern[(0,) * ndim] = 1.0
        full = np.kron(w, pattern) + 0.0  # w * 0 gives -0.0 for negative taps; + 0.0 restores +0.0
        return full[(Ellipsis,) + (slice(0, size),) * ndim].copy()
    out = np.zeros(w.shape[:-ndim] + (size,) * ndim)
    out[(Ellipsis,) + (slice(None, None, d),) * ndim] = w
    return out


def dilate_kernel(w: Tensor, d: int, impl: DilationImpl = DilationImpl.ZERO_INSERTION,
                  ndim: int = 1) -> Tensor:
    """Spread ``k`` taps to positions 0, d, ..., (k-1)d of a length-((k-1)d+1) kernel.

    Both implementations return identical arrays: Kronecker computes ``w (x) P``
    with ``P`` the d-long (or d x d) pattern holding a single leading 1, then trims
    the trailing ``d - 1`` zeros per axis.
    """
    out = _dilate_array(w.data, d, impl, ndim)
    sl = (Ellipsis,) + (slice(None, None, d),) * ndim
    return Tensor.from_op(out, (w,), lambda g: (np.ascontiguousarray(g[sl]),), "dilate")


def pad_kernel(w: Tensor, size: int, ndim: int = 1) -> Tensor:
    """Append zeros at the end of each spatial axis up to ``size``."""
    k = w.shape[-1]
    if k == size:
        return w
    if k > size:
        raise ValueError(f"cannot pad kernel of size {k} to {size}")
    out = np.zeros(w.shape[:-ndim] + (size,) * ndim)
    sl = (Ellipsis,) + (slice(0, k),) * ndim
    out[sl] = w.data
    return Tensor.from_op(out, (w,), lambda g: (np.ascontiguousarray(g[sl]),), "pad_kernel")


def flip_kernel(w: Tensor, ndim: int = 1) -> Tensor:
    sl = (Ellipsis,) + (slice(None, None, -1),) * ndim
    return Tensor.from_op(w.data[sl].copy(), (w,), lambda g: (g[sl].copy(),), "flip")


# ------------------------------------------------------- direct convolution

def _pad_spatial(a: np.ndarray, amount: int, ndim: int, padding: str, front: bool) -> np.ndarray:
    if amount == 0:
        return a
    width = [(0, 0)] * (a.ndim - ndim) + [(amount, 0) if front else (0, amount)] * ndim
    if padding == "circular":
        return np.pad(a, width, mode="wrap")
    return np.pad(a, width)


def _tap_windows(a: np.ndarray, size: int, d: int, ndim: int) -> np.ndarray:
    """View [B, C, *n, *k] where trailing index u picks padded position t + u*d."""
    v = sliding_window_view(a, (size,) * ndim, axis=tuple(range(-ndim, 0)))
    return v[(Ellipsis,) + (slice(None, None, d),) * ndim]


def _batch_chunks(batch: int, per_item: int):
    step = max(1, _WINDOW_BUDGET // max(per_item, 1))
    for s in range(0, batch, step):
        yield slice(s, min(batch, s + step))


def _check_padding(padding: str) -> None:
    if padding not in PADDINGS:
        raise ValueError(f"padding must be one of {PADDINGS}, got {padding!r}")


def conv_direct(x: Tensor, w: Tensor, dilation: int = 1, padding: str = "circular") -> Tensor:
    """Direct (tap-by-tap) dilated convolution; ``x`` [B, Ci, *n], ``w`` [Co, Ci, *k]."""
    _check_padding(padding)
    if "orientation" in _faults:
        w = flip_kernel(w, w.ndim - 2)
    ndim = w.ndim - 2
    if x.ndim != ndim + 2 or x.shape[1] != w.shape[1]:
        raise ValueError(f"conv: input {x.shape} incompatible with kernel {w.shape}")
    k, d = w.shape[-1], dilation
    span = effective_size(k, d)
    batch, c_in = x.shape[:2]
    spatial = x.shape[2:]
    c_out = w.shape[0]
    xd, wd = x.data, w.data
    wflip = wd[(Ellipsis,) + (slice(None, None, -1),) * ndim]
    win_axes = list(range(2 + ndim, 2 + 2 * ndim))
    k_axes = list(range(2, 2 + ndim))
    sp_axes = list(range(2, 2 + ndim))
    per_item = c_in * int(np.prod(spatial)) * k ** ndim

    xp = _pad_spatial(xd, span - 1, ndim, padding, front=True)
    out = np.empty((batch, c_out) + spatial)
    for sl in _batch_chunks(batch, per_item):
        win = _tap_windows(xp[sl], span, d, ndim)
        out[sl] = np.moveaxis(np.tensordot(win, wflip, axes=([1] + win_axes, [1] + k_axes)), -1, 1)

    def backward(g):
        gw = np.zeros_like(wd)
        gx = np.empty_like(xd)
        gp = _pad_spatial(g, span - 1, ndim, padding, front=False)
        for sl in _batch_chunks(batch, per_item * max(1, -(-c_out // c_in))):
            win = _tap_windows(xp[sl], span, d, ndim)
            gw += np.tensordot(g[sl], win, axes=([0] + sp_axes, [0] + sp_axes))
            gwin = _tap_windows(gp[sl], span, d, ndim)
            gx[sl] = np.moveaxis(np.tensordot(gwin, wd, axes=([1] + win_axes, [0] + k_axes)), -1, 1)
        return gx, gw[(Ellipsis,) + (slice(None, None, -1),) * ndim].copy()

    return Tensor.from_op(out, (x, w), backward, "conv_direct")


# ------------------------------------------------------ spectral convolution

def _fold_axis(a: np.ndarray, n: int, axis: int, shift: int) -> np.ndarray:
    """Sum entries of ``a`` into length ``n`` along ``axis``; entry i lands at (i + shift) mod n."""
    a = np.moveaxis(a, axis, -1)
    length = a.shape[-1]
    total = shift + length
    reps = -(-total // n)
    buf = np.zeros(a.shape[:-1] + (reps * n,))
    buf[..., shift:total] = a
    return np.moveaxis(buf.reshape(a.shape[:-1] + (reps, n)).sum(axis=-2), -1, axis)


@dataclass
class _AxisPlan:
    n: int
    m: int
    offset: int
    gather: Optional[np.ndarray]


def _axis_plan(n: int, size: int, padding: str) -> _AxisPlan:
    if padding == "circular":
        size = min(size, n)  # longer kernels are folded modulo n first
        if spectral.is_power_of_two(n):
            return _AxisPlan(n, n, 0, None)
        ext = n + size - 1
        idx = (np.arange(ext) - (size - 1)) % n
        return _AxisPlan(n, spectral.next_power_of_two(ext), size - 1, idx)
    return _AxisPlan(n, spectral.next_power_of_two(n + size - 1), 0, None)


def fft_length(n: int, kernel_size: int, padding: str = "circular") -> int:
    """Transform length the spectral path uses for one axis."""
    return _axis_plan(n, kernel_size, padding).m


def conv_spectral(x: Tensor, w: Tensor, padding: str = "circular") -> Tensor:
    """Convolution through the FFT; agrees with ``conv_direct(x, w, 1, padding)``.

    Circular kernels longer than the input are first folded modulo n.
    Power-of-two circular inputs are then transformed at their own length.
    Otherwise each axis is extended to the next power of two >= n + L - 1, with
    the wrap-around emulated by prepending the last L - 1 samples (circular) or
    zeros (causal).
    """
    _check_padding(padding)
    ndim = w.ndim - 2
    if x.ndim != ndim + 2 or x.shape[1] != w.shape[1]:
        raise ValueError(f"conv: input {x.shape} incompatible with kernel {w.shape}")
    batch, c_in = x.shape[:2]
    c_out = w.shape[0]
    size = w.shape[-1]
    spatial = x.shape[2:]
    folded = [padding == "circular" and size > n for n in spatial]
    plans = [_axis_plan(n, size, padding) for n in spatial]
    mshape = tuple(p.m for p in plans)
    # real signals: the last axis keeps bins 0..m/2 only
    fshape = mshape[:-1] + (mshape[-1] // 2 + 1,)
    f_total = int(np.prod(fshape))
    m_last = mshape[-1]

    xe = x.data
    for i, p in enumerate(plans):
        if p.gather is not None:
            xe = np.take(xe, p.gather, axis=2 + i)
    xp = np.zeros((batch, c_in) + mshape)
    xp[(Ellipsis,) + tuple(slice(0, s) for s in xe.shape[2:])] = xe

    wf = w.data
    for i, p in enumerate(plans):
        if folded[i]:
            wf = _fold_axis(wf, p.n, 2 + i, 0)
    wp = np.zeros((c_out, c_in) + mshape)
    wp[(Ellipsis,) + tuple(slice(0, s) for s in wf.shape[2:])] = wf

    X = spectral.rfftn(xp, ndim, tag="input").reshape(batch, c_in, f_total)
    W = spectral.rfftn(wp, ndim, tag="kernel").reshape(c_out, c_in, f_total)
    # frequency-major batched products: [f, B, Ci] @ [f, Ci, Co]
    Xf = np.ascontiguousarray(X.transpose(2, 0, 1))
    Wf = np.ascontiguousarray(W.transpose(2, 1, 0))
    Y = np.matmul(Xf, Wf).transpose(1, 2, 0).reshape((batch, c_out) + fshape)
    full = spectral.irfftn(Y, ndim, m_last, tag="inverse")
    keep = (Ellipsis,) + tuple(slice(p.offset, p.offset + p.n) for p in plans)
    out = np.ascontiguousarray(full[keep])

    def backward(g):
        gp = np.zeros((batch, c_out) + mshape)
        gp[keep] = g
        G = spectral.rfftn(gp, ndim, tag="backward").reshape(batch, c_out, f_total)
        Gf = np.ascontiguousarray(G.transpose(2, 0, 1))  # [f, B, Co]
        gX = np.matmul(Gf, np.conj(Wf).transpose(0, 2, 1))  # [f, B, Ci]
        gW = np.matmul(np.conj(Xf).transpose(0, 2, 1), Gf)  # [f, Ci, Co]
        gX = gX.transpose(1, 2, 0).reshape((batch, c_in) + fshape)
        gW = gW.transpose(2, 1, 0).reshape((c_out, c_in) + fshape)
        gxe = spectral.irfftn(gX, ndim, m_last, tag="backward")
        gwf = spectral.irfftn(gW, ndim, m_last, tag="backward")
        for i, p in enumerate(plans):
            ax = 2 + i
            if p.gather is not None:
                part = np.take(gxe, np.arange(p.n + p.offset), axis=ax)
                gxe = _fold_axis(part, p.n, ax, (-p.offset) % p.n)
            else:
                gxe = np.take(gxe, np.arange(p.n), axis=ax)
            if folded[i]:
                gwf = np.take(gwf, np.arange(size) % p.n, axis=ax)
            else:
                gwf = np.take(gwf, np.arange(size), axis=ax)
        return gxe, gwf

    return Tensor.from_op(out, (x, w), backward, "conv_spectral")


# ------------------------------------------------------------ strategies

def _check_inputs(x: Tensor, bank: KernelBank, alpha: Tensor, space: SearchSpace) -> None:
    if alpha.shape != (space.size,):
        raise ValueError(f"alpha has {alpha.shape} entries, search space has {space.size}")
    if x.ndim != bank.ndim + 2 or x.shape[1] != bank.c_in:
        raise ValueError(f"input {x.shape} does not match bank (c_in={bank.c_in}, ndim={bank.ndim})")


def merged_kernel(bank: KernelBank, alpha: Tensor, space: SearchSpace,
                  impl: DilationImpl = DilationImpl.KRONECKER) -> Tensor:
    """``sum alpha[k,d] * pad(dilate(w[k,d]))`` as one [Co, Ci, D_bar] kernel.

    The zero-insertion path dilates, pads, and weights every candidate. The
    Kronecker path uses bilinearity of the Kronecker product: per dilation rate
    it weights and stacks the undilated kernels (padded to max K), then takes
    one product with the pattern ``P``.
    """
    ndim = bank.ndim
    size = space.d_bar
    if DilationImpl(impl) is DilationImpl.ZERO_INSERTION:
        pieces = [pad_kernel(dilate_kernel(bank[k, d], d, impl, ndim), size, ndim) for k, d in space.ops]
        return ops.weighted_sum(pieces, alpha)
    k_max = space.kernel_sizes[-1]
    groups = []
    for d in space.dilations:
        stack = [pad_kernel(bank[k, d], k_max, ndim) for k in space.kernel_sizes]
        idx = [space.index(k, d) for k in space.kernel_sizes]
        summed = ops.weighted_sum(stack, alpha, idx)
        groups.append(pad_kernel(dilate_kernel(summed, d, impl, ndim), size, ndim))
    return ops.add_n(groups)


def mixed_results_forward(x: Tensor, bank: KernelBank, alpha: Tensor, space: SearchSpace,
                          padding: str = "circular") -> Tensor:
    _check_inputs(x, bank, alpha, space)
    outs = [conv_direct(x, bank[k, d], d, padding) for k, d in space.ops]
    return ops.weighted_sum(outs, alpha)


def mixed_weights_forward(x: Tensor, bank: KernelBank, alpha: Tensor, space: SearchSpace,
                          impl: DilationImpl = DilationImpl.KRONECKER, padding: str = "circular") -> Tensor:
    _check_inputs(x, bank, alpha, space)
    return conv_direct(x, merged_kernel(bank, alpha, space, impl), 1, padding)


def dash_forward(x: Tensor, bank: KernelBank, alpha: Tensor, space: SearchSpace,
                 impl: DilationImpl = DilationImpl.KRONECKER, padding: str = "circular") -> Tensor:
    _check_inputs(x, bank, alpha, space)
    return conv_spectral(x, merged_kernel(bank, alpha, space, impl), padding)


def aggconv(x: Tensor, bank: KernelBank, alpha: Tensor, space: SearchSpace,
            strategy: MixStrategy = MixStrategy.DASH,
            impl: DilationImpl = DilationImpl.KRONECKER, padding: str = "circular") -> Tensor:
    strategy = MixStrategy(strategy)
    if strategy is MixStrategy.MIXED_RESULTS:
        return mixed_results_forward(x, bank, alpha, space, padding)
    if strategy is MixStrategy.MIXED_WEIGHTS:
        return mixed_weights_forward(x, bank, alpha, space, impl, padding)
    return dash_forward(x, bank, alpha, space, impl, padding)


def single_conv(x: Tensor, w: Tensor, d: int, padding: str = "circular") -> Tensor:
    """The standalone ``Conv_{k,d}`` a discretized layer computes."""
    return conv_direct(x, w, d, padding)


# ------------------------------------------------------------ cost model

FFT_MULTS_PER_BUTTERFLY = 4
FFT_ADDS_PER_BUTTERFLY = 6


@dataclass
class OpCountReport:
    strategy: str
    mults: int
    adds: int
    params: dict
    fft_model: Optional[dict] = None

    @property
    def total(self) -> int:
        return self.mults + self.adds

    def to_dict(self) -> dict:
        return {"strategy": self.strategy, "mults": self.mults, "adds": self.adds,
                "params": self.params, "fft_model": self.fft_model}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def count_ops(strategy, c_in: int, c_out: int, n: int, space: SearchSpace) -> OpCountReport:
    """Exact MULT/ADD counts for one AggConv application on a length-n input.

    The non-FFT terms are the closed forms of the complexity table. The FFT terms
    of the dash strategy are a model: ``(m/2) log2 m`` radix-2 butterflies per
    transform of length m, 4 real mults and 6 real adds per butterfly, over the
    ``c_in + c_in*c_out + c_out`` transforms one forward issues.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    strategy = MixStrategy(strategy)
    kb, db, ops_n = space.k_bar, space.d_bar, space.size
    cc = c_in * c_out
    params = {"c_in": c_in, "c_out": c_out, "n": n, "K": list(space.kernel_sizes),
              "D": list(space.dilations), "K_bar": kb, "D_bar": db}
    if strategy is MixStrategy.MIXED_RESULTS:
        m = (cc * kb + c_out * ops_n) * n
        return OpCountReport(strategy.value, m, m, params)
    if strategy is MixStrategy.MIXED_WEIGHTS:
        return OpCountReport(strategy.value, cc * (kb + db * n), cc * db * (ops_n + n), params)
    length = fft_length(n, db, "circular")
    transforms = c_in + cc + c_out
    butterflies = (length // 2) * (length.bit_length() - 1)
    fft_model = {"length": length, "transforms": transforms, "butterflies_per_transform": butterflies,
                 "mults_per_butterfly": FFT_MULTS_PER_BUTTERFLY, "adds_per_butterfly": FFT_ADDS_PER_BUTTERFLY,
                 "note": "FFT terms are a radix-2 model, not a closed form"}
    f_mult = FFT_MULTS_PER_BUTTERFLY * butterflies * transforms
    f_add = FFT_ADDS_PER_BUTTERFLY * butterflies * transforms
    return OpCountReport(strategy.value, cc * (kb + n) + f_mult, cc * (ops_n * db + n) + f_add, params, fft_model)


def leading_n_coefficient(strategy, space: SearchSpace) -> int:
    """Coefficient of ``c_in * c_out * n`` in the direct strategies' counts."""
    strategy = MixStrategy(strategy)
    if strategy is MixStrategy.MIXED_RESULTS:
        return space.k_bar
    if strategy is MixStrategy.MIXED_WEIGHTS:
        return space.d_bar
    raise ValueError("the dash strategy's leading term is n log n")


def mixed_weights_favored(space: SearchSpace) -> bool:
    """Whether the leading n-term ranks mixed-weights below mixed-results."""
    return leading_n_coefficient(MixStrategy.MIXED_WEIGHTS, space) < leading_n_coefficient(
        MixStrategy.MIXED_RESULTS, space)


def crossover_analysis(space: SearchSpace, n_values: Iterable[int], c_in: int = 1, c_out: int = 1) -> list:
    """Per n: total (mults + adds) per strategy, the cheapest, and ratios to it."""
    n_values = list(n_values)
    if not n_values:
        raise ValueError("empty n range")
    rows = []
    for n in n_values:
        totals = {s.value: count_ops(s, c_in, c_out, n, space).total for s in MixStrategy}
        cheapest = min(totals, key=totals.get)
        rows.append({"n": n, "cheapest": cheapest, "totals": totals,
                     "ratio_to_cheapest": {s: totals[s] / totals[cheapest] for s in totals}})
    return rows
