"""Invariant suites: strategy equivalence, gradients, dilation equality, FFT oracle.

Each suite returns a :class:`SuiteReport` with the largest deviation seen and
the tolerance it was held to. ``run_all`` collects them into one JSON-ready
report. Set ``DASHNAS_VERIFY_THREADS`` to run suites on several threads.
"""

from __future__ import annotations

import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import mixedconv as mc
from . import ops, reference, spectral
from .pipeline import make_search_space
from .tensor import Tensor, backward

THREADS_ENV = "DASHNAS_VERIFY_THREADS"
STRATEGY_TOL = 1e-8
STRATEGY_GRAD_TOL = 1e-6
GRADCHECK_TOL = 1e-4
FFT_TOL = 1e-9


@dataclass
class SuiteReport:
    name: str
    passed: bool
    max_deviation: float
    tolerance: float
    cases: int
    seconds: float = 0.0
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        self.passed = bool(self.passed)
        self.max_deviation = float(self.max_deviation)

    def to_dict(self) -> dict:
        return asdict(self)


def relative_error(a: np.ndarray, b: np.ndarray) -> float:
    """``max|a - b| / max(max|b|, tiny)``."""
    a, b = np.asarray(a), np.asarray(b)
    scale = max(float(np.max(np.abs(b))) if b.size else 0.0, 1e-300)
    return float(np.max(np.abs(a - b))) / scale if a.size else 0.0


# --------------------------------------------------------------- gradcheck

def numerical_grad(f: Callable[[Sequence[Tensor]], Tensor], arrays: Sequence[np.ndarray],
                   eps: float = 1e-5) -> list:
    """Central differences of the scalar ``f`` with respect to every array entry."""
    grads = []
    for i, a in enumerate(arrays):
        g = np.zeros_like(a)
        for idx in np.ndindex(a.shape):
            vals = []
            for sign in (1.0, -1.0):
                trial = [b.copy() for b in arrays]
                trial[i][idx] += sign * eps
                vals.append(float(f([Tensor(t) for t in trial]).data))
            g[idx] = (vals[0] - vals[1]) / (2 * eps)
        grads.append(g)
    return grads


def gradcheck(f: Callable[[Sequence[Tensor]], Tensor], arrays: Sequence[np.ndarray], eps: float = 1e-5) -> float:
    """Norm-wise relative error between autodiff and central-difference gradients."""
    arrays = [np.asarray(a, dtype=np.float64) for a in arrays]
    inputs = [Tensor(a.copy(), requires_grad=True) for a in arrays]
    backward(f(inputs))
    analytic = [t.grad if t.grad is not None else np.zeros_like(t.data) for t in inputs]
    numeric = numerical_grad(f, arrays, eps)
    worst = 0.0
    for a, n in zip(analytic, numeric):
        denom = max(np.linalg.norm(a), np.linalg.norm(n), 1e-12)
        worst = max(worst, float(np.linalg.norm(a - n)) / denom)
    return worst


# --------------------------------------------------------- random instances

K_POOL = (3, 5, 7, 9, 11, 13, 15)
D_POOL = (1, 3, 7, 15, 31)


def random_space(rng: np.random.Generator, k_pool=K_POOL, d_pool=D_POOL) -> mc.SearchSpace:
    ks = rng.choice(k_pool, size=rng.integers(1, min(4, len(k_pool)) + 1), replace=False)
    ds = rng.choice(d_pool, size=rng.integers(1, min(3, len(d_pool)) + 1), replace=False)
    return mc.SearchSpace(tuple(int(k) for k in ks), tuple(int(d) for d in ds))


def random_instance(rng: np.random.Generator, max_n: int = 256, max_channels: int = 4, ndim: int = 1) -> dict:
    space = random_space(rng)
    n = int(rng.integers(4, max_n + 1)) if ndim == 1 else int(rng.integers(4, 13))
    c_in, c_out = (int(v) for v in rng.integers(1, max_channels + 1, size=2))
    batch = int(rng.integers(1, 3))
    bank = mc.KernelBank.initialize(space, c_in, c_out, rng, ndim)
    alpha = rng.dirichlet(np.ones(space.size))
    x = rng.standard_normal((batch, c_in) + (n,) * ndim)
    padding = str(rng.choice(mc.PADDINGS))
    return {"space": space, "bank": bank, "alpha": alpha, "x": x, "padding": padding, "ndim": ndim}


def _strategy_outputs(inst: dict, upstream: np.ndarray | None) -> dict:
    out = {}
    for strategy, impl in (("mixed-results", "kronecker"), ("mixed-weights", "zero-insertion"),
                           ("mixed-weights", "kronecker"), ("dash", "zero-insertion"), ("dash", "kronecker")):
        x = Tensor(inst["x"], requires_grad=True)
        alpha = Tensor(inst["alpha"], requires_grad=True)
        bank = inst["bank"]
        for p in bank.parameters():
            p.grad = None
        y = mc.aggconv(x, bank, alpha, inst["space"], strategy, impl, inst["padding"])
        grads = None
        if upstream is not None:
            backward(y, upstream)
            grads = [x.grad, alpha.grad] + [p.grad for p in bank.parameters()]
        out[(strategy, impl)] = (y.data, grads)
    return out


# ------------------------------------------------------------------ suites

def suite_strategy_equivalence(seed: int = 0, instances: int = 100, max_n: int = 256) -> SuiteReport:
    """All five strategy/dilation combinations agree in outputs and gradients."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    worst_out = worst_grad = 0.0
    for i in range(instances):
        inst = random_instance(rng, max_n=max_n, ndim=1 if i % 10 else 2)
        x = inst["x"]
        upstream = rng.standard_normal((x.shape[0], inst["bank"].c_out) + x.shape[2:])
        results = _strategy_outputs(inst, upstream)
        ref_y, ref_g = results[("mixed-results", "kronecker")]
        for key, (y, grads) in results.items():
            worst_out = max(worst_out, relative_error(y, ref_y))
            for g, rg in zip(grads, ref_g):
                worst_grad = max(worst_grad, relative_error(g, rg))
    passed = worst_out <= STRATEGY_TOL and worst_grad <= STRATEGY_GRAD_TOL
    return SuiteReport("strategy_equivalence", passed, worst_out, STRATEGY_TOL, instances,
                       time.perf_counter() - t0,
                       {"max_gradient_deviation": worst_grad, "gradient_tolerance": STRATEGY_GRAD_TOL})


def suite_oracle(seed: int = 0, instances: int = 12) -> SuiteReport:
    """Every strategy against the brute-force reference convolution."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed + 1)
    worst = 0.0
    for i in range(instances):
        inst = random_instance(rng, max_n=40, max_channels=2, ndim=1 if i % 3 else 2)
        weights = {kd: inst["bank"][kd].data for kd in inst["space"].ops}
        ref = reference.aggconv(inst["x"], weights, inst["alpha"], inst["space"].ops, inst["padding"])
        for y, _ in _strategy_outputs(inst, None).values():
            worst = max(worst, relative_error(y, ref))
    return SuiteReport("reference_oracle", worst <= STRATEGY_TOL, worst, STRATEGY_TOL, instances,
                       time.perf_counter() - t0)


def suite_dilation_equality(seed: int = 0) -> SuiteReport:
    """Kronecker and zero-insertion dilation are bitwise identical on the default spaces."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed + 2)
    mismatches, cases = [], 0
    for ndim in (1, 2):
        space = make_search_space(ndim)
        for k, d in space.ops:
            w = rng.standard_normal((2, 3) + (k,) * ndim)
            a = mc.dilate_kernel(Tensor(w), d, mc.DilationImpl.KRONECKER, ndim).data
            b = mc.dilate_kernel(Tensor(w), d, mc.DilationImpl.ZERO_INSERTION, ndim).data
            cases += 1
            if a.shape != b.shape or a.tobytes() != b.tobytes():
                mismatches.append([ndim, k, d])
    return SuiteReport("dilation_equality", not mismatches, float(len(mismatches)), 0.0, cases,
                       time.perf_counter() - t0, {"mismatches": mismatches})


def suite_fft_oracle(seed: int = 0, max_log2: int = 8) -> SuiteReport:
    """Radix-2 transforms (complex and real) against direct O(n^2) DFT summation."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed + 3)
    worst, cases = 0.0, 0
    for e in range(max_log2 + 1):
        n = 2 ** e
        x = rng.standard_normal((2, n)) + 1j * rng.standard_normal((2, n))
        ref = reference.dft(x)
        worst = max(worst, relative_error(spectral.fft(x), ref))
        worst = max(worst, relative_error(spectral.ifft(ref), x))
        xr = x.real.copy()
        ref_r = reference.dft(xr)[..., : n // 2 + 1]
        worst = max(worst, relative_error(spectral.rfft(xr), ref_r))
        worst = max(worst, relative_error(spectral.irfft(ref_r, n), xr))
        w = rng.standard_normal(n)
        worst = max(worst, relative_error(spectral.circular_conv_fft(xr[0], w), reference.circular_conv(xr[0], w)))
        cases += 1
    return SuiteReport("fft_oracle", worst <= FFT_TOL, worst, FFT_TOL, cases, time.perf_counter() - t0)


def _grad_cases(rng: np.random.Generator) -> dict:
    """Named differentiable functions with random inputs, one fresh instance per call."""
    cases = {}
    for strategy in ("mixed-results", "mixed-weights", "dash"):
        def make(strategy=strategy):
            space = random_space(rng, (1, 3, 5), (1, 2, 3))
            ndim = int(rng.integers(1, 3))
            c_in, c_out = (int(v) for v in rng.integers(1, 3, size=2))
            n = int(rng.integers(3, 9)) if ndim == 1 else int(rng.integers(3, 6))
            x = rng.standard_normal((1, c_in) + (n,) * ndim)
            keys = space.ops
            ws = [rng.standard_normal((c_out, c_in) + (k,) * ndim) for k, _ in keys]
            logits = rng.standard_normal(space.size)
            padding = str(rng.choice(mc.PADDINGS))
            proj = rng.standard_normal((1, c_out) + (n,) * ndim)

            def f(ts):
                bank = mc.KernelBank(dict(zip(keys, ts[2:])), c_in, c_out, ndim)
                alpha = ops.softmax(ts[1])
                y = mc.aggconv(ts[0], bank, alpha, space, strategy, "kronecker", padding)
                return ops.total(ops.mul(y, Tensor(proj)))
            return f, [x, logits] + ws
        cases[f"aggconv[{strategy}]"] = make

    def fft_path():
        ndim = int(rng.integers(1, 3))
        n = int(rng.integers(3, 10)) if ndim == 1 else int(rng.integers(3, 6))
        k = int(rng.integers(1, 2 * n))
        x = rng.standard_normal((2, 2) + (n,) * ndim)
        w = rng.standard_normal((2, 2) + (k,) * ndim)
        padding = str(rng.choice(mc.PADDINGS))
        proj = rng.standard_normal((2, 2) + (n,) * ndim)
        return (lambda ts: ops.total(ops.mul(mc.conv_spectral(ts[0], ts[1], padding), Tensor(proj)))), [x, w]
    cases["conv_spectral"] = fft_path

    def bn():
        c = int(rng.integers(1, 4))
        x = rng.standard_normal((3, c, 5))
        proj = rng.standard_normal(x.shape)
        return (lambda ts: ops.total(ops.mul(ops.batch_norm(ts[0], ts[1], ts[2])[0], Tensor(proj)))), \
            [x, rng.standard_normal(c), rng.standard_normal(c)]
    cases["batch_norm"] = bn

    def ce():
        b, c = 4, int(rng.integers(2, 6))
        labels = rng.integers(0, c, size=b)
        return (lambda ts: ops.cross_entropy(ts[0], labels)), [rng.standard_normal((b, c))]
    cases["cross_entropy"] = ce

    def mse():
        target = rng.standard_normal((3, 4))
        return (lambda ts: ops.mse(ts[0], target)), [rng.standard_normal((3, 4))]
    cases["mse"] = mse

    def bce():
        target = rng.random((3, 4))
        return (lambda ts: ops.bce_with_logits(ts[0], target)), [rng.standard_normal((3, 4))]
    cases["bce_with_logits"] = bce

    def softmax():
        size = int(rng.integers(2, 8))
        temp = float(rng.uniform(0.5, 2.0))
        proj = rng.standard_normal(size)
        arch = mc.ArchParams(size, temp, "softmax")

        def f(ts):
            arch.logits = ts[0]
            return ops.total(ops.mul(mc.normalize_alpha(arch), Tensor(proj)))
        return f, [rng.standard_normal(size)]
    cases["softmax_relaxation"] = softmax
    return cases


def suite_gradients(seed: int = 0, instances: int = 10) -> SuiteReport:
    """Central finite differences for every differentiable operation."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed + 4)
    per_op = {}
    for name, make in _grad_cases(rng).items():
        worst = 0.0
        for _ in range(instances):
            f, arrays = make()
            worst = max(worst, gradcheck(f, arrays))
        per_op[name] = worst
    worst = max(per_op.values())
    return SuiteReport("gradients", worst <= GRADCHECK_TOL, worst, GRADCHECK_TOL,
                       instances * len(per_op), time.perf_counter() - t0, {"per_operation": per_op})


SUITES = {
    "strategy_equivalence": suite_strategy_equivalence,
    "reference_oracle": suite_oracle,
    "dilation_equality": suite_dilation_equality,
    "fft_oracle": suite_fft_oracle,
    "gradients": suite_gradients,
}


def thread_count() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ValueError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None


def run_all(seed: int = 0, instances: int = 100, max_n: int = 256, names: Sequence[str] | None = None) -> dict:
    """Run the suites and return ``{"passed", "failed", "suites"}``."""
    names = list(names or SUITES)
    unknown = set(names) - set(SUITES)
    if unknown:
        raise ValueError(f"unknown suites {sorted(unknown)}")

    def run(name):
        if name == "strategy_equivalence":
            return SUITES[name](seed, instances, max_n)
        return SUITES[name](seed)

    threads = thread_count()
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            reports = list(pool.map(run, names))
    else:
        reports = [run(n) for n in names]
    failed = [r.name for r in reports if not r.passed]
    return {"passed": not failed, "failed": failed, "seed": seed,
            "suites": {r.name: r.to_dict() for r in reports}}
