"""Wall-clock benchmarks of one search epoch per mixing method.

Each cell builds a 1D supernet, runs one untimed warm-up iteration, then
times ``trials`` search epochs (forward plus backward over ``batches``
minibatches) and keeps the median. Five methods are compared: mixed-results,
and mixed-weights and dash each with zero-insertion or Kronecker dilation.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import statistics
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from . import mixedconv as mc
from . import ops
from . import supernet as sn
from .tensor import backward

METHODS = (
    ("mixed-results", "zero-insertion"),
    ("mixed-weights", "zero-insertion"),
    ("mixed-weights", "kronecker"),
    ("dash", "zero-insertion"),
    ("dash", "kronecker"),
)

LENGTH_SPACE = mc.SearchSpace((3, 5, 7, 9, 11), (1, 3, 7, 15, 31))


def method_name(strategy: str, impl: str) -> str:
    """Column label; mixed-results convolves natively so dilation impl does not apply."""
    if strategy == "mixed-results":
        return strategy
    return strategy if impl == "zero-insertion" else f"{strategy}+kronecker"


METHOD_NAMES = tuple(method_name(s, i) for s, i in METHODS)


def space_for_scale(c: int) -> mc.SearchSpace:
    """``K = {3 + 2(p-1) : p <= c}``, ``D = {2^q - 1 : q <= c}``."""
    if c < 1:
        raise ValueError("space scale c must be >= 1")
    return mc.SearchSpace(tuple(3 + 2 * (p - 1) for p in range(1, c + 1)),
                          tuple(2 ** q - 1 for q in range(1, c + 1)))


@dataclass
class BenchSetup:
    n: int = 1000
    batch: int = 128
    batches: Optional[int] = None  # per epoch; default ceil(dataset / batch)
    dataset: int = 10_000
    trials: int = 5
    seed: int = 0
    backbone: str = "wrn"  # or "probe": a single searched conv
    num_classes: int = 10
    channels: Optional[int] = None  # wrn width; default from the class count

    def __post_init__(self):
        if self.trials < 3:
            raise ValueError("at least 3 trials are required")
        if self.n < 1 or self.batch < 1:
            raise ValueError("n and batch must be positive")

    @property
    def batches_per_epoch(self) -> int:
        return self.batches if self.batches is not None else math.ceil(self.dataset / self.batch)


@dataclass
class BenchResult:
    strategy: str
    dilation_impl: str
    axis: str  # "c" or "n"
    value: int
    trials: list = field(default_factory=list)
    error: Optional[str] = None

    @property
    def method(self) -> str:
        return method_name(self.strategy, self.dilation_impl)

    @property
    def median(self) -> float:
        return statistics.median(self.trials) if self.trials else math.nan

    @property
    def log10(self) -> float:
        return math.log10(self.median) if self.trials else math.nan

    @property
    def variance(self) -> float:
        return statistics.variance(self.trials) if len(self.trials) > 1 else math.nan

    def to_dict(self) -> dict:
        return {"method": self.method, "strategy": self.strategy, "dilation_impl": self.dilation_impl,
                self.axis: self.value, "median_seconds": _json_float(self.median),
                "log10_seconds": _json_float(self.log10), "variance": _json_float(self.variance),
                "trial_count": len(self.trials), "trials": self.trials, "error": self.error}


def _json_float(v: float):
    return None if math.isnan(v) else v


def _bench_model(space: mc.SearchSpace, strategy: str, impl: str, setup: BenchSetup) -> sn.SupernetModel:
    if setup.backbone == "probe":
        spec = sn.BackboneSpec(1, 1, [sn.BlockSpec(1, kernel_sizes=(3,), plain=True)],
                               sn.HeadSpec("classification", setup.num_classes))
    elif setup.backbone == "wrn":
        spec = sn.wrn1d_spec(1, setup.num_classes, channels=setup.channels)
    else:
        raise ValueError(f"unknown benchmark backbone {setup.backbone!r}")
    return sn.SupernetModel(spec, space, strategy, impl, setup.seed)


def time_search_epoch(space: mc.SearchSpace, strategy: str, impl: str, setup: BenchSetup) -> list:
    """Seconds per search epoch for each trial (after one untimed warm-up iteration)."""
    model = _bench_model(space, strategy, impl, setup)
    rng = np.random.default_rng(setup.seed)
    x = rng.standard_normal((setup.batch, 1, setup.n))
    y = rng.integers(0, setup.num_classes, size=setup.batch)
    params = model.parameters() + model.arch_parameters()

    def step():
        loss = ops.cross_entropy(model(x), y)
        backward(loss)
        for p in params:
            p.grad = None

    step()  # warm-up: plans, caches and buffers
    out = []
    for _ in range(setup.trials):
        t0 = time.perf_counter()
        for _ in range(setup.batches_per_epoch):
            step()
        out.append(time.perf_counter() - t0)
    return out


def _cell(space, strategy, impl, setup, axis, value, progress=None) -> BenchResult:
    result = BenchResult(strategy, impl, axis, value)
    try:
        result.trials = time_search_epoch(space, strategy, impl, setup)
    except MemoryError as exc:
        result.error = f"MemoryError: {exc}"
    if progress:
        progress(result)
    return result


def bench_space(c_values: Iterable[int] = range(1, 8), setup: Optional[BenchSetup] = None,
                methods=METHODS, progress=None) -> list:
    setup = setup or BenchSetup()
    return [_cell(space_for_scale(c), s, i, setup, "c", c, progress) for c in c_values for s, i in methods]


def bench_length(n_values: Iterable[int] = tuple(2 ** e for e in range(5, 13)),
                 space: mc.SearchSpace = LENGTH_SPACE, setup: Optional[BenchSetup] = None,
                 methods=METHODS, progress=None) -> list:
    setup = setup or BenchSetup()
    results = []
    for n in n_values:
        if n & (n - 1):
            raise ValueError(f"input lengths must be powers of two, got {n}")
        cell_setup = BenchSetup(**{**setup.__dict__, "n": n})
        results.extend(_cell(space, s, i, cell_setup, "n", n, progress) for s, i in methods)
    return results


def predicted_counts(space: mc.SearchSpace, n: int, c_in: int = 1, c_out: int = 1) -> dict:
    return {s: mc.count_ops(s, c_in, c_out, n, space).to_dict() for s in ("mixed-results", "mixed-weights", "dash")}


# ---------------------------------------------------------------- tables

def to_table(results: list, axis: str, space_of=None) -> tuple:
    """Wide table: one row per axis value, one median-seconds column per method."""
    values = sorted({r.value for r in results})
    header = [axis]
    if space_of is not None:
        header += ["k_bar", "d_bar"]
    header += list(METHOD_NAMES)
    if axis == "n" and space_of is not None:
        header += [f"predicted_mults_{s}" for s in ("mixed-results", "mixed-weights", "dash")]
    by_key = {(r.value, r.method): r for r in results}
    rows = []
    for v in values:
        row = [v]
        if space_of is not None:
            sp = space_of(v)
            row += [sp.k_bar, sp.d_bar]
        for m in METHOD_NAMES:
            r = by_key.get((v, m))
            row.append("" if r is None or r.error else repr(r.median))
        if axis == "n" and space_of is not None:
            counts = predicted_counts(space_of(v), v)
            row += [counts[s]["mults"] for s in ("mixed-results", "mixed-weights", "dash")]
        rows.append(row)
    return header, rows


def atomic_write(path, text: str) -> None:
    """Replace ``path`` with ``text`` in one rename, so readers never see partial files."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def sidecar_path(path) -> Path:
    path = Path(path)
    return path.with_suffix(".trials.json")


def write_results(path, results: list, axis: str, setup: BenchSetup, fmt: str = "csv", space_of=None) -> None:
    """CSV table plus a JSON sidecar of raw trials, or a single JSON document."""
    doc = {"axis": axis, "setup": setup.__dict__, "results": [r.to_dict() for r in results]}
    if fmt == "json":
        atomic_write(path, json.dumps(doc, indent=2) + "\n")
        return
    if fmt != "csv":
        raise ValueError(f"unknown output format {fmt!r}")
    header, rows = to_table(results, axis, space_of)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    atomic_write(path, buf.getvalue())
    atomic_write(sidecar_path(path), json.dumps(doc, indent=2) + "\n")


def median_table(results: list) -> dict:
    """``{value: {method: median_seconds}}`` for quick analysis."""
    out: dict = {}
    for r in results:
        out.setdefault(r.value, {})[r.method] = r.median
    return out
