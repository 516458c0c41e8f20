"""Synthetic tasks with planted structure, and a plain array container format.

Two generators:

* ``ground_truth_conv``: ``y = Conv_{k*,d*}(x) + sigma * noise``, a dense
  regression whose optimal operation is known.
* ``sum_of_dilated_motifs``: classification where each class is marked by a
  dilated motif planted at a random circular shift in noise.

Array files use a small container: a text header line ``DNT1 dtype=<dtype>
dims=<d0,d1,...> layout=<binary|csv>`` followed by the row-major little-endian
payload (binary), or by one CSV row per leading index (csv).
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import mixedconv as mc
from .tensor import Tensor, no_grad

TASK_KINDS = ("ground_truth_conv", "sum_of_dilated_motifs")
_MAGIC = "DNT1"


@dataclass
class SyntheticTask:
    kind: str
    k_star: int
    d_star: int
    n: int
    channels: int
    noise: float
    seed: int
    train: tuple
    val: tuple
    test: tuple
    num_classes: int = 0
    planted_kernel: Optional[np.ndarray] = field(default=None, repr=False)
    padding: str = "circular"

    @property
    def head_kind(self) -> str:
        return "dense" if self.kind == "ground_truth_conv" else "classification"

    @property
    def num_outputs(self) -> int:
        return self.channels if self.kind == "ground_truth_conv" else self.num_classes

    @property
    def noise_floor(self) -> float:
        """Bayes-optimal test MSE for the regression task."""
        return self.noise ** 2

    def full_train(self) -> tuple:
        """Training and validation splits together."""
        return (np.concatenate([self.train[0], self.val[0]]), np.concatenate([self.train[1], self.val[1]]))

    def metadata(self) -> dict:
        return {"kind": self.kind, "k_star": self.k_star, "d_star": self.d_star, "n": self.n,
                "channels": self.channels, "noise": self.noise, "seed": self.seed,
                "num_classes": self.num_classes, "padding": self.padding}


def _split(x, y, num_test: int, val_fraction: float) -> tuple:
    n_total = len(x)
    n_train_all = n_total - num_test
    n_val = int(round(val_fraction * n_train_all))
    n_tr = n_train_all - n_val
    return (x[:n_tr], y[:n_tr]), (x[n_tr:n_train_all], y[n_tr:n_train_all]), (x[n_train_all:], y[n_train_all:])


def ground_truth_conv(k_star: int = 5, d_star: int = 3, n: int = 64, num_samples: int = 2000,
                      noise: float = 0.1, seed: int = 0, channels: int = 1, num_test: int = 500,
                      val_fraction: float = 0.2, padding: str = "circular") -> SyntheticTask:
    """Regression onto a planted dilated convolution of white-noise inputs.

    ``num_samples`` training points (of which ``val_fraction`` are held out for
    validation) plus ``num_test`` test points. The planted kernel has unit norm
    per output channel and its end taps are kept away from zero so that no
    smaller or less dilated operation reproduces it.
    """
    rng = np.random.default_rng(np.random.SeedSequence([seed, k_star, d_star, n]))
    w = rng.standard_normal((channels, channels, k_star))
    w[..., [0, -1]] = np.sign(w[..., [0, -1]]) * (0.5 + np.abs(w[..., [0, -1]]))
    w /= np.linalg.norm(w.reshape(channels, -1), axis=1).reshape(-1, 1, 1)
    total = num_samples + num_test
    x = rng.standard_normal((total, channels, n))
    with no_grad():
        clean = mc.conv_direct(Tensor(x), Tensor(w), d_star, padding).data
    y = clean + noise * rng.standard_normal(clean.shape)
    train, val, test = _split(x, y, num_test, val_fraction)
    return SyntheticTask("ground_truth_conv", k_star, d_star, n, channels, noise, seed,
                         train, val, test, planted_kernel=w, padding=padding)


def sum_of_dilated_motifs(k_star: int = 5, d_star: int = 3, n: int = 64, num_samples: int = 2000,
                          noise: float = 0.5, seed: int = 0, num_classes: int = 4, num_test: int = 500,
                          val_fraction: float = 0.2, motifs_per_sample: int = 2) -> SyntheticTask:
    """Classify which of ``num_classes`` dilated motifs is planted in a noisy signal."""
    if num_classes < 2:
        raise ValueError("need at least two classes")
    rng = np.random.default_rng(np.random.SeedSequence([seed, k_star, d_star, n, num_classes]))
    motifs = rng.choice([-1.0, 1.0], size=(num_classes, k_star))
    total = num_samples + num_test
    labels = rng.integers(0, num_classes, size=total)
    x = noise * rng.standard_normal((total, 1, n))
    taps = np.arange(k_star) * d_star
    for i in range(total):
        for _ in range(motifs_per_sample):
            start = rng.integers(0, n)
            x[i, 0, (start + taps) % n] += motifs[labels[i]]
    train, val, test = _split(x, labels, num_test, val_fraction)
    return SyntheticTask("sum_of_dilated_motifs", k_star, d_star, n, 1, noise, seed,
                         train, val, test, num_classes=num_classes, planted_kernel=motifs)


def make_task(kind: str, **kwargs) -> SyntheticTask:
    if kind == "ground_truth_conv":
        return ground_truth_conv(**kwargs)
    if kind == "sum_of_dilated_motifs":
        return sum_of_dilated_motifs(**kwargs)
    raise ValueError(f"unknown task kind {kind!r}; expected one of {TASK_KINDS}")


# ----------------------------------------------------------------- container

def _header(a: np.ndarray, layout: str) -> str:
    return f"{_MAGIC} dtype={a.dtype.str} dims={','.join(map(str, a.shape))} layout={layout}\n"


def _parse_header(line: str) -> tuple:
    parts = line.split()
    if not parts or parts[0] != _MAGIC:
        raise ValueError("not a DNT1 array file")
    fields = dict(p.split("=", 1) for p in parts[1:])
    dims = tuple(int(v) for v in fields["dims"].split(",") if v)
    return np.dtype(fields["dtype"]), dims, fields.get("layout", "binary")


def save_array(path, a: np.ndarray, fmt: str = "binary") -> None:
    a = np.ascontiguousarray(a)
    path = Path(path)
    if fmt == "binary":
        le = a.astype(a.dtype.newbyteorder("<"), copy=False)
        with open(path, "wb") as f:
            f.write(_header(le, "binary").encode("ascii"))
            f.write(le.tobytes(order="C"))
    elif fmt == "csv":
        rows = a.reshape(a.shape[0], -1) if a.ndim > 1 else a.reshape(-1, 1)
        with open(path, "w") as f:
            f.write(_header(a, "csv"))
            np.savetxt(f, rows, delimiter=",", fmt="%d" if a.dtype.kind in "iu" else "%.17g")
    else:
        raise ValueError(f"unknown array format {fmt!r}")


def load_array(path) -> np.ndarray:
    with open(path, "rb") as f:
        head = f.readline().decode("ascii")
        dtype, dims, layout = _parse_header(head)
        body = f.read()
    count = math.prod(dims)
    if layout == "binary":
        if len(body) != count * dtype.itemsize:
            raise ValueError(f"payload has {len(body)} bytes, header implies {count * dtype.itemsize}")
        return np.frombuffer(body, dtype=dtype, count=count).reshape(dims).copy()
    if count == 0:
        return np.zeros(dims, dtype=dtype)
    rows = np.loadtxt(body.decode("ascii").splitlines(), delimiter=",", dtype=dtype, ndmin=2)
    return rows.reshape(dims)


def save_task(task: SyntheticTask, directory, fmt: str = "binary") -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    ext = "bin" if fmt == "binary" else "csv"
    for name in ("train", "val", "test"):
        x, y = getattr(task, name)
        save_array(directory / f"{name}_x.{ext}", x, fmt)
        save_array(directory / f"{name}_y.{ext}", y, fmt)
    meta = task.metadata() | {"format": fmt}
    (directory / "task.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def load_task(directory) -> SyntheticTask:
    directory = Path(directory)
    meta = json.loads((directory / "task.json").read_text())
    ext = "bin" if meta.pop("format", "binary") == "binary" else "csv"
    splits = {}
    for name in ("train", "val", "test"):
        splits[name] = (load_array(directory / f"{name}_x.{ext}"), load_array(directory / f"{name}_y.{ext}"))
    return SyntheticTask(meta["kind"], meta["k_star"], meta["d_star"], meta["n"], meta["channels"],
                         meta["noise"], meta["seed"], splits["train"], splits["val"], splits["test"],
                         num_classes=meta.get("num_classes", 0), padding=meta.get("padding", "circular"))


_IDX_TYPES = {0x08: ">u1", 0x09: ">i1", 0x0B: ">i2", 0x0C: ">i4", 0x0D: ">f4", 0x0E: ">f8"}


def load_idx(path) -> np.ndarray:
    """Read an IDX file (big-endian magic, type code, rank, dims, payload)."""
    with open(path, "rb") as f:
        raw = f.read()
    zero, code, rank = struct.unpack(">HBB", raw[:4])
    if zero != 0 or code not in _IDX_TYPES:
        raise ValueError("not an IDX file")
    dims = struct.unpack(f">{rank}I", raw[4:4 + 4 * rank])
    data = np.frombuffer(raw, dtype=_IDX_TYPES[code], offset=4 + 4 * rank, count=math.prod(dims))
    return data.reshape(dims).astype(data.dtype.newbyteorder("="))


def sequences_from_images(images: np.ndarray) -> np.ndarray:
    """Flatten [N, H, W] images into single-channel sequences [N, 1, H*W]."""
    images = np.asarray(images, dtype=np.float64)
    return images.reshape(images.shape[0], 1, -1)
