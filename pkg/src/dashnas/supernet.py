"""Backbones whose convolution slots hold AggConv mixtures (supernet) or single convs.

The 1D backbone is a stack of residual blocks, each ``Conv -> Dropout -> BN ->
ReLU`` three times with a pointwise shortcut when channel counts differ. The 2D
toy backbone uses pre-activation WRN-style blocks with two convolutions.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Callable, Optional

import numpy as np

from . import mixedconv as mc
from . import ops
from .tensor import Tensor

HEAD_KINDS = ("classification", "multilabel", "dense")


@dataclass
class BlockSpec:
    c_out: int
    stride: int = 1
    kernel_sizes: tuple = (8, 5, 3)
    # conv layers only: no norm, activation, dropout or shortcut
    plain: bool = False


@dataclass
class HeadSpec:
    kind: str
    num_outputs: int

    def __post_init__(self):
        if self.kind not in HEAD_KINDS:
            raise ValueError(f"head kind must be one of {HEAD_KINDS}")


@dataclass
class BackboneSpec:
    dimensionality: int
    in_channels: int
    blocks: list
    head: HeadSpec
    dropout: float = 0.0
    padding: str = "circular"

    def __post_init__(self):
        if not self.blocks:
            raise ValueError("backbone needs at least one block")
        if self.dimensionality not in (1, 2):
            raise ValueError("dimensionality must be 1 or 2")
        self.blocks = [b if isinstance(b, BlockSpec) else BlockSpec(**b) for b in self.blocks]
        if isinstance(self.head, dict):
            self.head = HeadSpec(**self.head)

    @property
    def num_slots(self) -> int:
        return sum(len(b.kernel_sizes) for b in self.blocks)

    def to_dict(self) -> dict:
        doc = asdict(self)
        for b in doc["blocks"]:
            b["kernel_sizes"] = list(b["kernel_sizes"])
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "BackboneSpec":
        doc = dict(doc)
        doc["blocks"] = [BlockSpec(**{**b, "kernel_sizes": tuple(b["kernel_sizes"])}) for b in doc["blocks"]]
        doc["head"] = HeadSpec(**doc["head"])
        return cls(**doc)


def wrn1d_channels(num_classes: int) -> int:
    return min(4 ** (num_classes // 10 + 1), 64)


def wrn1d_spec(in_channels: int, num_classes: int, head: str = "classification",
               channels: Optional[int] = None, dropout: float = 0.0, padding: str = "circular") -> BackboneSpec:
    """Three residual blocks with baseline kernels (8, 5, 3)."""
    c = channels or wrn1d_channels(num_classes)
    blocks = [BlockSpec(c) for _ in range(3)]
    return BackboneSpec(1, in_channels, blocks, HeadSpec(head, num_classes), dropout, padding)


def toy2d_spec(in_channels: int, num_classes: int, widths=(4, 8), dropout: float = 0.0) -> BackboneSpec:
    blocks = [BlockSpec(w, stride=1 if i == 0 else 2, kernel_sizes=(3, 3)) for i, w in enumerate(widths)]
    return BackboneSpec(2, in_channels, blocks, HeadSpec("classification", num_classes), dropout)


def conv_probe_spec(in_channels: int = 1, out_channels: int = 1, padding: str = "circular") -> BackboneSpec:
    """A single plain convolution slot followed by a pointwise dense head."""
    blocks = [BlockSpec(out_channels, kernel_sizes=(3,), plain=True)]
    return BackboneSpec(1, in_channels, blocks, HeadSpec("dense", out_channels), 0.0, padding)


# ------------------------------------------------------------------ layers

def _uniform(rng, fan_in, shape, name):
    bound = 1.0 / math.sqrt(fan_in)
    return Tensor(rng.uniform(-bound, bound, size=shape), requires_grad=True, name=name)


class BatchNorm:
    def __init__(self, channels: int, momentum: float = 0.1, eps: float = 1e-5):
        self.gain = Tensor(np.ones(channels), requires_grad=True, name="bn_gain")
        self.shift = Tensor(np.zeros(channels), requires_grad=True, name="bn_shift")
        self.running_mean = np.zeros(channels)
        self.running_var = np.ones(channels)
        self.momentum, self.eps = momentum, eps

    def __call__(self, x: Tensor, training: bool = True) -> Tensor:
        if not training:
            y, _, _ = ops.batch_norm(x, self.gain, self.shift, self.eps, (self.running_mean, self.running_var))
            return y
        y, mu, var = ops.batch_norm(x, self.gain, self.shift, self.eps)
        count = x.size // x.shape[1]
        unbiased = var * count / max(count - 1, 1)
        self.running_mean = (1 - self.momentum) * self.running_mean + self.momentum * mu
        self.running_var = (1 - self.momentum) * self.running_var + self.momentum * unbiased
        return y

    def parameters(self) -> list:
        return [self.gain, self.shift]

    def copy_from(self, other: "BatchNorm") -> None:
        self.gain.data[...] = other.gain.data
        self.shift.data[...] = other.shift.data
        self.running_mean = other.running_mean.copy()
        self.running_var = other.running_var.copy()


class Linear:
    def __init__(self, fan_in: int, fan_out: int, rng: np.random.Generator):
        self.weight = _uniform(rng, fan_in, (fan_in, fan_out), "linear_w")
        self.bias = _uniform(rng, fan_in, (fan_out,), "linear_b")

    def __call__(self, x: Tensor, training: bool = True) -> Tensor:
        return ops.add_row(ops.matmul(x, self.weight), self.bias)

    def parameters(self) -> list:
        return [self.weight, self.bias]

    def copy_from(self, other: "Linear") -> None:
        self.weight.data[...] = other.weight.data
        self.bias.data[...] = other.bias.data


class Pointwise:
    """1x1 convolution, optionally with a bias."""

    def __init__(self, c_in: int, c_out: int, ndim: int, rng: np.random.Generator, bias: bool = False):
        self.weight = _uniform(rng, c_in, (c_out, c_in) + (1,) * ndim, "pointwise_w")
        self.bias = _uniform(rng, c_in, (c_out,), "pointwise_b") if bias else None

    def __call__(self, x: Tensor, training: bool = True) -> Tensor:
        y = mc.conv_direct(x, self.weight, 1)
        return ops.add_channel(y, self.bias) if self.bias is not None else y

    def parameters(self) -> list:
        return [self.weight] + ([self.bias] if self.bias is not None else [])

    def copy_from(self, other: "Pointwise") -> None:
        self.weight.data[...] = other.weight.data
        if self.bias is not None:
            self.bias.data[...] = other.bias.data


class AggConvLayer:
    """One searched slot: a kernel bank, its architecture parameters and a strategy."""

    def __init__(self, space: mc.SearchSpace, c_in: int, c_out: int, ndim: int, rng: np.random.Generator,
                 arch_seed: int, strategy=mc.MixStrategy.DASH, impl=mc.DilationImpl.KRONECKER,
                 padding: str = "circular", mode: str = "gumbel_softmax", temperature: float = 1.0):
        self.space = space
        self.bank = mc.KernelBank.initialize(space, c_in, c_out, rng, ndim)
        self.arch = mc.ArchParams(space.size, temperature, mode, arch_seed)
        self.strategy = mc.MixStrategy(strategy)
        self.impl = mc.DilationImpl(impl)
        self.padding = padding

    def __call__(self, x: Tensor, training: bool = True) -> Tensor:
        alpha = mc.normalize_alpha(self.arch)
        return mc.aggconv(x, self.bank, alpha, self.space, self.strategy, self.impl, self.padding)

    def alpha(self) -> np.ndarray:
        """Noise-free mixture weights (softmax of the logits at the layer's temperature)."""
        if self.arch.alpha_override is not None:
            return np.asarray(self.arch.alpha_override, dtype=np.float64)
        z = self.arch.logits.data / self.arch.temperature
        e = np.exp(z - z.max())
        return e / e.sum()

    def selected(self) -> tuple:
        return mc.argmax_op(self.alpha(), self.space)

    def parameters(self) -> list:
        return self.bank.parameters()


class ConvLayer:
    """A single ``Conv_{k,d}`` slot."""

    def __init__(self, k: int, d: int, c_in: int, c_out: int, ndim: int, rng: np.random.Generator,
                 padding: str = "circular"):
        self.k, self.d, self.padding = k, d, padding
        self.weight = _uniform(rng, c_in * k, (c_out, c_in) + (k,) * ndim, f"conv[{k},{d}]")

    def __call__(self, x: Tensor, training: bool = True) -> Tensor:
        return mc.single_conv(x, self.weight, self.d, self.padding)

    def parameters(self) -> list:
        return [self.weight]


# ---------------------------------------------------------------- networks

class Network:
    """Backbone topology with convolution slots filled by ``make_conv(slot, c_in, c_out)``."""

    def __init__(self, spec: BackboneSpec, make_conv: Callable, seed: int = 0):
        self.spec = spec
        self.seed = seed
        init_seq, drop_seq = np.random.SeedSequence(seed).spawn(2)
        self._init_rng = np.random.default_rng(init_seq)
        self.dropout_rng = np.random.default_rng(drop_seq)
        self.dropout = spec.dropout
        ndim = spec.dimensionality
        self.slots = []
        self.aux = []  # non-slot layers, in creation order
        self.blocks = []
        c_in = spec.in_channels
        for block in spec.blocks:
            entry = {"block": block, "convs": [], "norms": [], "pre_norms": [], "shortcut": None}
            c = c_in
            for _ in block.kernel_sizes:
                if ndim == 2 and not block.plain:
                    entry["pre_norms"].append(self._aux(BatchNorm(c)))
                conv = make_conv(len(self.slots), c, block.c_out, self._init_rng)
                self.slots.append(conv)
                entry["convs"].append(conv)
                if ndim == 1 and not block.plain:
                    entry["norms"].append(self._aux(BatchNorm(block.c_out)))
                c = block.c_out
            if not block.plain and c_in != block.c_out:
                entry["shortcut"] = self._aux(Pointwise(c_in, block.c_out, ndim, self._init_rng))
            self.blocks.append(entry)
            c_in = block.c_out
        head = spec.head
        self.head_norm = self._aux(BatchNorm(c_in)) if ndim == 2 else None
        if head.kind == "dense":
            self.head = self._aux(Pointwise(c_in, head.num_outputs, ndim, self._init_rng, bias=True))
        else:
            self.head = self._aux(Linear(c_in, head.num_outputs, self._init_rng))

    def _aux(self, layer):
        self.aux.append(layer)
        return layer

    def _block(self, entry: dict, x: Tensor, training: bool) -> Tensor:
        block = entry["block"]
        p = self.dropout if training else 0.0
        h = x
        if block.plain:
            for conv in entry["convs"]:
                h = conv(h, training)
            return ops.subsample(h, block.stride)
        last = len(entry["convs"]) - 1
        for i, conv in enumerate(entry["convs"]):
            if entry["pre_norms"]:
                h = ops.relu(entry["pre_norms"][i](h, training))
            h = conv(h, training)
            if i == last:
                h = ops.subsample(h, block.stride)
            h = ops.dropout(h, p, self.dropout_rng)
            if entry["norms"]:
                h = ops.relu(entry["norms"][i](h, training))
        skip = ops.subsample(x, block.stride)
        if entry["shortcut"] is not None:
            skip = entry["shortcut"](skip, training)
        return ops.add(h, skip)

    def features(self, x, training: bool = True) -> Tensor:
        x = x if isinstance(x, Tensor) else Tensor(x)
        if x.ndim != self.spec.dimensionality + 2 or x.shape[1] != self.spec.in_channels:
            raise ValueError(f"input {x.shape} does not match backbone")
        for entry in self.blocks:
            x = self._block(entry, x, training)
        return x

    def forward(self, x, training: bool = True) -> Tensor:
        h = self.features(x, training)
        if self.head_norm is not None:
            h = ops.relu(self.head_norm(h, training))
        if self.spec.head.kind == "dense":
            return self.head(h, training)
        return self.head(ops.spatial_mean(h), training)

    __call__ = forward

    def parameters(self) -> list:
        out = []
        for s in self.slots:
            out.extend(s.parameters())
        for layer in self.aux:
            out.extend(layer.parameters())
        return out

    def copy_aux_from(self, other: "Network") -> None:
        for mine, theirs in zip(self.aux, other.aux):
            mine.copy_from(theirs)


class SupernetModel(Network):
    def __init__(self, spec: BackboneSpec, space: mc.SearchSpace, strategy=mc.MixStrategy.DASH,
                 impl=mc.DilationImpl.KRONECKER, seed: int = 0, mode: str = "gumbel_softmax",
                 temperature: float = 1.0):
        self.space = space
        arch_seeds = np.random.SeedSequence([seed, 1]).generate_state(spec.num_slots)

        def make(slot, c_in, c_out, rng):
            return AggConvLayer(space, c_in, c_out, spec.dimensionality, rng, int(arch_seeds[slot]),
                                strategy, impl, spec.padding, mode, temperature)

        super().__init__(spec, make, seed)
        self.forward_calls = 0

    def forward(self, x, training: bool = True) -> Tensor:
        self.forward_calls += 1
        return super().forward(x, training)

    __call__ = forward

    def arch_parameters(self) -> list:
        return [s.arch.logits for s in self.slots]

    def set_strategy(self, strategy, impl=None) -> None:
        for s in self.slots:
            s.strategy = mc.MixStrategy(strategy)
            if impl is not None:
                s.impl = mc.DilationImpl(impl)

    def alphas(self) -> list:
        return [s.alpha() for s in self.slots]

    def selected_ops(self) -> list:
        return [s.selected() for s in self.slots]


class DiscretizedModel(Network):
    def __init__(self, spec: BackboneSpec, choices, seed: int = 0):
        choices = [tuple(int(v) for v in c) for c in choices]
        if len(choices) != spec.num_slots:
            raise ValueError(f"{len(choices)} choices for {spec.num_slots} slots")
        self.choices = choices

        def make(slot, c_in, c_out, rng):
            k, d = choices[slot]
            return ConvLayer(k, d, c_in, c_out, spec.dimensionality, rng, spec.padding)

        super().__init__(spec, make, seed)

    def to_dict(self) -> dict:
        return {"backbone": self.spec.to_dict(), "choices": [list(c) for c in self.choices], "seed": self.seed}

    @classmethod
    def from_dict(cls, doc: dict) -> "DiscretizedModel":
        return cls(BackboneSpec.from_dict(doc["backbone"]), doc["choices"], doc.get("seed", 0))


def discretize(model: SupernetModel, seed: Optional[int] = None, copy_weights: bool = False) -> DiscretizedModel:
    """Pick argmax-alpha (k, d) per slot. Weights are fresh unless ``copy_weights``."""
    choices = model.selected_ops()
    out = DiscretizedModel(model.spec, choices, model.seed if seed is None else seed)
    if copy_weights:
        for mine, slot, kd in zip(out.slots, model.slots, choices):
            mine.weight.data[...] = slot.bank[kd].data
        out.copy_aux_from(model)
    return out


# ------------------------------------------------------------------- losses

def heads_and_losses(kind: str) -> Callable:
    """Loss for a head kind: cross-entropy, BCE-with-logits, or MSE."""
    if kind == "classification":
        return ops.cross_entropy
    if kind == "multilabel":
        return ops.bce_with_logits
    if kind == "dense":
        return ops.mse
    raise ValueError(f"unknown head kind {kind!r}")
