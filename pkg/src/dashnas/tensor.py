"""Dense float64 tensors with a dynamic reverse-mode tape.

Every differentiable operation returns a new :class:`Tensor` that remembers its
parents and a closure mapping the output gradient to parent gradients. The tape
is rebuilt on every forward pass; ``backward`` walks it in reverse insertion
order, so gradient accumulation happens in a fixed, reproducible order.
"""

from __future__ import annotations

import itertools
import threading
from contextlib import contextmanager
from typing import Callable, Optional, Sequence

import numpy as np

_ids = itertools.count()
_state = threading.local()


def grad_enabled() -> bool:
    return getattr(_state, "enabled", True)


@contextmanager
def no_grad():
    """Disable tape recording inside the block (evaluation, benchmarking warm-up)."""
    prev = grad_enabled()
    _state.enabled = False
    try:
        yield
    finally:
        _state.enabled = prev


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "name", "_parents", "_backward", "_id", "_op")

    def __init__(self, data, requires_grad: bool = False, name: Optional[str] = None):
        arr = np.array(data, dtype=np.float64)
        if arr.ndim and 0 in arr.shape:
            raise ValueError("tensor extents must be positive")
        if not np.all(np.isfinite(arr)):
            raise FloatingPointError("tensor data contains non-finite values")
        self.data = arr
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad
        self.name = name
        self._parents: tuple = ()
        self._backward: Optional[Callable] = None
        self._op = "leaf"
        self._id = next(_ids)

    @classmethod
    def from_op(cls, data: np.ndarray, parents: Sequence["Tensor"], backward: Callable, op: str) -> "Tensor":
        """Wrap an op result; ``backward(g)`` must return one gradient (or None) per parent."""
        if not np.all(np.isfinite(data)):
            raise FloatingPointError(f"non-finite values produced by {op}")
        out = cls.__new__(cls)
        out.data = np.asarray(data, dtype=np.float64)
        out.grad = None
        out.name = None
        out._op = op
        out._id = next(_ids)
        needs = grad_enabled() and any(p.requires_grad for p in parents)
        out.requires_grad = needs
        if needs:
            out._parents = tuple(parents)
            out._backward = backward
        else:
            out._parents = ()
            out._backward = None
        return out

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self, seed=None) -> None:
        backward(self, seed)

    def __repr__(self) -> str:
        tag = f", name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, op={self._op}{tag})"

    # arithmetic sugar; all shape alignment is explicit (see ops)
    def __add__(self, other):
        from . import ops
        return ops.add(self, other)

    def __sub__(self, other):
        from . import ops
        return ops.sub(self, other)

    def __mul__(self, other):
        from . import ops
        if isinstance(other, Tensor):
            return ops.mul(self, other)
        return ops.scale(self, float(other))

    __rmul__ = __mul__

    def __neg__(self):
        from . import ops
        return ops.scale(self, -1.0)


def _topo_order(root: Tensor) -> list:
    seen = set()
    nodes = []
    stack = [root]
    while stack:
        t = stack.pop()
        if t._id in seen:
            continue
        seen.add(t._id)
        nodes.append(t)
        stack.extend(p for p in t._parents if p.requires_grad)
    # insertion ids give a valid topological order of the tape
    nodes.sort(key=lambda t: t._id, reverse=True)
    return nodes


def backward(output: Tensor, seed=None) -> None:
    """Populate ``.grad`` on every requires-grad leaf reachable from ``output``.

    Leaf gradients accumulate across calls; clear them with ``zero_grad``.
    """
    if not output.requires_grad:
        raise RuntimeError("backward called on a tensor that is not part of a recorded graph")
    if seed is None:
        if output.size != 1:
            raise ValueError("seed required for non-scalar outputs")
        seed = np.ones_like(output.data)
    seed = np.asarray(seed.data if isinstance(seed, Tensor) else seed, dtype=np.float64)
    if seed.shape != output.shape:
        raise ValueError(f"seed shape {seed.shape} does not match output shape {output.shape}")

    grads = {output._id: seed}
    for node in _topo_order(output):
        g = grads.pop(node._id, None)
        if g is None:
            continue
        if node._backward is None:
            if not np.all(np.isfinite(g)):
                raise FloatingPointError(f"non-finite gradient reached {node.name or 'leaf'}")
            node.grad = g.copy() if node.grad is None else node.grad + g
            continue
        parent_grads = node._backward(g)
        for parent, pg in zip(node._parents, parent_grads):
            if pg is None or not parent.requires_grad:
                continue
            if pg.shape != parent.shape:
                raise RuntimeError(f"{node._op} produced gradient of shape {pg.shape} for parent {parent.shape}")
            if parent._id in grads:
                grads[parent._id] = grads[parent._id] + pg
            else:
                grads[parent._id] = pg


class SGD:
    """SGD with (Nesterov) momentum and L2 weight decay added to the gradient.

    Matches the conventional formulation: ``g += wd * p``; ``v = mu * v + g``;
    the step direction is ``g + mu * v`` with Nesterov, else ``v``.
    """

    def __init__(self, params: Sequence[Tensor], lr: float, momentum: float = 0.0,
                 nesterov: bool = False, weight_decay: float = 0.0):
        if lr < 0:
            raise ValueError("learning rate must be nonnegative")
        if not 0.0 <= momentum < 1.0:
            raise ValueError("momentum must lie in [0, 1)")
        if weight_decay < 0:
            raise ValueError("weight decay must be nonnegative")
        self.params = list(params)
        self.lr = lr
        self.momentum = momentum
        self.nesterov = nesterov
        self.weight_decay = weight_decay
        self.velocity = [np.zeros_like(p.data) for p in self.params]

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None

    def step(self, grads: Optional[Sequence[np.ndarray]] = None) -> None:
        """Update parameters in place. ``grads`` defaults to each parameter's ``.grad``."""
        if grads is None:
            grads = [p.grad for p in self.params]
        for i, (p, g) in enumerate(zip(self.params, grads)):
            if g is None:
                raise RuntimeError(f"parameter {p.name or i} has no gradient")
            if self.weight_decay:
                g = g + self.weight_decay * p.data
            if self.momentum:
                v = self.velocity[i]
                v *= self.momentum
                v += g
                g = g + self.momentum * v if self.nesterov else v
            p.data -= self.lr * g


def clip_grad_norm(grads: Sequence[np.ndarray], max_norm: float) -> tuple:
    """Scale ``grads`` so their joint L2 norm is at most ``max_norm``. Returns (clipped, norm)."""
    total = float(np.sqrt(sum(float(np.sum(g * g)) for g in grads)))
    if total <= max_norm or total == 0.0:
        return list(grads), total
    factor = max_norm / total
    return [g * factor for g in grads], total
