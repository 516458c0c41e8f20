"""Search, discretize, tune and retrain.

The search is single-level: each minibatch gets one forward/backward pass, and
both the architecture step and the weight step use that pass's gradients.
"""

from __future__ import annotations

import itertools
import json
import math
import time
from dataclasses import asdict, dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from . import mixedconv as mc
from . import supernet as sn
from .tasks import SyntheticTask
from .tensor import SGD, backward, clip_grad_norm, no_grad

SPACE_DEFAULTS = {1: {"step": 4, "p_max": 5, "q_max": 4}, 2: {"step": 2, "p_max": 4, "q_max": 4}}

# odd sizes 3..11 so every planted kernel size of the recovery tasks is a candidate
RECOVERY_SPACE = mc.SearchSpace((3, 5, 7, 9, 11), (1, 3, 7, 15))


def make_search_space(dimensionality: int, overrides: Optional[dict] = None) -> mc.SearchSpace:
    """``K = {3 + step*(p-1) : 1 <= p <= p_max}``, ``D = {2^q - 1 : 1 <= q <= q_max}``.

    ``overrides`` may change ``step``, ``p_max`` or ``q_max``, or give explicit
    ``K`` / ``D`` lists.
    """
    if dimensionality not in SPACE_DEFAULTS:
        raise ValueError("dimensionality must be 1 or 2")
    rules = dict(SPACE_DEFAULTS[dimensionality])
    overrides = dict(overrides or {})
    explicit_k, explicit_d = overrides.pop("K", None), overrides.pop("D", None)
    unknown = set(overrides) - set(rules)
    if unknown:
        raise ValueError(f"unknown search-space rules {sorted(unknown)}")
    rules.update(overrides)
    if rules["p_max"] < 1 or rules["q_max"] < 1 or rules["step"] < 1:
        raise ValueError("step, p_max and q_max must be at least 1")
    ks = explicit_k or [3 + rules["step"] * (p - 1) for p in range(1, rules["p_max"] + 1)]
    ds = explicit_d or [2 ** q - 1 for q in range(1, rules["q_max"] + 1)]
    return mc.SearchSpace(tuple(ks), tuple(ds))


def scaled_milestones(milestones: Sequence[int], full_epochs: int, epochs: int) -> tuple:
    """Rescale a decay schedule written for ``full_epochs`` to ``epochs``."""
    return tuple(sorted({max(1, round(m * epochs / full_epochs)) for m in milestones if m < full_epochs}))


def step_decay(base: float, epoch: int, milestones: Sequence[int], factor: float) -> float:
    return base * factor ** sum(epoch >= m for m in milestones)


@dataclass
class SearchConfig:
    epochs: int = 30
    lr: float = 0.01
    arch_lr: Optional[float] = None  # defaults to lr / 2
    momentum: float = 0.9
    nesterov: bool = True
    weight_decay: float = 5e-4
    decay_arch: bool = False  # also apply weight decay to the architecture logits
    milestones: Optional[tuple] = None  # defaults to 60% of the epochs
    lr_decay: float = 0.2
    clip: float = 1.0
    temperature: float = 1.0
    subsample: float = 0.2
    batch_size: int = 32
    seed: int = 0
    relaxation: str = "gumbel_softmax"
    noise_schedule: str = "per_forward"  # or "per_epoch"
    strategy: str = "dash"
    dilation_impl: str = "kronecker"

    def __post_init__(self):
        if not 0.0 < self.subsample <= 1.0:
            raise ValueError("subsample ratio must lie in (0, 1]")
        if self.lr <= 0:
            raise ValueError("learning rate must be positive")
        if self.epochs < 0 or self.batch_size < 1:
            raise ValueError("epochs must be >= 0 and batch size >= 1")
        if self.noise_schedule not in ("per_forward", "per_epoch"):
            raise ValueError("noise_schedule must be 'per_forward' or 'per_epoch'")
        if self.milestones is None:
            self.milestones = scaled_milestones((60,), 100, self.epochs) if self.epochs else ()
        self.milestones = tuple(self.milestones)

    @property
    def effective_arch_lr(self) -> float:
        return self.lr / 2 if self.arch_lr is None else self.arch_lr


@dataclass(frozen=True)
class TrainConfig:
    lr: float
    weight_decay: float
    momentum: float
    dropout: float

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class TuneGrid:
    lr: tuple = (1e-1, 1e-2, 1e-3)
    weight_decay: tuple = (5e-4, 5e-6)
    momentum: tuple = (0.9, 0.99)
    dropout: tuple = (0.0, 0.05)

    def configs(self) -> list:
        """Cartesian product, learning rate varying slowest."""
        return [TrainConfig(*c) for c in itertools.product(self.lr, self.weight_decay, self.momentum, self.dropout)]


class SearchDiverged(RuntimeError):
    """Raised when a loss or gradient becomes non-finite; carries the state at failure."""

    def __init__(self, message: str, state: dict):
        super().__init__(f"{message} (state: {state})")
        self.state = state


@dataclass
class SearchResult:
    model: sn.SupernetModel
    epoch_losses: list
    forwards_per_iteration: list
    subsample_sizes: list
    arch_norms: list = field(default_factory=list)
    weight_norms: list = field(default_factory=list)


def subsample_indices(rng: np.random.Generator, size: int, ratio: float) -> np.ndarray:
    """``ceil(ratio * size)`` distinct indices drawn uniformly without replacement."""
    return rng.choice(size, size=math.ceil(ratio * size), replace=False)


def backbone_for_task(task: SyntheticTask, kind: str = "probe", channels: Optional[int] = None) -> sn.BackboneSpec:
    """``probe`` is one plain searched convolution; ``wrn`` the 1D residual stack."""
    if kind == "probe":
        if task.head_kind != "dense":
            raise ValueError("the probe backbone has a dense head; use 'wrn' for classification")
        return sn.conv_probe_spec(task.channels, task.num_outputs, task.padding)
    if kind == "wrn":
        return sn.wrn1d_spec(task.channels, task.num_outputs, task.head_kind, channels, padding=task.padding)
    raise ValueError(f"unknown backbone {kind!r}")


def _finite(values) -> bool:
    return all(np.all(np.isfinite(v)) for v in values)


def search(model: sn.SupernetModel, task: SyntheticTask, cfg: SearchConfig,
           data: Optional[tuple] = None) -> SearchResult:
    """Jointly train weights and architecture logits on ``data`` (default: the training split)."""
    x, y = task.train if data is None else data
    if x.ndim != model.spec.dimensionality + 2 or x.shape[1] != model.spec.in_channels:
        raise ValueError(f"task inputs {x.shape} do not fit the model")
    loss_fn = sn.heads_and_losses(model.spec.head.kind)
    weights, arch = model.parameters(), model.arch_parameters()
    w_opt = SGD(weights, cfg.lr, cfg.momentum, cfg.nesterov, cfg.weight_decay)
    a_opt = SGD(arch, cfg.effective_arch_lr, cfg.momentum, cfg.nesterov,
                cfg.weight_decay if cfg.decay_arch else 0.0)
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 7]))
    result = SearchResult(model, [], [], [])
    for epoch in range(cfg.epochs):
        w_opt.lr = step_decay(cfg.lr, epoch, cfg.milestones, cfg.lr_decay)
        a_opt.lr = step_decay(cfg.effective_arch_lr, epoch, cfg.milestones, cfg.lr_decay)
        if cfg.noise_schedule == "per_epoch":
            for s in model.slots:
                s.arch.fixed_noise = s.arch.draw_noise()
        idx = subsample_indices(rng, len(x), cfg.subsample)
        result.subsample_sizes.append(len(idx))
        total, count = 0.0, 0
        for it, start in enumerate(range(0, len(idx), cfg.batch_size)):
            batch = idx[start:start + cfg.batch_size]
            before = model.forward_calls
            try:
                loss = loss_fn(model(x[batch], training=True), y[batch])
                backward(loss)
            except FloatingPointError as exc:
                raise SearchDiverged(str(exc), {"epoch": epoch, "iteration": it}) from exc
            result.forwards_per_iteration.append(model.forward_calls - before)
            a_grads = [p.grad for p in arch]
            w_grads = [p.grad for p in weights]
            if not np.isfinite(loss.data) or not _finite(a_grads) or not _finite(w_grads):
                raise SearchDiverged("non-finite loss or gradient",
                                     {"epoch": epoch, "iteration": it, "loss": float(loss.data)})
            a_grads, a_norm = clip_grad_norm(a_grads, cfg.clip)
            w_grads, w_norm = clip_grad_norm(w_grads, cfg.clip)
            result.arch_norms.append(a_norm)
            result.weight_norms.append(w_norm)
            a_opt.step(a_grads)
            w_opt.step(w_grads)
            a_opt.zero_grad()
            w_opt.zero_grad()
            total += float(loss.data) * len(batch)
            count += len(batch)
        result.epoch_losses.append(total / count)
    for s in model.slots:
        s.arch.fixed_noise = None
    return result


# ------------------------------------------------------------ train / eval

def evaluate(model: sn.Network, x: np.ndarray, y: np.ndarray, batch_size: int = 256) -> dict:
    """Evaluation-mode metrics: ``loss`` always, plus ``accuracy`` for classification."""
    kind = model.spec.head.kind
    loss_fn = sn.heads_and_losses(kind)
    loss_sum, correct = 0.0, 0
    with no_grad():
        for start in range(0, len(x), batch_size):
            xb, yb = x[start:start + batch_size], y[start:start + batch_size]
            out = model(xb, training=False)
            loss_sum += float(loss_fn(out, yb).data) * len(xb)
            if kind == "classification":
                correct += int(np.sum(np.argmax(out.data, axis=1) == yb))
    metrics = {"loss": loss_sum / len(x)}
    if kind == "classification":
        metrics["accuracy"] = correct / len(x)
    return metrics


def score(metrics: dict) -> float:
    """Higher is better: accuracy when present, otherwise negated loss."""
    return metrics["accuracy"] if "accuracy" in metrics else -metrics["loss"]


def train_discretized(spec: sn.BackboneSpec, choices, data: tuple, cfg: TrainConfig, epochs: int,
                      batch_size: int = 32, milestones: Sequence[int] = (), lr_decay: float = 0.2,
                      seed: int = 0, nesterov: bool = True) -> tuple:
    """Train a freshly initialized discretized model. Returns ``(model, epoch_losses)``."""
    model = sn.DiscretizedModel(replace(spec, dropout=cfg.dropout), choices, seed)
    loss_fn = sn.heads_and_losses(spec.head.kind)
    params = model.parameters()
    opt = SGD(params, cfg.lr, cfg.momentum, nesterov, cfg.weight_decay)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 11]))
    x, y = data
    losses = []
    for epoch in range(epochs):
        opt.lr = step_decay(cfg.lr, epoch, milestones, lr_decay)
        order = rng.permutation(len(x))
        total = 0.0
        for start in range(0, len(x), batch_size):
            batch = order[start:start + batch_size]
            loss = loss_fn(model(x[batch], training=True), y[batch])
            backward(loss)
            grads = [p.grad for p in params]
            if not np.isfinite(loss.data) or not _finite(grads):
                raise FloatingPointError(f"training diverged at epoch {epoch}")
            opt.step(grads)
            opt.zero_grad()
            total += float(loss.data) * len(batch)
        losses.append(total / len(x))
    return model, losses


@dataclass
class TuneBudget:
    epochs: int = 10
    subset: float = 0.5
    batch_size: int = 32


@dataclass
class TuneResult:
    best: TrainConfig
    scores: list  # (config, score) in grid order

    def to_dict(self) -> dict:
        return {"best": self.best.to_dict(),
                "scores": [{"config": c.to_dict(), "score": s} for c, s in self.scores]}


def tune(spec: sn.BackboneSpec, choices, task: SyntheticTask, grid, budget: Optional[TuneBudget] = None,
         seed: int = 0) -> TuneResult:
    """Grid search on a training subset with a reduced epoch budget, scored on the validation split.

    A config that diverges scores ``-inf``. Exact score ties go to the earlier config.
    """
    configs = grid.configs() if isinstance(grid, TuneGrid) else list(grid)
    if not configs:
        raise ValueError("empty tuning grid")
    budget = budget or TuneBudget()
    x, y = task.train
    rng = np.random.default_rng(np.random.SeedSequence([seed, 13]))
    keep = np.sort(rng.choice(len(x), size=max(1, math.ceil(budget.subset * len(x))), replace=False))
    subset = (x[keep], y[keep])
    results = []
    for cfg in configs:
        try:
            with np.errstate(over="ignore", invalid="ignore"):
                model, _ = train_discretized(spec, choices, subset, cfg, budget.epochs, budget.batch_size, seed=seed)
                s = score(evaluate(model, *task.val))
        except FloatingPointError:
            s = -math.inf
        results.append((cfg, s if np.isfinite(s) else -math.inf))
    best = max(range(len(results)), key=lambda i: (results[i][1], -i))
    return TuneResult(results[best][0], results)


@dataclass
class RetrainResult:
    model: sn.DiscretizedModel
    test_metrics: dict
    epoch_losses: list


RETRAIN_MILESTONES = {1: (30, 60, 90, 120, 160), 2: (60, 120, 160)}


def retrain(spec: sn.BackboneSpec, choices, task: SyntheticTask, cfg: TrainConfig, epochs: int = 50,
            batch_size: int = 32, milestones: Optional[Sequence[int]] = None, seed: int = 0) -> RetrainResult:
    """Train on all training data (train plus validation) and report last-epoch test metrics."""
    if milestones is None:
        milestones = scaled_milestones(RETRAIN_MILESTONES[spec.dimensionality], 200, epochs)
    model, losses = train_discretized(spec, choices, task.full_train(), cfg, epochs, batch_size,
                                      milestones, seed=seed)
    return RetrainResult(model, evaluate(model, *task.test), losses)


# -------------------------------------------------------------- end to end

@dataclass
class PipelineConfig:
    search: SearchConfig = field(default_factory=SearchConfig)
    grid: TuneGrid = field(default_factory=TuneGrid)
    tune_budget: TuneBudget = field(default_factory=TuneBudget)
    retrain_epochs: int = 50
    retrain_batch_size: int = 32
    backbone: str = "probe"
    channels: Optional[int] = None
    seed: int = 0


def recovery_config(seed: int = 0, **search_overrides) -> PipelineConfig:
    """Settings for the planted-convolution recovery task on the probe backbone.

    The single-layer probe uses the larger weight/architecture learning rates
    (0.1 / 0.05) and minibatches of 16.
    """
    search_kw = {"lr": 0.1, "batch_size": 16, "seed": seed} | search_overrides
    return PipelineConfig(search=SearchConfig(**search_kw), backbone="probe", seed=seed)


@dataclass
class PipelineResult:
    report: dict
    timing: dict
    supernet: sn.SupernetModel
    model: sn.DiscretizedModel

    def report_json(self) -> str:
        return json.dumps(self.report, indent=2, sort_keys=True) + "\n"


def _round(values, digits: int = 12) -> list:
    return [round(float(v), digits) for v in values]


def run_full_pipeline(task: SyntheticTask, space: mc.SearchSpace, cfg: Optional[PipelineConfig] = None) -> PipelineResult:
    """Search, discretize, tune and retrain.

    ``report`` is a deterministic function of the inputs and seeds. Wall-clock
    phase durations are kept apart in ``timing`` with keys search, tuning,
    retraining and total.
    """
    cfg = cfg or PipelineConfig()
    spec = backbone_for_task(task, cfg.backbone, cfg.channels)
    scfg = cfg.search
    supernet = sn.SupernetModel(spec, space, scfg.strategy, scfg.dilation_impl, cfg.seed,
                                scfg.relaxation, scfg.temperature)
    t0 = time.perf_counter()
    found = search(supernet, task, scfg)
    t1 = time.perf_counter()
    choices = supernet.selected_ops()
    tuned = tune(spec, choices, task, cfg.grid, cfg.tune_budget, cfg.seed)
    t2 = time.perf_counter()
    final = retrain(spec, choices, task, tuned.best, cfg.retrain_epochs, cfg.retrain_batch_size, seed=cfg.seed)
    t3 = time.perf_counter()
    model = final.model
    report = {
        "task": task.metadata(),
        "search_space": space.to_dict(),
        "architecture": model.to_dict(),
        "selected": [list(c) for c in choices],
        "alphas": [_round(a) for a in supernet.alphas()],
        "search_losses": _round(found.epoch_losses),
        "tuning": tuned.to_dict(),
        "retrain_losses": _round(final.epoch_losses),
        "test_metrics": {k: round(float(v), 12) for k, v in final.test_metrics.items()},
    }
    timing = {"search": t1 - t0, "tuning": t2 - t1, "retraining": t3 - t2}
    timing["total"] = timing["search"] + timing["tuning"] + timing["retraining"]
    return PipelineResult(report, timing, supernet, model)
