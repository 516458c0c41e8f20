import math

import numpy as np
import pytest
from scipy.stats import chisquare

from dashnas import mixedconv as mc
from dashnas import pipeline as pl
from dashnas import supernet as sn
from dashnas import tasks

SMALL = mc.SearchSpace((3, 5), (1, 3))


@pytest.fixture(scope="module")
def recovery_task():
    return tasks.ground_truth_conv(5, 3, seed=0)


@pytest.fixture(scope="module")
def small_task():
    return tasks.ground_truth_conv(3, 3, n=32, num_samples=200, num_test=50, seed=1)


def _probe(task, space=SMALL, seed=0, strategy="dash"):
    return sn.SupernetModel(pl.backbone_for_task(task), space, strategy, seed=seed)


# -- search space rules

def test_default_search_spaces():
    assert pl.make_search_space(2) == mc.SearchSpace((3, 5, 7, 9), (1, 3, 7, 15))
    assert pl.make_search_space(1) == mc.SearchSpace((3, 7, 11, 15, 19), (1, 3, 7, 15))
    assert pl.make_search_space(1, {"p_max": 1, "q_max": 1}) == mc.SearchSpace((3,), (1,))
    assert pl.make_search_space(2, {"K": [3, 5]}).kernel_sizes == (3, 5)
    with pytest.raises(ValueError):
        pl.make_search_space(3)
    with pytest.raises(ValueError):
        pl.make_search_space(1, {"p_max": 0})
    with pytest.raises(ValueError):
        pl.make_search_space(1, {"width": 2})


def test_schedules():
    assert pl.scaled_milestones((60,), 100, 30) == (18,)
    assert pl.scaled_milestones((30, 60, 90, 120, 160), 200, 50) == (8, 15, 22, 30, 40)
    assert pl.step_decay(0.1, 17, (18,), 0.2) == 0.1
    assert pl.step_decay(0.1, 18, (18,), 0.2) == pytest.approx(0.02)
    assert pl.SearchConfig().effective_arch_lr == pytest.approx(0.005)


def test_subsample_size_and_uniformity():
    rng = np.random.default_rng(0)
    counts = np.zeros(50)
    for _ in range(2000):
        idx = pl.subsample_indices(rng, 50, 0.2)
        assert len(idx) == math.ceil(0.2 * 50) == len(set(idx.tolist()))
        counts[idx] += 1
    assert chisquare(counts).pvalue > 1e-3
    assert len(pl.subsample_indices(rng, 7, 0.5)) == 4


# -- search

def test_zero_epochs_leaves_model_unchanged(small_task):
    model = _probe(small_task)
    before = [p.data.copy() for p in model.parameters() + model.arch_parameters()]
    result = pl.search(model, small_task, pl.SearchConfig(epochs=0))
    assert result.epoch_losses == []
    assert all(np.array_equal(a, p.data) for a, p in zip(before, model.parameters() + model.arch_parameters()))


def test_single_forward_per_iteration_and_clipping(small_task):
    model = _probe(small_task)
    result = pl.search(model, small_task, pl.SearchConfig(epochs=2, lr=0.1, batch_size=8))
    assert result.forwards_per_iteration and set(result.forwards_per_iteration) == {1}
    assert result.subsample_sizes == [math.ceil(0.2 * len(small_task.train[0]))] * 2


def test_search_recovers_planted_operation(recovery_task):
    hits = 0
    for seed in range(3):
        task = tasks.ground_truth_conv(5, 3, seed=seed)
        model = _probe(task, pl.RECOVERY_SPACE, seed)
        result = pl.search(model, task, pl.recovery_config(seed).search)
        assert all(np.isfinite(result.epoch_losses))
        assert result.epoch_losses[-1] < result.epoch_losses[0]
        hits += model.selected_ops() == [(5, 3)]
    assert hits >= 2


def test_search_strategies_agree(small_task):
    picks = []
    for strategy in ("mixed-results", "dash"):
        model = _probe(small_task, strategy=strategy)
        pl.search(model, small_task, pl.SearchConfig(epochs=3, lr=0.1, batch_size=8))
        picks.append((model.selected_ops(), model.alphas()[0]))
    assert picks[0][0] == picks[1][0]
    assert np.allclose(picks[0][1], picks[1][1], atol=1e-8)


def test_search_divergence_is_reported(small_task):
    bad = tasks.ground_truth_conv(3, 3, n=32, num_samples=50, num_test=10, seed=1)
    bad.train[0][0, 0, 0] = np.nan
    with pytest.raises(pl.SearchDiverged) as info:
        pl.search(_probe(bad), bad, pl.SearchConfig(epochs=1, subsample=1.0))
    assert "epoch" in info.value.state


def test_search_config_validation():
    with pytest.raises(ValueError):
        pl.SearchConfig(subsample=0.0)
    with pytest.raises(ValueError):
        pl.SearchConfig(noise_schedule="per_batch")


def test_per_epoch_noise_schedule(small_task):
    model = _probe(small_task)
    pl.search(model, small_task, pl.SearchConfig(epochs=1, noise_schedule="per_epoch"))
    assert model.slots[0].arch.fixed_noise is None


# -- tuning and retraining

def test_tune_single_and_degenerate_configs(small_task):
    spec = pl.backbone_for_task(small_task)
    budget = pl.TuneBudget(epochs=2)
    only = pl.TrainConfig(0.01, 0.0, 0.9, 0.0)
    assert pl.tune(spec, [(3, 3)], small_task, [only], budget).best == only
    frozen = pl.TrainConfig(0.0, 0.0, 0.0, 0.0)
    live = pl.TrainConfig(0.05, 0.0, 0.9, 0.0)
    assert pl.tune(spec, [(3, 3)], small_task, [frozen, live], budget).best == live
    with pytest.raises(ValueError):
        pl.tune(spec, [(3, 3)], small_task, [], budget)


def test_full_grid_is_deterministic_and_sane(recovery_task):
    spec = pl.backbone_for_task(recovery_task)
    assert len(pl.TuneGrid().configs()) == 24
    runs = [pl.tune(spec, [(5, 3)], recovery_task, pl.TuneGrid()) for _ in range(2)]
    assert runs[0].to_dict() == runs[1].to_dict()
    assert runs[0].best.lr in (1e-1, 1e-2)


def test_retrain_reaches_noise_floor_and_beats_small_baseline():
    task = tasks.ground_truth_conv(5, 15, seed=0)
    spec = pl.backbone_for_task(task)
    cfg = pl.TrainConfig(0.1, 5e-6, 0.9, 0.0)
    good = pl.retrain(spec, [(5, 15)], task, cfg, epochs=20)
    base = pl.retrain(spec, [(3, 1)], task, cfg, epochs=20)
    assert good.test_metrics["loss"] <= 3 * task.noise_floor
    assert good.test_metrics["loss"] < base.test_metrics["loss"]
    again = pl.retrain(spec, [(5, 15)], task, cfg, epochs=20)
    assert again.test_metrics == good.test_metrics


def test_classification_pipeline_pieces():
    task = tasks.sum_of_dilated_motifs(3, 2, n=32, num_samples=120, num_test=40, seed=0)
    spec = pl.backbone_for_task(task, "wrn", channels=4)
    model = sn.SupernetModel(spec, SMALL)
    pl.search(model, task, pl.SearchConfig(epochs=1, batch_size=16))
    metrics = pl.evaluate(model, *task.val)
    assert 0.0 <= metrics["accuracy"] <= 1.0 and pl.score(metrics) == metrics["accuracy"]
    with pytest.raises(ValueError):
        pl.backbone_for_task(task, "probe")


# -- end to end

def test_full_pipeline_report_and_timing(small_task):
    cfg = pl.PipelineConfig(search=pl.SearchConfig(epochs=2, lr=0.1, batch_size=16),
                            grid=pl.TuneGrid(lr=(0.1,), weight_decay=(5e-4,), momentum=(0.9,), dropout=(0.0,)),
                            tune_budget=pl.TuneBudget(epochs=2), retrain_epochs=3)
    first = pl.run_full_pipeline(small_task, SMALL, cfg)
    second = pl.run_full_pipeline(small_task, SMALL, cfg)
    assert set(first.timing) == {"search", "tuning", "retraining", "total"}
    assert first.timing["total"] == pytest.approx(
        first.timing["search"] + first.timing["tuning"] + first.timing["retraining"])
    assert first.report_json() == second.report_json()
    for k, d in first.report["selected"]:
        assert (k, d) in SMALL.ops
