import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dashnas import mixedconv as mc
from dashnas import reference, spectral
from dashnas.bench import space_for_scale
from dashnas.pipeline import make_search_space
from dashnas.tensor import Tensor, backward
from dashnas.verify import random_instance, relative_error

STRATEGIES = [("mixed-results", "zero-insertion"), ("mixed-weights", "zero-insertion"),
              ("mixed-weights", "kronecker"), ("dash", "zero-insertion"), ("dash", "kronecker")]


def _run(x, bank, alpha, space, strategy, impl, padding="circular"):
    return mc.aggconv(Tensor(x), bank, Tensor(alpha), space, strategy, impl, padding).data


# -- dilation

def test_dilation_examples():
    w = Tensor(np.array([2.0, 3.0, 5.0]))
    for impl in mc.DilationImpl:
        assert np.array_equal(mc.dilate_kernel(w, 3, impl).data, [2, 0, 0, 3, 0, 0, 5])
        assert np.array_equal(mc.dilate_kernel(w, 1, impl).data, w.data)


@pytest.mark.parametrize("dim", [1, 2])
def test_kronecker_equals_zero_insertion_bitwise(rng, dim):
    space = make_search_space(dim)
    for k, d in space.ops:
        w = Tensor(rng.standard_normal((2, 3) + (k,) * dim))
        a = mc.dilate_kernel(w, d, "zero-insertion", dim).data
        b = mc.dilate_kernel(w, d, "kronecker", dim).data
        assert a.shape[-1] == mc.effective_size(k, d)
        assert a.tobytes() == b.tobytes()


def test_merged_kernel_linearity_example():
    space = mc.SearchSpace((3,), (1, 3))
    ones = Tensor(np.ones((1, 1, 3)))
    bank = mc.KernelBank({(3, 1): ones, (3, 3): ones}, 1, 1)
    for impl in mc.DilationImpl:
        merged = mc.merged_kernel(bank, Tensor([0.5, 0.5]), space, impl).data.ravel()
        expected = 0.5 * np.array([1, 1, 1, 0, 0, 0, 0]) + 0.5 * np.array([1, 0, 0, 1, 0, 0, 1])
        assert np.array_equal(merged, expected)


# -- strategy forward examples

def test_scalar_kernel_example():
    space = mc.SearchSpace((1,), (1,))
    bank = mc.KernelBank({(1, 1): Tensor(np.full((1, 1, 1), 2.0))}, 1, 1)
    x = np.array([[[1.0, 2.0, 3.0]]])
    for s, i in STRATEGIES:
        assert np.allclose(_run(x, bank, np.ones(1), space, s, i), [[[2, 4, 6]]], atol=1e-12)


def test_convolution_orientation(rng):
    """All strategies compute y[t] = sum_j w[j] x[t - j d]."""
    space = mc.SearchSpace((3,), (2,))
    bank = mc.KernelBank({(3, 2): Tensor(np.array([[[0.0, 1.0, 0.0]]]))}, 1, 1)
    x = np.zeros((1, 1, 8))
    x[0, 0, 1] = 1.0
    for s, i in STRATEGIES:
        y = _run(x, bank, np.ones(1), space, s, i).ravel()
        assert np.argmax(y) == 3 and np.isclose(y[3], 1.0), (s, i)


@pytest.mark.parametrize("padding", mc.PADDINGS)
def test_matches_brute_force_oracle(rng, padding):
    space = mc.SearchSpace((3, 5), (1, 3))
    bank = mc.KernelBank.initialize(space, 2, 2, rng)
    alpha = rng.dirichlet(np.ones(space.size))
    x = rng.standard_normal((2, 2, 16))
    ref = reference.aggconv(x, {key: w.data for key, w in bank.weights.items()}, alpha, space.ops, padding)
    for s, i in STRATEGIES:
        assert np.max(np.abs(_run(x, bank, alpha, space, s, i, padding) - ref)) <= 1e-9


def test_one_hot_equals_single_conv(rng):
    space = mc.SearchSpace((3, 5, 7), (1, 2, 4))
    bank = mc.KernelBank.initialize(space, 2, 3, rng)
    x = rng.standard_normal((2, 2, 20))
    for idx, (k, d) in enumerate(space.ops):
        one_hot = np.eye(space.size)[idx]
        single = mc.single_conv(Tensor(x), bank[k, d], d).data
        for s, i in STRATEGIES:
            assert np.max(np.abs(_run(x, bank, one_hot, space, s, i) - single)) <= 1e-10


def test_kernel_longer_than_input(rng):
    space = mc.SearchSpace((5,), (7,))  # effective size 29 on n = 6
    bank = mc.KernelBank.initialize(space, 1, 2, rng)
    x = rng.standard_normal((1, 1, 6))
    for padding in mc.PADDINGS:
        outs = [_run(x, bank, np.ones(1), space, s, i, padding) for s, i in STRATEGIES]
        assert all(relative_error(o, outs[0]) <= 1e-12 for o in outs)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([1, 2]))
def test_strategy_equivalence_property(seed, dim):
    r = np.random.default_rng(seed)
    inst = random_instance(r, max_n=64, max_channels=3, ndim=dim)
    up = r.standard_normal(inst["x"].shape[:1] + (inst["bank"].c_out,) + inst["x"].shape[2:])
    results = {}
    for s, i in STRATEGIES:
        x, alpha = Tensor(inst["x"], requires_grad=True), Tensor(inst["alpha"], requires_grad=True)
        for p in inst["bank"].parameters():
            p.grad = None
        y = mc.aggconv(x, inst["bank"], alpha, inst["space"], s, i, inst["padding"])
        backward(y, up)
        results[s, i] = (y.data, [x.grad, alpha.grad] + [p.grad for p in inst["bank"].parameters()])
    y0, g0 = results[STRATEGIES[0]]
    for y, g in results.values():
        assert relative_error(y, y0) <= 1e-8
        assert max(relative_error(a, b) for a, b in zip(g, g0)) <= 1e-6


def test_linearity_in_input(rng):
    space = mc.SearchSpace((3, 5), (1, 3))
    bank = mc.KernelBank.initialize(space, 2, 2, rng)
    alpha = rng.dirichlet(np.ones(space.size))
    x1, x2 = rng.standard_normal((2, 1, 2, 24))
    for s, i in STRATEGIES:
        lhs = _run(1.5 * x1 - 0.5 * x2, bank, alpha, space, s, i)
        rhs = 1.5 * _run(x1, bank, alpha, space, s, i) - 0.5 * _run(x2, bank, alpha, space, s, i)
        assert np.max(np.abs(lhs - rhs)) <= 1e-9


def test_dash_transform_counts(rng):
    space = mc.SearchSpace((3, 5), (1, 3))
    bank = mc.KernelBank.initialize(space, 3, 4, rng)
    x = Tensor(rng.standard_normal((5, 3, 32)))
    with spectral.count_transforms() as c:
        mc.dash_forward(x, bank, Tensor(np.full(4, 0.25)), space)
    assert (c["input"], c["kernel"], c["inverse"]) == (5 * 3, 4 * 3, 5 * 4)


def test_fft_length_policy():
    assert mc.fft_length(64, 13) == 64
    assert mc.fft_length(1000, 1779) == 2048
    assert mc.fft_length(1000, 13, "causal") == 1024
    assert mc.fft_length(1000, 1779, "causal") == 4096


# -- relaxation

def test_uniform_logits_give_uniform_alpha():
    a = mc.normalize_alpha(mc.ArchParams(16)).data
    assert np.allclose(a, 1 / 16)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-30, 30), min_size=1, max_size=20), st.floats(0.05, 20), st.integers(0, 1000))
def test_simplex_and_argmax_invariance(logits, temperature, seed):
    logits = np.array(logits)
    for mode in ("softmax", "gumbel_softmax"):
        a = mc.normalize_alpha(mc.ArchParams(len(logits), temperature, mode, seed, logits)).data
        assert np.all(a >= 0) and abs(a.sum() - 1) <= 1e-12
    a1 = mc.normalize_alpha(mc.ArchParams(len(logits), 1.0, "softmax", logits=logits)).data
    at = mc.normalize_alpha(mc.ArchParams(len(logits), temperature, "softmax", logits=logits)).data
    if np.sum(logits == logits.max()) == 1:
        assert np.argmax(a1) == np.argmax(at)


def test_argmax_tie_rule():
    space = mc.SearchSpace((3, 5), (1, 3))
    assert mc.argmax_op(np.full(4, 0.25), space) == (3, 1)


def test_gumbel_noise_is_fresh_per_call():
    arch = mc.ArchParams(5, mode="gumbel_softmax", seed=3)
    assert not np.array_equal(mc.normalize_alpha(arch).data, mc.normalize_alpha(arch).data)
    arch.fixed_noise = arch.draw_noise()
    assert np.array_equal(mc.normalize_alpha(arch).data, mc.normalize_alpha(arch).data)


def test_search_space_validation():
    with pytest.raises(ValueError):
        mc.SearchSpace((), (1,))
    with pytest.raises(ValueError):
        mc.SearchSpace((4,), (1,))
    assert mc.SearchSpace((4,), (1,), allow_even=True).d_bar == 4


# -- cost model

def test_count_ops_examples():
    space = mc.SearchSpace((3, 5), (1, 3))
    assert (space.k_bar, space.d_bar) == (16, 13)
    mr = mc.count_ops("mixed-results", 1, 1, 32, space)
    assert mr.mults == mr.adds == 640
    assert mc.count_ops("mixed-weights", 1, 1, 32, space).mults == 432
    one = mc.SearchSpace((1,), (1,))
    assert mc.count_ops("mixed-results", 1, 1, 50, one).mults == 100
    assert mc.count_ops("mixed-weights", 1, 1, 50, one).mults == 51


def _fft_part(report):
    m = report.fft_model
    if m is None:
        return 0, 0
    b = m["butterflies_per_transform"] * m["transforms"]
    return m["mults_per_butterfly"] * b, m["adds_per_butterfly"] * b


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 8), st.integers(1, 8), st.integers(1, 4096),
       st.sets(st.sampled_from([1, 3, 5, 7, 9, 11, 13, 15]), min_size=1, max_size=4),
       st.sets(st.integers(1, 63), min_size=1, max_size=4))
def test_count_ops_matches_tally_oracle(c_in, c_out, n, ks, ds):
    space = mc.SearchSpace(tuple(ks), tuple(ds))
    for s in mc.MixStrategy:
        r = mc.count_ops(s, c_in, c_out, n, space)
        fm, fa = _fft_part(r)
        assert (r.mults - fm, r.adds - fa) == reference.op_counts(s.value, c_in, c_out, n, ks, ds)


def test_count_ops_monotone():
    base = dict(c_in=2, c_out=3, n=100)
    space = mc.SearchSpace((3, 5), (1, 3))
    bigger = [mc.SearchSpace((3, 5, 7), (1, 3)), mc.SearchSpace((3, 5), (1, 3, 7))]
    for s in mc.MixStrategy:
        ref = mc.count_ops(s, space=space, **base)
        for key in base:
            r = mc.count_ops(s, space=space, **(base | {key: base[key] + 1}))
            assert r.mults >= ref.mults and r.adds >= ref.adds
        for sp in bigger:
            r = mc.count_ops(s, space=sp, **base)
            assert r.mults >= ref.mults and r.adds >= ref.adds
    with pytest.raises(ValueError):
        mc.count_ops("dash", 1, 1, 0, space)


def test_crossover_examples():
    few_dilations = mc.SearchSpace((9, 11, 13), (1,))
    assert few_dilations.d_bar < few_dilations.k_bar
    for row in mc.crossover_analysis(few_dilations, [2 ** e for e in range(8, 16)]):
        assert row["totals"]["mixed-weights"] < row["totals"]["mixed-results"]
    assert mc.crossover_analysis(space_for_scale(7), [1000])[0]["cheapest"] == "dash"
    single = mc.crossover_analysis(mc.SearchSpace((3,), (1,)), [64, 1000])
    for row in single:
        t = row["totals"]
        assert max(t["mixed-results"], t["mixed-weights"]) <= 2 * min(t["mixed-results"], t["mixed-weights"])
    with pytest.raises(ValueError):
        mc.crossover_analysis(few_dilations, [])


def test_report_json_round_trip():
    r = mc.count_ops("dash", 2, 2, 64, mc.SearchSpace((3,), (1, 2)))
    assert r.to_dict()["fft_model"]["length"] == 64
    assert '"strategy": "dash"' in r.to_json()
