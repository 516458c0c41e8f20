import csv
import json
import math

import numpy as np
import pytest
from scipy.stats import spearmanr

from dashnas import bench
from dashnas import mixedconv as mc
from dashnas.cli import main

TINY = bench.BenchSetup(n=64, batch=4, batches=1, trials=3, backbone="probe")


def _read_csv(path):
    with open(path, newline="") as f:
        return list(csv.reader(f))


# -- bench library

def test_space_for_scale():
    assert bench.space_for_scale(1) == mc.SearchSpace((3,), (1,))
    sp = bench.space_for_scale(7)
    assert sp.kernel_sizes == (3, 5, 7, 9, 11, 13, 15) and sp.dilations[-1] == 127
    with pytest.raises(ValueError):
        bench.space_for_scale(0)


def test_setup_validation():
    with pytest.raises(ValueError):
        bench.BenchSetup(trials=2)
    assert bench.BenchSetup(batch=128, dataset=1000).batches_per_epoch == 8


def test_bench_space_table_and_sidecar(tmp_path):
    results = bench.bench_space([1, 2], TINY)
    assert len(results) == 2 * 5
    assert all(len(r.trials) == 3 and r.median > 0 and not math.isnan(r.variance) for r in results)
    out = tmp_path / "space.csv"
    bench.write_results(out, results, "c", TINY, space_of=bench.space_for_scale)
    rows = _read_csv(out)
    assert rows[0] == ["c", "k_bar", "d_bar", *bench.METHOD_NAMES]
    assert [r[0] for r in rows[1:]] == ["1", "2"]
    side = json.loads(bench.sidecar_path(out).read_text())
    assert len(side["results"]) == 10 and all(r["trial_count"] == 3 for r in side["results"])
    bench.write_results(out, results, "c", TINY, space_of=bench.space_for_scale)
    assert len(_read_csv(out)) == 3  # rewrite, not append
    assert not list(tmp_path.glob(".*.tmp"))


def test_out_of_memory_is_per_cell(monkeypatch):
    def boom(space, strategy, impl, setup):
        if strategy == "mixed-results":
            raise MemoryError("simulated")
        return [1.0, 2.0, 3.0]

    monkeypatch.setattr(bench, "time_search_epoch", boom)
    results = bench.bench_space([1], TINY)
    errs = [r for r in results if r.error]
    assert len(errs) == 1 and errs[0].method == "mixed-results"
    header, rows = bench.to_table(results, "c")
    assert rows[0][header.index("mixed-results")] == ""
    assert rows[0][header.index("dash")] == repr(2.0)


def test_bench_length_rows_and_model_correlation():
    lengths = [2 ** e for e in range(7, 13)]
    setup = bench.BenchSetup(batch=8, batches=1, trials=5, backbone="probe")
    results = bench.bench_length([32] + lengths, bench.LENGTH_SPACE, setup)
    header, rows = bench.to_table(results, "n", lambda n: bench.LENGTH_SPACE)
    assert rows[0][0] == 32 and all(cell != "" for cell in rows[0][3:8])
    assert header[-3:] == [f"predicted_mults_{s}" for s in ("mixed-results", "mixed-weights", "dash")]
    med = bench.median_table(results)
    for method, strategy in (("mixed-results", "mixed-results"), ("mixed-weights", "mixed-weights"),
                             ("dash", "dash")):
        times = [med[n][method] for n in lengths]
        model = [mc.count_ops(strategy, 1, 1, n, bench.LENGTH_SPACE).mults for n in lengths]
        assert spearmanr(times, model).statistic > 0.9, method
    with pytest.raises(ValueError):
        bench.bench_length([48], bench.LENGTH_SPACE, TINY)


# -- CLI

def test_cli_verify_exit_codes(capsys):
    assert main(["verify", "--instances", "5", "--n", "32"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["passed"] and report["suites"]["strategy_equivalence"]["max_deviation"] <= 1e-8
    code = main(["verify", "--instances", "5", "--n", "32", "--suite", "strategy_equivalence",
                 "--inject-fault", "orientation"])
    err = capsys.readouterr().err
    assert code == 1 and "strategy_equivalence" in err


def test_cli_opcount_echoes_counts(capsys):
    assert main(["opcount", "--space", "4", "--n", "1000"]) == 0
    doc = json.loads(capsys.readouterr().out)
    space = bench.space_for_scale(4)
    assert (doc["k_bar"], doc["d_bar"]) == (space.k_bar, space.d_bar)
    assert len(doc["counts"]) == 3
    for entry in doc["counts"]:
        r = mc.count_ops(entry["strategy"], 1, 1, 1000, space)
        assert (entry["mults"], entry["adds"]) == (r.mults, r.adds)
    assert main(["opcount", "--K", "3,5", "--D", "1,3", "--n", "32", "--format", "csv"]) == 0
    rows = list(csv.reader(capsys.readouterr().out.splitlines()))
    assert rows[1][:1] == ["mixed-results"] and rows[1][-2] == "640" and rows[2][-2] == "432"


def test_cli_usage_errors(capsys):
    assert main(["opcount", "--n", "5", "--bogus"]) == 2
    assert main(["opcount", "--n", "5"]) == 2
    assert main(["opcount", "--space", "3", "--K", "3", "--n", "5"]) == 2
    assert main(["bench-length", "--n", "48", "--trials", "3"]) == 2
    assert main(["search", "--data", "/nonexistent/dir"]) == 2
    assert main([]) == 2
    capsys.readouterr()


def test_cli_bench_space_writes_csv(tmp_path, capsys):
    out = tmp_path / "fig2.csv"
    code = main(["bench-space", "--space", "1..2", "--n", "64", "--batch", "4", "--batches", "1",
                 "--trials", "3", "--backbone", "probe", "--out", str(out)])
    assert code == 0
    rows = _read_csv(out)
    assert len(rows) == 3 and len(rows[0]) == 3 + 5
    assert bench.sidecar_path(out).exists()
    capsys.readouterr()


def test_cli_search_strategies_agree(capsys):
    picks = []
    for strategy in ("mixed-results", "dash"):
        assert main(["search", "--task", "recovery", "--seed", "3", "--epochs", "3", "--samples", "400",
                     "--strategy", strategy]) == 0
        picks.append(json.loads(capsys.readouterr().out))
    assert picks[0]["selected"] == picks[1]["selected"]
    assert np.allclose(picks[0]["alphas"], picks[1]["alphas"], atol=1e-8)


def test_cli_pipeline_is_byte_identical(tmp_path, capsys):
    args = ["pipeline", "--task", "recovery", "--seed", "7", "--samples", "400", "--epochs", "5",
            "--tune-epochs", "2", "--retrain-epochs", "3"]
    for name in ("a.json", "b.json"):
        assert main(args + ["--out", str(tmp_path / name)]) == 0
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
    timing = json.loads((tmp_path / "a.json.timing.json").read_text())
    assert set(timing) == {"search", "tuning", "retraining", "total"}


def test_cli_saved_task_round_trip(tmp_path, capsys):
    d = tmp_path / "task"
    base = ["search", "--task", "recovery", "--seed", "1", "--epochs", "2", "--samples", "200"]
    assert main(base + ["--save-task", str(d)]) == 0
    first = capsys.readouterr().out
    assert main(base + ["--data", str(d)]) == 0
    assert json.loads(capsys.readouterr().out)["selected"] == json.loads(first)["selected"]
