"""Wall-clock search epochs for the five mixing methods, at a size that runs in a minute.

Writes two CSV tables plus JSON sidecars of the raw trials into ./bench_out.
The full sweeps are ``dashnas bench-space`` and ``dashnas bench-length``.

Run: python demos/04_benchmarks.py
"""

from pathlib import Path

from dashnas import bench

out = Path("bench_out")
setup = bench.BenchSetup(n=256, batch=8, batches=1, trials=3, backbone="wrn", channels=4)

# %% Time versus search-space scale c (K and D both grow with c).
space_runs = bench.bench_space(range(1, 5), setup)
bench.write_results(out / "space.csv", space_runs, "c", setup, space_of=bench.space_for_scale)
med = bench.median_table(space_runs)
print(" c " + "".join(f"{m:>26s}" for m in bench.METHOD_NAMES))
for c, row in med.items():
    print(f"{c:2d} " + "".join(f"{row[m] * 1e3:24.1f}ms" for m in bench.METHOD_NAMES))

# %% Time versus input length on a fixed space.
length_runs = bench.bench_length([64, 128, 256, 512], bench.LENGTH_SPACE, setup)
bench.write_results(out / "length.csv", length_runs, "n", setup, space_of=lambda n: bench.LENGTH_SPACE)
for n, row in bench.median_table(length_runs).items():
    print(f"n={n:4d}  mixed-results {row['mixed-results'] * 1e3:7.1f}ms  dash+kronecker {row['dash+kronecker'] * 1e3:7.1f}ms")
print("tables written to", out.resolve())
