"""Operation counts for the three mixing strategies, and where each one wins.

Run: python demos/02_cost_model.py
"""

from dashnas import mixedconv as mc
from dashnas.bench import space_for_scale

# %% Hand check: K={3,5}, D={1,3}, one channel in and out, n=32.
space = mc.SearchSpace((3, 5), (1, 3))
for s in mc.MixStrategy:
    r = mc.count_ops(s, 1, 1, 32, space)
    print(f"{s.value:14s} mults={r.mults:6d} adds={r.adds:6d}")
# (16 + 4) * 32 = 640 for mixed-results, 16 + 13 * 32 = 432 for mixed-weights

# %% The dash counts include a radix-2 FFT model; its constants travel with the report.
print(mc.count_ops("dash", 1, 1, 32, space).fft_model)

# %% Leading n-terms: mixed-results scales with K_bar, mixed-weights with D_bar.
# Few large kernels at small dilation favour mixed-weights; wide dilations do not.
for name, sp in [("big kernels, d=1", mc.SearchSpace((9, 11, 13), (1,))),
                 ("scale c=4", space_for_scale(4))]:
    print(f"{name:18s} K_bar={sp.k_bar:4d} D_bar={sp.d_bar:4d} mixed-weights favoured: {mc.mixed_weights_favored(sp)}")

# %% Sweep the search-space scale c at n=1000: the spectral strategy takes over as D_bar grows.
print("\n c  K_bar  D_bar  cheapest        MR/dash  MW/dash")
for c in range(1, 8):
    sp = space_for_scale(c)
    row, = mc.crossover_analysis(sp, [1000])
    t = row["totals"]
    print(f"{c:2d} {sp.k_bar:6d} {sp.d_bar:6d}  {row['cheapest']:14s} {t['mixed-results'] / t['dash']:8.2f}"
          f" {t['mixed-weights'] / t['dash']:8.2f}")
