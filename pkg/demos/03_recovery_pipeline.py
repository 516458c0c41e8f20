"""Search, tune and retrain on a task whose best operation is known.

The targets are a planted dilated convolution of white noise plus Gaussian
noise, so the ideal choice is the planted (k*, d*) and the best reachable test
MSE is the noise variance.

Run: python demos/03_recovery_pipeline.py
"""

import json

from dashnas import pipeline as pl
from dashnas import tasks

# %% A planted Conv_{5,3} on length-64 signals: 1600 train, 400 validation, 500 test.
task = tasks.ground_truth_conv(k_star=5, d_star=3, n=64, seed=1)
print("task:", task.metadata())
print("search space:", pl.RECOVERY_SPACE.to_dict())

# %% One searched convolution, 30 search epochs on 20% subsamples, a 24-config grid,
# then a 50-epoch retrain on train + validation.
cfg = pl.recovery_config(seed=1)
result = pl.run_full_pipeline(task, pl.RECOVERY_SPACE, cfg)
report = result.report

print("selected (k, d):", report["selected"])
print("search loss, first and last epoch:", report["search_losses"][0], report["search_losses"][-1])
print("tuned config:", report["tuning"]["best"])
print(f"test MSE {report['test_metrics']['loss']:.5f} vs noise floor {task.noise_floor:.5f}")
print("phase seconds:", json.dumps({k: round(v, 2) for k, v in result.timing.items()}))

# %% The architecture weights after search, largest first.
alpha = report["alphas"][0]
ranked = sorted(zip(alpha, pl.RECOVERY_SPACE.ops), reverse=True)[:5]
for a, (k, d) in ranked:
    print(f"  alpha[{k:2d},{d:2d}] = {a:.3f}")

# %% Same seed, same bytes.
again = pl.run_full_pipeline(task, pl.RECOVERY_SPACE, cfg)
print("report reproducible:", again.report_json() == result.report_json())
