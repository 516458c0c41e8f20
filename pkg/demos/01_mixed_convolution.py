"""Three ways to evaluate a mixture of dilated convolutions.

An AggConv layer holds one kernel per (k, d) candidate and a weight alpha for
each. Mixing the outputs, mixing the kernels, and mixing the kernels then
convolving in the Fourier domain all give the same answer; this script shows
that, shows the Kronecker view of dilation, and counts the transforms the
spectral path issues.

Run: python demos/01_mixed_convolution.py
"""

import numpy as np

from dashnas import mixedconv as mc
from dashnas import spectral
from dashnas.tensor import Tensor

rng = np.random.default_rng(0)

# %% A small search space: kernel sizes K and dilations D, candidates in (k, d) order.
space = mc.SearchSpace((3, 5, 7), (1, 2, 4))
print("candidates:", space.ops)
print(f"K_bar = |D| * sum(K) = {space.k_bar},  D_bar = largest effective size = {space.d_bar}")

# %% Dilation spreads k taps over (k-1)d+1 positions.  The Kronecker form is w (x) [1, 0, ..., 0],
# trimmed; both routes give the same bytes.
w = Tensor(np.array([1.0, -2.0, 3.0]))
print("zero insertion, d=3:", mc.dilate_kernel(w, 3, "zero-insertion").data)
print("kronecker,      d=3:", mc.dilate_kernel(w, 3, "kronecker").data)

# %% Random weights, a random point on the simplex, and a batch of signals.
c_in, c_out, n = 3, 2, 128
bank = mc.KernelBank.initialize(space, c_in, c_out, rng)
alpha = Tensor(rng.dirichlet(np.ones(space.size)))
x = Tensor(rng.standard_normal((4, c_in, n)))

outputs = {}
for strategy in mc.MixStrategy:
    outputs[strategy.value] = mc.aggconv(x, bank, alpha, space, strategy).data
ref = outputs["mixed-results"]
for name, y in outputs.items():
    print(f"{name:14s} max |y - y_mixed_results| = {np.max(np.abs(y - ref)):.2e}")

# %% The spectral path transforms each input channel once, each kernel pair once,
# and each output channel once.
with spectral.count_transforms() as counts:
    mc.aggconv(x, bank, alpha, space, "dash")
print("transforms:", dict(counts), "expected", {"input": 4 * c_in, "kernel": c_out * c_in, "inverse": 4 * c_out})

# %% A one-hot alpha turns the mixture into a single convolution, which is what
# discretization keeps.
k, d = 5, 4
one_hot = Tensor(np.eye(space.size)[space.index(k, d)])
mixed = mc.aggconv(x, bank, one_hot, space, "dash").data
single = mc.single_conv(x, bank[k, d], d).data
print(f"one-hot at ({k},{d}) vs Conv_{{{k},{d}}}: {np.max(np.abs(mixed - single)):.2e}")

# %% Causal (zero) padding is supported by every strategy as well.
causal = [mc.aggconv(x, bank, alpha, space, s, padding="causal").data for s in mc.MixStrategy]
print("causal padding spread:", max(np.max(np.abs(c - causal[0])) for c in causal))
