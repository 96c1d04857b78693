"""
Estimates above 2 from a model with S = 2
=========================================

A finite experiment estimates S with noise. For a model sitting exactly on the
bound, roughly half of all short runs report s_hat > 2.
"""

import math

import numpy as np

from chsh_forge import HiddenSpace, LhvModel, SettingUniverse, chsh, empirical_chsh, fluctuation_demo, run_trials
from chsh_forge.experiment import round_robin_schedule

universe = SettingUniverse.minimal()
model = LhvModel(HiddenSpace(("l0", "l1"), [0.5, 0.5]), universe, [[1, 1], [-1, 1]], [[1, -1], [-1, 1]])
print("exact S:", chsh(model))

log = run_trials(model, round_robin_schedule(universe, 100), seed=1)
rep = empirical_chsh(log)
print(f"one run of 400 trials: s_hat = {rep.s_hat:.3f} +/- {rep.s_stderr:.3f}")

demo = fluctuation_demo(model, n_per_pair=100, runs=10_000, seed=7)
exact_p = (1 - math.comb(200, 100) / 2**200) / 2
print(f"fraction of runs with |s_hat| > 2: {demo.fraction:.4f} (binomial value {exact_p:.4f})")
print("s_hat quantiles:", np.quantile(demo.s_hats, [0.01, 0.5, 0.99]))

# on the bound the fraction stays near one half at every N; strictly inside, it vanishes
inside = LhvModel(HiddenSpace.uniform(8), universe, np.ones((8, 2)), [[1, -1]] * 7 + [[1, 1]])
print("exact S of the second model:", chsh(inside))
for n in (100, 10_000, 1_000_000):
    on_bound = fluctuation_demo(model, n, 200, seed=2).fraction
    below = fluctuation_demo(inside, n, 200, seed=2).fraction
    print(f"n_per_pair={n:>9}: S=2 model {on_bound:.3f}, S=1.5 model {below:.3f}")
