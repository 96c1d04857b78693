"""
Why no local model beats |S| = 2
================================

Build a small LHV model by hand, compute its CHSH value two ways, and look at
the per-point integrand that makes the bound obvious.
"""

import numpy as np

from chsh_forge import HiddenSpace, LhvModel, SettingUniverse, chsh, factorization_check, integrand_values
from chsh_forge.optimizer import brute_force_chsh, enumerate_deterministic

universe = SettingUniverse.minimal()

# three hidden points; columns are (a1, a2) for Alice and (b1, b2) for Bob
model = LhvModel(
    HiddenSpace(("p", "q", "r"), [0.5, 0.3, 0.2]),
    universe,
    alice_table=np.array([[1, 1], [-1, 1], [1, -1]]),
    bob_table=np.array([[1, -1], [-1, -1], [1, 1]]),
)

print("S from four correlations:", chsh(model))
print("S from the integrand:    ", brute_force_chsh(model))

# at each point, A1(B1 - B2) - A2(B1 + B2) is +2 or -2, so the weighted mean sits in [-2, 2]
for point, value in integrand_values(model):
    print(f"  point {point}: {value:+d}")

# the sixteen deterministic strategies are the corners
for strategy, s in enumerate_deterministic():
    print(strategy, s)

print("factorizes:", factorization_check(model).factorized)
