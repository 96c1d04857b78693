"""
Four local models, one per setting pair
=======================================

Each component reproduces a single singlet correlation and is itself local.
Answering each setting pair with its own component yields S = 2*sqrt(2),
which no single local model can reach.
"""

import math

from chsh_forge import QuantumTargets, SettingUniverse, chsh, chsh_nonlocal, construct_target_model, stitch
from chsh_forge.pool import component_table, draw_pool, select_matching_trials, stitch_selection

universe = SettingUniverse.minimal()
targets = QuantumTargets.singlet(universe)

components = {q: construct_target_model(q, targets.per_pair[q], universe) for q in universe.quartet}
stitched = stitch(components)
print(f"stitched S* = {chsh_nonlocal(stitched):.10f}  (2*sqrt(2) = {2 * math.sqrt(2):.10f})")
for row in component_table(stitched):
    print(f"  {row['pair']}: E = {row['correlation']:+.4f}, component's own S = {row['component_chsh']:+.4f}")

# the same thing from a random pool: pick the earliest trial per pair that hits its target
pool = draw_pool(seed=3, n_trials=20_000, universe=universe, space_size=8)
selection = select_matching_trials(pool, targets, tol=0.01)
print("selected trials:", selection.matches)
picked = stitch_selection(pool, selection)
print(f"pool-selected S* = {chsh_nonlocal(picked):.4f}")
for q, n in selection.matches.items():
    print(f"  trial {n} alone: S = {chsh(pool[n - 1].model):+.4f}")
