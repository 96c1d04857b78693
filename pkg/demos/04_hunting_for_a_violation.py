"""
Hunting for a CHSH violation
============================

Draw a million random LHV models and record the largest |S| seen.
"""

from chsh_forge import SettingUniverse, chsh, hunt, random_model
from chsh_forge.optimizer import histogram_edges

report = hunt(master_seed=1, count=1_000_000, space_size=8)
print("models:", report.n_models, "violations:", report.violations)
print("max |S|:", report.max_abs_s, "at index", report.argmax_index)

# any model in the report can be rebuilt from its seed
again = random_model(report.argmax_seed, 8, SettingUniverse.minimal())
print("rebuilt S:", chsh(again))

edges = histogram_edges()
for lo, count in zip(edges, report.histogram):
    if count:
        print(f"[{lo:+.2f}, {lo + 0.05:+.2f})  {'#' * int(60 * count / report.histogram.max())}")
