"""
Picking valuable items under a budget
=====================================

Draw a smooth utility over 400 points in the unit square, then let the
UCB rule spend 40 queries on it and compare with random picking.
"""

import numpy as np

from gpselect import BetaSchedule, KernelSpec, PolicyConfig, run_baseline, run_gp_select, synth_gp_itemset

kernel = KernelSpec("rbf", bandwidth=0.25)
items, oracle = synth_gp_itemset(400, 2, kernel, noise_bound=0.1, seed=1)
f = oracle.true_values
print(f"{items.n} items, best value {f.max():.2f}, mean value {f.mean():.2f}")

# mean + 3 sigma: wide enough to look beyond the first good region
config = PolicyConfig("uniform", budget=40, beta=BetaSchedule("constant", 9.0))
trace = run_gp_select(items, oracle, kernel, config)

oracle.reseed(1)
rand = run_baseline(items, oracle, kernel, "random", 40, seed=1)

top40 = np.sort(f)[::-1][:40].sum()
print(f"best possible 40-item value: {top40:.1f}")
print(f"GP-Select:                  {trace.total_value:.1f}")
print(f"random:                     {rand.total_value:.1f}")

# the first rounds explore, later rounds stay among the best items
for r in trace.rounds[:5] + trace.rounds[-3:]:
    print(f"round {r.t:2d}  item {r.item:3d}  y={r.y:+.2f}  true={r.value:.2f}")
