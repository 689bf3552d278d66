"""
Value versus diversity
======================

Sweep the weight lambda of the log-det diversity term and watch total
value fall while diversity rises.  The greedy columns know the true
utility and serve as the reference curve.
"""

from gpselect import (BetaSchedule, GramMatrix, KernelSpec, PolicyConfig, diversity_value,
                      greedy_oracle, run_gp_select, synth_gp_itemset)

kernel = KernelSpec("rbf", 0.3)
items, oracle = synth_gp_itemset(300, 2, kernel, 0.1, seed=0)
G = GramMatrix(kernel, items.features)
f = oracle.true_values
sigma_n = 1.0

print("lambda    value   diversity | greedy value  greedy diversity")
for lam in [0.0, 0.5, 0.75, 0.875, 0.9375, 0.96875]:
    oracle.reseed(0)
    cfg = PolicyConfig("diverse", 60, BetaSchedule("constant", 1.0), lam=lam, sigma_n=sigma_n)
    S = run_gp_select(items, oracle, kernel, cfg, gram=G).selected
    g = greedy_oracle(f, G, lam, sigma_n, budget=60)
    print(f"{lam:7.5f} {f[S].sum():8.1f} {diversity_value(G, S, sigma_n):10.3f} |"
          f" {f[g].sum():12.1f} {diversity_value(G, g, sigma_n):16.3f}")
