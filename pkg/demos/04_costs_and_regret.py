"""
Item costs and regret
=====================

Give each item a price in [0.5, 3] and spend a budget of 30 cost units.
The cost-aware rule ranks by score per unit cost; regret is measured
against the knapsack optimum that knows the true values.
"""

from gpselect import (BetaSchedule, KernelSpec, PolicyConfig, regret_curve, run_baseline, run_gp_select,
                      synth_gp_itemset, value_references)

kernel = KernelSpec("rbf", 0.25)
items, oracle = synth_gp_itemset(300, 2, kernel, 0.1, cost_range=(0.5, 3.0), seed=4)
f = oracle.true_values

checkpoints = [5, 10, 20, 30]
# costs are real numbers, so the DP works on a 0.01 grid
refs = value_references(f, items.costs, checkpoints, resolution=0.01)

oracle.reseed(4)
cfg = PolicyConfig("cost", 30.0, BetaSchedule("constant", 4.0))
runs = {"gp_select-cost": run_gp_select(items, oracle, kernel, cfg)}
oracle.reseed(4)
runs["random"] = run_baseline(items, oracle, kernel, "random", 30.0, seed=4, cost_aware=True)

for name, trace in runs.items():
    print(f"{name}  ({len(trace.rounds)} items, {trace.leftover_budget:.2f} budget left over)")
    for row in regret_curve(trace, "value_regret", refs, f=f).rows:
        print(f"  B={row.B:5.1f}  F(S)={row.F_S:7.2f}  opt={row.oracle:7.2f}  R_B/B={row.avg_regret:.3f}")
