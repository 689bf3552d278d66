"""Reference solutions used to measure regret.

All of these assume the true utility is known, so they only make sense in
simulation: exact knapsack by dynamic programming or enumeration, the
greedy solution of the combined value/diversity objective, and the
maximum information gain gamma_B.
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .diversity import DiversityState, diversity_value
from .kernels import GramMatrix, information_constant, logdet_identity_plus

GREEDY_FACTOR = 1.0 - 1.0 / math.e
# greedy guarantee quoted for the non-uniform cost hindsight reference
COST_GREEDY_FACTOR = 0.5
MAX_ENUMERATION = 20


def knapsack_dp(values, costs, budget: float, resolution: float = 1.0):
    """0/1 knapsack on a cost grid.

    Costs are rounded *up* to multiples of ``resolution`` and the budget
    down, so the returned subset is feasible for the real costs and its
    value is a lower bound on the true optimum (exact for integer costs at
    resolution 1).  Returns ``(sorted subset, value)``.
    """
    values = np.asarray(values, dtype=float)
    costs = np.asarray(costs, dtype=float)
    if values.shape != costs.shape:
        raise ValueError("values and costs differ in length")
    if np.any(values < 0):
        raise ValueError("values must be non-negative")
    if np.any(costs <= 0):
        raise ValueError("costs must be positive")
    if not resolution > 0:
        raise ValueError("resolution must be positive")
    n = values.size
    weights = np.ceil(costs / resolution - 1e-9).astype(np.int64)
    capacity = int(math.floor(budget / resolution + 1e-9))
    if n == 0 or capacity <= 0:
        return [], 0.0
    best = np.zeros(capacity + 1)
    take = np.zeros((n, capacity + 1), dtype=bool)
    for i in range(n):
        w = weights[i]
        if w > capacity:
            continue
        candidate = best[: capacity + 1 - w] + values[i]
        better = candidate > best[w:]
        take[i, w:] = better
        best[w:] = np.where(better, candidate, best[w:])
    subset = []
    c = capacity
    for i in range(n - 1, -1, -1):
        if take[i, c]:
            subset.append(i)
            c -= weights[i]
    subset.sort()
    return subset, float(values[subset].sum()) if subset else 0.0


def exhaustive_opt(values, costs, budget: float):
    """Best subset by enumerating all 2^n subsets (n <= 20)."""
    values = np.asarray(values, dtype=float)
    costs = np.asarray(costs, dtype=float)
    n = values.size
    if n > MAX_ENUMERATION:
        raise ValueError(f"refusing to enumerate 2^{n} subsets (limit n <= {MAX_ENUMERATION})")
    if n == 0:
        return [], 0.0
    total_value = np.zeros(1)
    total_cost = np.zeros(1)
    for i in range(n):
        # subset mask m has bit i set for the upper half after this step
        total_value = np.concatenate([total_value, total_value + values[i]])
        total_cost = np.concatenate([total_cost, total_cost + costs[i]])
    feasible = total_cost <= budget * (1 + 1e-12)
    masked = np.where(feasible, total_value, -np.inf)
    best = int(np.argmax(masked))
    subset = [i for i in range(n) if best >> i & 1]
    return subset, float(total_value[best])


def combined_value(f, gram, S, lam: float, sigma_n: Optional[float]) -> float:
    """F(S) = (1 - lam) * sum f + lam * D(S)."""
    S = list(S)
    value = float(np.sum(np.asarray(f)[S])) if S else 0.0
    if lam == 0:
        return value
    return (1.0 - lam) * value + lam * diversity_value(gram, S, sigma_n)


def greedy_oracle(f, gram, lam: float = 0.0, sigma_n: Optional[float] = None,
                  costs=None, budget: float = 1.0) -> list:
    """Greedy maximisation of F with full knowledge of f.

    With ``costs`` the gain per unit cost is maximised over items that still
    fit; without, every item costs one unit.  Ties go to the lowest id.
    """
    f = np.asarray(f, dtype=float)
    n = f.size
    if not isinstance(gram, GramMatrix):
        gram = GramMatrix.from_array(gram)
    charge = np.ones(n) if costs is None else np.asarray(costs, dtype=float)
    div = DiversityState(gram, sigma_n) if lam > 0 else None
    available = charge <= budget * (1 + 1e-12)
    spent = 0.0
    order = []
    while True:
        available &= charge <= budget - spent + 1e-12 * max(budget, 1.0)
        cand = np.flatnonzero(available)
        if cand.size == 0:
            break
        gain = f[cand]
        if div is not None:
            gain = (1.0 - lam) * gain + lam * div.gains(cand)
        if costs is not None:
            gain = gain / charge[cand]
        v = int(cand[np.argmax(gain)])
        order.append(v)
        available[v] = False
        spent += charge[v]
        if div is not None:
            div.commit(v)
    return order


def exhaustive_combined_opt(f, gram, lam, sigma_n, costs=None, budget=1.0):
    """max F(S) subject to the budget, by enumeration (small n only)."""
    f = np.asarray(f, dtype=float)
    n = f.size
    if n > MAX_ENUMERATION:
        raise ValueError(f"refusing to enumerate 2^{n} subsets (limit n <= {MAX_ENUMERATION})")
    charge = np.ones(n) if costs is None else np.asarray(costs, dtype=float)
    best, best_set = 0.0, []
    for mask in range(1, 1 << n):
        S = [i for i in range(n) if mask >> i & 1]
        if charge[S].sum() > budget * (1 + 1e-12):
            continue
        value = combined_value(f, gram, S, lam, sigma_n)
        if value > best:
            best, best_set = value, S
    return best_set, best


@dataclass
class InfoGain:
    value: float
    lower: float
    upper: float
    exact: bool


def max_info_gain(gram, noise: float, budget: int, enumerate_limit: int = 15) -> InfoGain:
    """gamma_B = max over |S| <= B of 1/2 log|I + noise^-2 K_SS|.

    Exact by enumeration for n <= ``enumerate_limit``; otherwise the greedy
    value (a lower bound) is returned together with C_K as upper bound.
    """
    K = gram.entries if isinstance(gram, GramMatrix) else np.asarray(gram, dtype=float)
    n = K.shape[0]
    budget = int(budget)
    if budget > n:
        raise ValueError("budget exceeds ground-set size")
    upper = information_constant(K, noise) if n else 0.0
    if budget <= 0:
        return InfoGain(0.0, 0.0, upper, True)
    if budget == n:
        return InfoGain(upper, upper, upper, True)
    scale = noise**-2
    if n <= enumerate_limit:
        # monotone, so only sets of size exactly B need checking
        best = max(
            logdet_identity_plus(K[np.ix_(S, S)], scale)
            for S in map(list, itertools.combinations(range(n), budget))
        )
        best *= 0.5
        return InfoGain(best, best, best, True)
    greedy = greedy_info_gain(K, noise, budget)
    return InfoGain(greedy, greedy, upper, False)


def greedy_info_gain(K, noise, budget) -> float:
    state = DiversityState(GramMatrix.from_array(K), noise)
    for _ in range(budget):
        cand = np.flatnonzero(~state.tracker._in_obs)
        gains = state.gains(cand)
        state.commit(int(cand[np.argmax(gains)]))
    return state.cumulative


# ---------------------------------------------------------------------------
# regret reports


@dataclass
class RegretRow:
    B: float
    F_S: float
    oracle: float
    R_B: float
    avg_regret: float
    R_B_half: float = float("nan")


@dataclass
class RegretReport:
    mode: str
    rows: list = field(default_factory=list)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["B", "F_S", "oracle", "R_B", "avg_regret", "R_B_half"])
            for r in self.rows:
                writer.writerow([r.B, repr(r.F_S), repr(r.oracle), repr(r.R_B), repr(r.avg_regret),
                                 repr(r.R_B_half)])


def regret_curve(trace, mode: str, references, f=None, gram=None, lam: float = 0.0,
                 sigma_n: Optional[float] = None) -> RegretReport:
    """Regret of ``trace`` at each checkpoint budget.

    ``references`` maps each checkpoint B to the oracle value: F(S*_B) in
    ``value_regret`` mode (R_B = ref - F(S_B)), and the reference optimum
    in ``greedy_relative_regret`` mode (R_B = (1 - 1/e) ref - F(S_B)).
    ``R_B_half`` = ref / 2 - F(S_B) is reported alongside in every mode.
    S_B is the longest prefix of the trace that fits into B.  F uses the
    true values ``f`` (default: the values recorded in the trace) and, when
    ``lam > 0``, the diversity term.
    """
    if mode not in ("value_regret", "greedy_relative_regret"):
        raise ValueError(f"unknown regret mode {mode!r}")
    if f is None:
        if any(r.value is None for r in trace.rounds):
            raise ValueError("trace has no true values; cannot compute regret")
        f = np.zeros(max(trace.selected, default=-1) + 1)
        for r in trace.rounds:
            f[r.item] = r.value
    report = RegretReport(mode)
    for B, ref in sorted(references.items()):
        S = trace.prefix_for_budget(B)
        F_S = combined_value(f, gram, S, lam, sigma_n)
        target = ref if mode == "value_regret" else GREEDY_FACTOR * ref
        R = target - F_S
        half = COST_GREEDY_FACTOR * ref - F_S
        report.rows.append(RegretRow(B, F_S, float(ref), R, R / B, half))
    return report


def value_references(f, costs, checkpoints, resolution: float = 1.0) -> dict:
    """F(S*_B) for each checkpoint: top-B sum for unit costs, else knapsack DP."""
    f = np.asarray(f, dtype=float)
    out = {}
    if costs is None:
        ranked = np.sort(f)[::-1]
        for B in checkpoints:
            out[B] = float(ranked[: int(math.floor(B + 1e-9))].sum())
    else:
        for B in checkpoints:
            out[B] = knapsack_dp(f, costs, B, resolution)[1]
    return out


def greedy_references(f, gram, checkpoints, lam, sigma_n, costs=None) -> dict:
    """F of the greedy solution at each checkpoint.

    Used as the stand-in for F(S*_B) when enumeration is out of reach;
    greedy is itself at least (1 - 1/e) of the optimum.
    """
    out = {}
    for B in checkpoints:
        S = greedy_oracle(f, gram, lam, sigma_n, costs, B)
        out[B] = combined_value(f, gram, S, lam, sigma_n)
    return out
