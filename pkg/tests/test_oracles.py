import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gpselect.diversity import diversity_value
from gpselect.kernels import KernelSpec, gram, information_constant
from gpselect.oracles import (
    GREEDY_FACTOR,
    combined_value,
    exhaustive_combined_opt,
    exhaustive_opt,
    greedy_oracle,
    knapsack_dp,
    max_info_gain,
    regret_curve,
    value_references,
)
from gpselect.policies import Round, SelectionTrace
from conftest import random_psd


def trace_of(items, values, costs=None):
    costs = costs if costs is not None else [1.0] * len(items)
    rounds, cc, cv = [], 0.0, 0.0
    for t, (i, c) in enumerate(zip(items, costs), 1):
        cc += c
        cv += values[i]
        rounds.append(Round(t, i, 0.0, values[i], c, cc, values[i], cv, 0, 0.0))
    return SelectionTrace("test", cc, rounds)


class TestKnapsack:
    def test_worked_example(self):
        assert knapsack_dp([3, 4, 5], [2, 3, 4], 5) == ([0, 1], 7.0)

    def test_slack_budget(self):
        assert knapsack_dp([1, 2, 3], [1, 1, 1], 10)[0] == [0, 1, 2]

    def test_tight_budget(self):
        assert knapsack_dp([1, 2], [3, 4], 2) == ([], 0.0)

    def test_negative_values(self):
        with pytest.raises(ValueError):
            knapsack_dp([-1, 2], [1, 1], 2)

    @settings(max_examples=60, deadline=None)
    @given(st.data())
    def test_matches_enumeration(self, data):
        n = data.draw(st.integers(1, 12))
        values = data.draw(st.lists(st.floats(0, 10), min_size=n, max_size=n))
        costs = data.draw(st.lists(st.integers(1, 6), min_size=n, max_size=n))
        B = data.draw(st.integers(0, 25))
        _, dp = knapsack_dp(values, costs, B)
        _, ex = exhaustive_opt(values, costs, B)
        assert dp == pytest.approx(ex, abs=1e-9)

    def test_fractional_costs_feasible(self, rng):
        values, costs = rng.uniform(size=12), rng.uniform(0.3, 2.0, size=12)
        S, v = knapsack_dp(values, costs, 4.0, resolution=0.01)
        assert costs[S].sum() <= 4.0
        assert v <= exhaustive_opt(values, costs, 4.0)[1] + 1e-12
        assert v >= 0.9 * exhaustive_opt(values, costs, 4.0)[1]


class TestExhaustive:
    def test_top_k(self, rng):
        v = rng.uniform(size=10)
        S, val = exhaustive_opt(v, np.ones(10), 3)
        assert sorted(S) == sorted(np.argsort(v)[-3:].tolist())

    def test_empty(self):
        assert exhaustive_opt([], [], 5) == ([], 0.0)

    def test_guard(self):
        with pytest.raises(ValueError):
            exhaustive_opt(np.ones(21), np.ones(21), 3)


class TestGreedy:
    def test_modular_is_sort(self, rng):
        f = rng.uniform(size=12)
        G = np.eye(12)
        assert greedy_oracle(f, G, budget=5) == np.argsort(-f)[:5].tolist()

    def test_pure_diversity(self, rng):
        G = gram(KernelSpec("rbf", 0.3), rng.uniform(size=(10, 2)))
        order = greedy_oracle(rng.uniform(size=10), G, lam=1.0, sigma_n=0.3, budget=4)
        S = []
        for v in order:
            gains = {u: diversity_value(G, S + [u], 0.3) for u in range(10) if u not in S}
            assert v == max(gains, key=gains.get)
            S.append(v)

    def test_approximation_ratio(self, rng):
        for _ in range(10):
            G = gram(KernelSpec("rbf", 0.3), rng.uniform(size=(10, 2)))
            f = rng.uniform(size=10)
            S = greedy_oracle(f, G, 0.5, 0.3, budget=4)
            _, opt = exhaustive_combined_opt(f, G, 0.5, 0.3, budget=4)
            assert combined_value(f, G, S, 0.5, 0.3) >= GREEDY_FACTOR * opt - 1e-12

    def test_cost_feasible(self, rng):
        costs = rng.uniform(0.5, 2, size=10)
        S = greedy_oracle(rng.uniform(size=10), np.eye(10), costs=costs, budget=3.0)
        assert costs[S].sum() <= 3.0 + 1e-12


class TestInfoGain:
    def test_full_budget(self, rng):
        K = random_psd(rng, 6)
        assert max_info_gain(K, 0.5, 6).value == information_constant(K, 0.5)

    def test_zero_budget(self, rng):
        assert max_info_gain(random_psd(rng, 6), 0.5, 0).value == 0.0

    def test_enumeration_vs_greedy(self, rng):
        for _ in range(10):
            K = random_psd(rng, 8)
            ex = max_info_gain(K, 0.5, 3)
            assert ex.exact
            order = greedy_oracle(np.zeros(8), K, lam=1.0, sigma_n=0.5, budget=3)
            greedy = diversity_value(K, order, 0.5)
            assert GREEDY_FACTOR * ex.value - 1e-12 <= greedy <= ex.value + 1e-12
            assert ex.value <= information_constant(K, 0.5) + 1e-12

    def test_large_returns_bounds(self, rng):
        K = random_psd(rng, 20, rank=5)
        res = max_info_gain(K, 0.5, 4)
        assert not res.exact and res.lower <= res.upper


class TestRegret:
    def test_optimal_trace_zero_regret(self):
        f = np.array([0.1, 0.9, 0.5, 0.3])
        refs = value_references(f, None, [2])
        rep = regret_curve(trace_of([1, 2], f), "value_regret", refs, f=f)
        assert rep.rows[0].R_B == 0.0

    def test_empty_trace(self):
        f = np.array([0.1, 0.9])
        rep = regret_curve(SelectionTrace("x", 1.0, []), "value_regret", {1: 0.9}, f=f)
        assert rep.rows[0].R_B == 0.9

    def test_greedy_relative(self):
        f = np.array([0.1, 0.9, 0.5])
        rep = regret_curve(trace_of([0], f), "greedy_relative_regret", {1: 0.9}, f=f)
        assert rep.rows[0].R_B == pytest.approx((1 - 1 / math.e) * 0.9 - 0.1)
        assert rep.rows[0].avg_regret == rep.rows[0].R_B
        assert rep.rows[0].R_B_half == pytest.approx(0.45 - 0.1)

    def test_missing_values(self):
        tr = SelectionTrace("x", 1.0, [Round(1, 0, 0.0, 0.0, 1.0, 1.0, None, None, 0, 0.0)])
        with pytest.raises(ValueError):
            regret_curve(tr, "value_regret", {1: 1.0})

    def test_prefix_uses_budget(self):
        f = np.array([1.0, 2.0, 3.0])
        tr = trace_of([2, 1, 0], f, costs=[2.0, 2.0, 2.0])
        rep = regret_curve(tr, "value_regret", {3.0: 3.0, 4.0: 5.0}, f=f)
        assert [r.F_S for r in rep.rows] == [3.0, 5.0]

    def test_csv(self, tmp_path):
        f = np.array([0.1, 0.9])
        rep = regret_curve(trace_of([1], f), "value_regret", {1: 0.9}, f=f)
        rep.to_csv(tmp_path / "r.csv")
        assert (tmp_path / "r.csv").read_text().splitlines()[0] == "B,F_S,oracle,R_B,avg_regret,R_B_half"
