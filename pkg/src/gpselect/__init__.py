"""Budgeted discovery of valuable items with Gaussian-process upper confidence bounds."""

__version__ = "0.1.0"

from .diversity import DiversityState, diversity_value
from .items import FeedbackOracle, ItemSet, load_itemset, save_itemset, synth_gp_itemset
from .kernels import GramMatrix, KernelSpec, gram, information_constant, kernel_eval
from .lazy import BudgetExhausted, LazyQueue
from .oracles import (
    exhaustive_opt,
    greedy_oracle,
    knapsack_dp,
    max_info_gain,
    regret_curve,
    value_references,
)
from .policies import BetaSchedule, PolicyConfig, SelectionTrace, beta, run_baseline, run_gp_select
from .posterior import ContractError, PosteriorState

__all__ = [
    "BetaSchedule",
    "BudgetExhausted",
    "ContractError",
    "DiversityState",
    "FeedbackOracle",
    "GramMatrix",
    "ItemSet",
    "KernelSpec",
    "LazyQueue",
    "PolicyConfig",
    "PosteriorState",
    "SelectionTrace",
    "beta",
    "diversity_value",
    "exhaustive_opt",
    "gram",
    "greedy_oracle",
    "information_constant",
    "kernel_eval",
    "knapsack_dp",
    "load_itemset",
    "max_info_gain",
    "regret_curve",
    "value_references",
    "run_baseline",
    "run_gp_select",
    "save_itemset",
    "synth_gp_itemset",
]
