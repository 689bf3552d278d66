"""GP-Select and the baseline policies.

Every policy runs the same loop: score the unselected items that still fit
into the budget, pick the best (lowest id on ties), query the oracle and
update the GP posterior.  The GP-Select rules differ only in the score:

* ``uniform``       mu + sqrt(beta) * sigma
* ``cost``          (mu + sqrt(beta) * sigma) / c
* ``diverse``       (1 - lam) * (mu + sqrt(beta) * sigma) + lam * gain
* ``diverse_cost``  the diverse score divided by c

where ``gain`` is the marginal log-det diversity of the item.  The
``uniform`` and ``diverse`` rules charge one unit per item, so the budget
is a number of picks; the cost rules charge the item's cost.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .diversity import DiversityState, gain_from_variance
from .items import FeedbackOracle, ItemSet
from .kernels import GramMatrix, KernelSpec, information_constant
from .lazy import BudgetExhausted, LazyQueue, default_threshold, full_select
from .posterior import PosteriorState

RULES = ("uniform", "cost", "diverse", "diverse_cost")
BASELINES = ("random", "pure_explore", "pure_exploit", "epsilon_first")


@dataclass(frozen=True)
class BetaSchedule:
    """Exploration weight beta_t.

    ``theoretical``: 2R + 300 C_K log^3(t / delta); ``scaled``: the same
    times ``scale``; ``constant``: ``value`` for every t.
    """

    mode: str = "constant"
    value: float = 1.0
    R: float = 1.0
    delta: float = 0.1
    scale: float = 1.0

    def __post_init__(self):
        if self.mode not in ("theoretical", "constant", "scaled"):
            raise ValueError(f"unknown beta mode {self.mode!r}")
        if self.mode == "constant" and not self.value >= 0:
            raise ValueError("constant beta must be non-negative")
        if self.mode in ("theoretical", "scaled"):
            if not self.R > 0:
                raise ValueError("R must be positive")
            if not 0 < self.delta < 1:
                raise ValueError("delta must lie in (0, 1)")
        if self.mode == "scaled" and not 0 < self.scale <= 1:
            raise ValueError("scale must lie in (0, 1]")

    @property
    def needs_info_constant(self) -> bool:
        return self.mode != "constant"

    def __call__(self, t: int, info_constant: Optional[float] = None) -> float:
        return beta(t, self, info_constant)


def beta(t: int, schedule: BetaSchedule, info_constant: Optional[float] = None) -> float:
    if t < 1:
        raise ValueError("beta is defined for rounds t >= 1")
    if schedule.mode == "constant":
        return float(schedule.value)
    if info_constant is None:
        raise ValueError(f"{schedule.mode} beta needs the information constant C_K")
    b = 2.0 * schedule.R + 300.0 * info_constant * math.log(t / schedule.delta) ** 3
    return b * schedule.scale if schedule.mode == "scaled" else b


@dataclass
class PolicyConfig:
    rule: str = "uniform"
    budget: float = 10.0
    beta: BetaSchedule = field(default_factory=BetaSchedule)
    lam: float = 0.0
    sigma_n: Optional[float] = None
    noise: Optional[float] = None
    lazy: bool = True
    failsafe_threshold: Optional[int] = None

    def __post_init__(self):
        if isinstance(self.beta, dict):
            self.beta = BetaSchedule(**self.beta)
        if self.rule not in RULES:
            raise ValueError(f"unknown rule {self.rule!r}; expected one of {RULES}")
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError("lam must lie in [0, 1]")
        if self.rule in ("diverse", "diverse_cost") and not (self.sigma_n and self.sigma_n > 0):
            raise ValueError("diverse rules need a positive sigma_n")
        if not self.budget > 0:
            raise ValueError("budget must be positive")
        if self.noise is not None and not self.noise > 0:
            raise ValueError("noise must be positive")
        if self.failsafe_threshold is not None and int(self.failsafe_threshold) < 1:
            raise ValueError("failsafe_threshold must be a positive integer")

    @property
    def uses_costs(self) -> bool:
        return self.rule in ("cost", "diverse_cost")

    @property
    def uses_diversity(self) -> bool:
        return self.rule in ("diverse", "diverse_cost")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class Round:
    t: int
    item: int
    score: float
    y: float
    cost: float
    cum_cost: float
    value: Optional[float]
    cum_value: Optional[float]
    recomputations: int
    seconds: float


@dataclass
class SelectionTrace:
    policy: str
    budget: float
    rounds: list = field(default_factory=list)

    @property
    def selected(self) -> list:
        return [r.item for r in self.rounds]

    @property
    def cum_cost(self) -> float:
        return self.rounds[-1].cum_cost if self.rounds else 0.0

    @property
    def leftover_budget(self) -> float:
        return self.budget - self.cum_cost

    @property
    def total_value(self) -> Optional[float]:
        return self.rounds[-1].cum_value if self.rounds else 0.0

    @property
    def recomputations(self) -> int:
        return sum(r.recomputations for r in self.rounds)

    @property
    def wall_seconds(self) -> float:
        return sum(r.seconds for r in self.rounds)

    def prefix_for_budget(self, budget: float) -> list:
        """Longest prefix of the picks whose cumulative cost fits in ``budget``."""
        out = []
        for r in self.rounds:
            if r.cum_cost > budget * (1 + 1e-12):
                break
            out.append(r.item)
        return out

    def to_jsonl(self, path, timing: bool = True) -> None:
        with open(path, "w") as fh:
            for r in self.rounds:
                rec = asdict(r)
                if not timing:
                    rec.pop("seconds")
                fh.write(json.dumps(rec) + "\n")

    @classmethod
    def from_jsonl(cls, path, policy="", budget=float("nan")) -> "SelectionTrace":
        rounds = []
        with open(path) as fh:
            for line in fh:
                if line.strip():
                    rec = json.loads(line)
                    rec.setdefault("seconds", 0.0)
                    rounds.append(Round(**rec))
        return cls(policy, budget, rounds)


class RoundScorer:
    """Vectorised score for one round: ((1-lam)(w*mu + sqrt(beta)*sigma) + lam*gain) / c."""

    def __init__(self, mean, beta_t, lam=0.0, sigma_n=None, costs=None, mean_weight=1.0):
        self.mean = mean
        self.root_beta = math.sqrt(beta_t)
        self.lam = float(lam)
        self.sigma_n = sigma_n
        self.costs = costs
        self.mean_weight = float(mean_weight)
        self.needs_variance = (self.root_beta > 0 and self.lam < 1) or self.lam > 0

    def __call__(self, ids, var_gp, var_div):
        score = self.mean_weight * self.mean[ids] + self.root_beta * np.sqrt(var_gp)
        if self.lam > 0:
            score = (1.0 - self.lam) * score + self.lam * gain_from_variance(var_div, self.sigma_n)
        if self.costs is not None:
            score = score / self.costs[ids]
        return score


def _refresher(post: PosteriorState, div: Optional[DiversityState]):
    if div is None:
        def refresh(ids):
            v = post.variances(ids)
            return v, v
    else:
        def refresh(ids):
            return post.variances(ids), div.variances(ids)
    return refresh


# ---------------------------------------------------------------------------
# single-round selection by exhaustive scan


def select_next_uniform(post: PosteriorState, remaining, beta_t: float) -> int:
    scorer = RoundScorer(post.means(), beta_t)
    return full_select(np.sort(np.asarray(remaining)), scorer, _refresher(post, None))[0]


def select_next_cost(post, remaining, beta_t, costs, budget_left) -> int:
    costs = np.asarray(costs, dtype=float)
    remaining = np.sort(np.asarray(remaining))
    feasible = remaining[costs[remaining] <= budget_left]
    scorer = RoundScorer(post.means(), beta_t, costs=costs)
    return full_select(feasible, scorer, _refresher(post, None))[0]


def select_next_diverse(post, div_state: DiversityState, remaining, beta_t, lam) -> int:
    scorer = RoundScorer(post.means(), beta_t, lam=lam, sigma_n=div_state.sigma_n)
    return full_select(np.sort(np.asarray(remaining)), scorer, _refresher(post, div_state))[0]


def select_next_diverse_cost(post, div_state, remaining, beta_t, lam, costs, budget_left) -> int:
    costs = np.asarray(costs, dtype=float)
    remaining = np.sort(np.asarray(remaining))
    feasible = remaining[costs[remaining] <= budget_left]
    scorer = RoundScorer(post.means(), beta_t, lam=lam, sigma_n=div_state.sigma_n, costs=costs)
    return full_select(feasible, scorer, _refresher(post, div_state))[0]


# ---------------------------------------------------------------------------
# the selection loop


class _Run:
    """Shared bookkeeping: posterior, candidates, budget and the trace."""

    def __init__(self, items, oracle, gram, noise, budget, charge, policy,
                 sigma_n=None, with_posterior=True):
        self.items = items
        self.oracle = oracle
        self.gram = gram
        self.charge = charge
        self.budget = float(budget)
        self.post = PosteriorState(gram, noise) if with_posterior else None
        self.div = None
        if sigma_n is not None and with_posterior and sigma_n != noise:
            self.div = DiversityState(gram, sigma_n)
        self.available = np.ones(items.n, dtype=bool)
        self.spent = 0.0
        self.trace = SelectionTrace(policy, self.budget)
        self._cum_value = 0.0
        values = getattr(oracle, "true_values", None)
        self.values = None if values is None else np.asarray(values)
        self.queue = None

    def candidates(self) -> np.ndarray:
        left = self.budget - self.spent
        ok = self.available & (self.charge <= left + 1e-12 * max(self.budget, 1.0))
        # infeasible items never become feasible again
        self.available &= ok
        return np.flatnonzero(ok)

    def refresh(self):
        return _refresher(self.post, self.div)

    def lazy_queue(self) -> LazyQueue:
        if self.queue is None:
            prior = self.gram.diag()
            self.queue = LazyQueue(prior, prior)
        return self.queue

    def choose(self, scorer, lazy, threshold):
        """Return ``(item, score, n_refreshed)`` for the current round."""
        cand = self.candidates()
        if lazy:
            queue = self.lazy_queue()
            item, count = queue.select(cand, scorer, self.refresh(), threshold)
            return item, queue.last_score, count
        item, count, scores = full_select(cand, scorer, self.refresh())
        return item, float(np.max(scores)), count

    def commit(self, item, score, count, started):
        y = self.oracle.query(item)
        if self.post is not None:
            self.post.update(item, y)
        if self.div is not None:
            self.div.tracker.update(item, 0.0)
        self.available[item] = False
        cost = float(self.charge[item])
        self.spent += cost
        value = None
        if self.values is not None:
            value = float(self.values[item])
            self._cum_value += value
        self.trace.rounds.append(Round(
            t=len(self.trace.rounds) + 1, item=int(item), score=float(score), y=float(y),
            cost=cost, cum_cost=self.spent, value=value,
            cum_value=None if value is None else self._cum_value,
            recomputations=int(count), seconds=time.perf_counter() - started,
        ))


def _noise_for(config_noise, oracle):
    noise = config_noise if config_noise is not None else getattr(oracle, "noise_bound", 0.0)
    if not noise > 0:
        raise ValueError("a positive GP noise scale is needed (set noise or use a noisy oracle)")
    return float(noise)


def _as_gram(items, kernel, gram):
    if gram is not None:
        return gram
    return GramMatrix(kernel, items.features)


def run_gp_select(items: ItemSet, oracle: FeedbackOracle, kernel: Optional[KernelSpec],
                  config: PolicyConfig, gram: Optional[GramMatrix] = None,
                  info_constant: Optional[float] = None, label: Optional[str] = None) -> SelectionTrace:
    """Run GP-Select until the budget is used up.

    ``gram`` may be passed to reuse a (possibly precomputed) Gram matrix;
    otherwise kernel entries are evaluated on demand.  ``info_constant``
    (C_K) is computed from the dense Gram matrix when the beta schedule
    needs it and none is given.
    """
    gram = _as_gram(items, kernel, gram)
    noise = _noise_for(config.noise, oracle)
    if config.beta.needs_info_constant and info_constant is None:
        info_constant = information_constant(gram, noise)
    charge = items.costs if config.uses_costs else np.ones(items.n)
    sigma_n = config.sigma_n if config.uses_diversity else None
    run = _Run(items, oracle, gram, noise, config.budget, charge,
               label or f"gp_select-{config.rule}", sigma_n=sigma_n)
    threshold = config.failsafe_threshold or default_threshold(items.n)
    costs = items.costs if config.uses_costs else None
    lam = config.lam if config.uses_diversity else 0.0
    t = 0
    while True:
        started = time.perf_counter()
        t += 1
        scorer = RoundScorer(run.post.means(), config.beta(t, info_constant), lam=lam,
                             sigma_n=sigma_n, costs=costs)
        try:
            item, score, count = run.choose(scorer, config.lazy, threshold)
        except BudgetExhausted:
            break
        run.commit(item, score, count, started)
    return run.trace


def run_baseline(items: ItemSet, oracle: FeedbackOracle, kernel: Optional[KernelSpec],
                 which: str, budget: float, fraction: float = 0.2, noise: Optional[float] = None,
                 seed: int = 0, cost_aware: bool = False, lazy: bool = True,
                 failsafe_threshold: Optional[int] = None, gram: Optional[GramMatrix] = None,
                 label: Optional[str] = None) -> SelectionTrace:
    """Random, pure exploration, pure exploitation or epsilon-first.

    With ``cost_aware`` the budget is a total cost and only items that still
    fit are eligible; otherwise every pick costs one unit.  Epsilon-first
    picks at random while less than ``fraction * budget`` has been spent,
    then exploits the GP mean.
    """
    if which not in BASELINES:
        raise ValueError(f"unknown baseline {which!r}; expected one of {BASELINES}")
    if which == "epsilon_first" and not 0 < fraction < 1:
        raise ValueError("epsilon_first fraction must lie in (0, 1)")
    if not budget > 0:
        raise ValueError("budget must be positive")
    gram = _as_gram(items, kernel, gram)
    charge = items.costs if cost_aware else np.ones(items.n)
    costs = items.costs if cost_aware else None
    rng = np.random.default_rng(seed)
    with_post = which != "random"
    run = _Run(items, oracle, gram, _noise_for(noise, oracle) if with_post else 1.0,
               budget, charge, label or which, with_posterior=with_post)
    threshold = failsafe_threshold or default_threshold(items.n)
    explore_until = fraction * budget
    while True:
        started = time.perf_counter()
        random_pick = which == "random" or (which == "epsilon_first" and run.spent < explore_until)
        if random_pick:
            cand = run.candidates()
            if cand.size == 0:
                break
            run.commit(int(rng.choice(cand)), float("nan"), 0, started)
            continue
        if which == "pure_explore":
            scorer = RoundScorer(run.post.means(), 1.0, costs=costs, mean_weight=0.0)
        else:
            scorer = RoundScorer(run.post.means(), 0.0, costs=costs)
        try:
            item, score, count = run.choose(scorer, lazy, threshold)
        except BudgetExhausted:
            break
        run.commit(item, score, count, started)
    return run.trace
