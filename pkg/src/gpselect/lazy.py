"""Lazy variance updates with a failsafe full refresh.

Posterior variances only shrink as observations accumulate, so a variance
computed in an earlier round bounds the current one from above.  Each round
the queue scores every candidate with the *fresh* posterior mean, the
current beta and its *stored* variances, which gives an upper bound on the
candidate's true score.  Heads are popped and refreshed until a refreshed
item stays on top; that item is exactly the argmax a full scan would return
(ties go to the lowest id in both paths).  If one round needs more than
``threshold`` refreshes, the remaining candidates are refreshed in one batch
and the exact argmax is taken directly.

The mean is refreshed for all candidates every round because it moves
non-monotonically; that costs one matrix-vector product per round, while
each variance refresh costs a triangular solve per item.
"""

from __future__ import annotations

import heapq
import math

import numpy as np


class BudgetExhausted(Exception):
    """No candidate is left (or none fits into the remaining budget)."""


def default_threshold(n: int) -> int:
    return max(1, math.ceil(0.05 * n))


def full_select(candidates, scorer, refresh):
    """Refresh every candidate and return ``(argmax, n_refreshed, scores)``."""
    candidates = np.asarray(candidates)
    if candidates.size == 0:
        raise BudgetExhausted
    if scorer.needs_variance:
        var_gp, var_div = refresh(candidates)
        count = candidates.size
    else:
        var_gp = var_div = np.zeros(candidates.size)
        count = 0
    scores = scorer(candidates, var_gp, var_div)
    return int(candidates[np.argmax(scores)]), count, scores


class LazyQueue:
    """Priority queue of stale variance bounds for the unselected items.

    ``var_gp``/``var_div`` hold the last computed variances per item and
    ``stamp`` the round in which they were computed (0 = prior).
    """

    def __init__(self, prior_gp, prior_div=None):
        self.var_gp = np.array(prior_gp, dtype=float)
        self.var_div = self.var_gp.copy() if prior_div is None else np.array(prior_div, dtype=float)
        self.stamp = np.zeros(self.var_gp.size, dtype=np.int64)
        self.round = 0
        self.heap: list = []
        self.pops_this_round = 0
        self.max_bound_violation = -np.inf
        self.last_score = float("nan")

    def _store(self, ids, refresh):
        gp, div = refresh(ids)
        self.var_gp[ids] = gp
        self.var_div[ids] = div
        self.stamp[ids] = self.round

    def _keys(self, ids, scorer):
        return scorer(ids, self.var_gp[ids], self.var_div[ids])

    def _start_round(self, candidates, keys):
        self.round += 1
        self.pops_this_round = 0
        self.heap = list(zip((-keys).tolist(), candidates.tolist()))
        heapq.heapify(self.heap)

    def rebuild(self, candidates, scorer, refresh) -> "LazyQueue":
        """Refresh every candidate and rebuild the heap from exact scores."""
        candidates = np.asarray(candidates)
        self._start_round(candidates, np.zeros(candidates.size))
        if candidates.size and scorer.needs_variance:
            self._store(candidates, refresh)
        keys = self._keys(candidates, scorer)
        self.heap = list(zip((-keys).tolist(), candidates.tolist()))
        heapq.heapify(self.heap)
        return self

    def ordered(self) -> list:
        """Heap contents as (score, id), best first."""
        return [(-k, v) for k, v in sorted(self.heap)]

    def select(self, candidates, scorer, refresh, threshold: int):
        """Return ``(item, n_refreshed)`` for this round."""
        candidates = np.asarray(candidates)
        if candidates.size == 0:
            raise BudgetExhausted
        if not scorer.needs_variance:
            item, count, scores = full_select(candidates, scorer, refresh)
            self.last_score = float(np.max(scores))
            return item, count
        self._start_round(candidates, self._keys(candidates, scorer))
        count = 0
        heap = self.heap
        while heap:
            neg_key, v = heap[0]
            if self.stamp[v] == self.round:
                self.last_score = -neg_key
                return v, count
            heapq.heappop(heap)
            self._store(np.array([v]), refresh)
            fresh = float(self._keys(np.array([v]), scorer)[0])
            self.max_bound_violation = max(self.max_bound_violation, fresh + neg_key)
            count += 1
            self.pops_this_round = count
            if count > threshold:
                stale = candidates[self.stamp[candidates] != self.round]
                if stale.size:
                    self._store(stale, refresh)
                count += stale.size
                self.pops_this_round = count
                scores = self._keys(candidates, scorer)
                self.heap = list(zip((-scores).tolist(), candidates.tolist()))
                heapq.heapify(self.heap)
                best = int(np.argmax(scores))
                self.last_score = float(scores[best])
                return int(candidates[best]), count
            heapq.heappush(heap, (-fresh, v))
        raise BudgetExhausted


def lazy_select(queue: LazyQueue, candidates, scorer, refresh, threshold: int):
    return queue.select(candidates, scorer, refresh, threshold)


def rebuild(queue: LazyQueue, candidates, scorer, refresh) -> LazyQueue:
    return queue.rebuild(candidates, scorer, refresh)
