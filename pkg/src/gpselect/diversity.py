"""Log-determinant diversity D(S) = 1/2 log|I + sigma_n^-2 K_SS| and its marginal gains.

D is monotone submodular.  The gain of adding v to S is
1/2 log(1 + sigma_n^-2 var(v | S)), where var(v | S) is the GP predictive
variance after observing S with noise sigma_n, so the gains come from a
:class:`PosteriorState` whose targets are never used.  Any other monotone
submodular D would plug in by providing the same ``gains``/``commit``
interface.
"""

from __future__ import annotations

import numpy as np

from .kernels import GramMatrix, logdet_identity_plus
from .posterior import ContractError, PosteriorState


def diversity_value(gram, S, sigma_n: float) -> float:
    if not sigma_n > 0:
        raise ValueError("sigma_n must be positive")
    S = [int(s) for s in S]
    if len(set(S)) != len(S):
        raise ValueError("duplicate ids in diversity set")
    if not S:
        return 0.0
    if isinstance(gram, GramMatrix):
        K = gram.submatrix(S)
    else:
        K = np.asarray(gram, dtype=float)[np.ix_(S, S)]
    return 0.5 * logdet_identity_plus(K, sigma_n**-2)


def gain_from_variance(var, sigma_n: float):
    return 0.5 * np.log1p(np.asarray(var) / sigma_n**2)


class DiversityState:
    def __init__(self, gram: GramMatrix, sigma_n: float):
        if not sigma_n > 0:
            raise ValueError("sigma_n must be positive")
        self.sigma_n = float(sigma_n)
        self.tracker = PosteriorState(gram, sigma_n)
        self.cumulative = 0.0

    @property
    def selected(self) -> list[int]:
        return self.tracker.observed

    def _check(self, ids):
        for i in np.atleast_1d(ids):
            if self.tracker.is_observed(int(i)):
                raise ContractError(f"item {int(i)} is already in the selected set")

    def variances(self, ids) -> np.ndarray:
        return self.tracker.variances(ids)

    def gains(self, ids) -> np.ndarray:
        ids = np.atleast_1d(ids)
        self._check(ids)
        return gain_from_variance(self.variances(ids), self.sigma_n)

    def marginal_gain(self, i: int) -> float:
        return float(self.gains([i])[0])

    def commit(self, i: int) -> "DiversityState":
        gain = self.marginal_gain(i)
        self.tracker.update(i, 0.0)
        self.cumulative += gain
        return self


def marginal_gain(state: DiversityState, i: int) -> float:
    return state.marginal_gain(i)


def commit(state: DiversityState, i: int) -> DiversityState:
    return state.commit(i)
