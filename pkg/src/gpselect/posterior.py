"""Incremental Gaussian-process posterior over a finite ground set."""

from __future__ import annotations

import numpy as np
import scipy.linalg

from ._linalg import explained_variance
from .kernels import GramMatrix


class ContractError(ValueError):
    """An operation was asked to do something the selection model forbids."""


class NumericalHealthError(ArithmeticError):
    pass


NEGATIVE_VARIANCE_TOL = 1e-10


class PosteriorState:
    """Zero-mean GP posterior after observing a growing set of items.

    Keeps the Cholesky factor of ``K_t + noise**2 I`` (stored transposed, as
    an upper-triangular matrix) and the kernel columns ``k_t(v)`` for every
    item.  Each :meth:`update` appends one row to the factor; nothing is
    refactorised.

    The state is single-writer: ``update`` mutates it in place (and returns
    it for chaining).  Reads between updates are side-effect free apart from
    caching the posterior mean.
    """

    def __init__(self, gram: GramMatrix, noise: float, capacity: int = 16):
        if not noise > 0:
            raise ValueError("noise scale must be positive")
        if not isinstance(gram, GramMatrix):
            gram = GramMatrix.from_array(gram)
        self.gram = gram
        self.noise = float(noise)
        self.observed: list[int] = []
        self._in_obs = np.zeros(gram.n, dtype=bool)
        capacity = max(int(capacity), 1)
        self._upper = np.zeros((capacity, capacity))
        self._cross = np.zeros((gram.n, capacity))
        self._y = np.zeros(capacity)
        self._mean_cache = None

    @property
    def n(self) -> int:
        return self.gram.n

    @property
    def t(self) -> int:
        return len(self.observed)

    @property
    def targets(self) -> np.ndarray:
        return self._y[: self.t].copy()

    @property
    def chol(self) -> np.ndarray:
        """Lower Cholesky factor of K_t + noise^2 I."""
        t = self.t
        return self._upper[:t, :t].T.copy()

    def is_observed(self, i: int) -> bool:
        return bool(self._in_obs[i])

    def _grow(self):
        cap = self._upper.shape[0]
        new = 2 * cap
        upper = np.zeros((new, new))
        upper[:cap, :cap] = self._upper
        cross = np.zeros((self.n, new))
        cross[:, :cap] = self._cross
        y = np.zeros(new)
        y[:cap] = self._y
        self._upper, self._cross, self._y = upper, cross, y

    def update(self, i: int, y: float) -> "PosteriorState":
        i = int(i)
        if not 0 <= i < self.n:
            raise IndexError(f"item id {i} out of range [0, {self.n})")
        if self._in_obs[i]:
            raise ContractError(f"item {i} already observed; items cannot be selected twice")
        t = self.t
        if t == self._upper.shape[0]:
            self._grow()
        row = self.gram.rows([i])[0]
        k = row[self.observed] if t else np.empty(0)
        if t:
            l = scipy.linalg.solve_triangular(self._upper[:t, :t], k, trans="T", lower=False)
            d2 = row[i] + self.noise**2 - float(l @ l)
        else:
            l = k
            d2 = row[i] + self.noise**2
        if not d2 > 0:
            raise NumericalHealthError(f"factor update lost positive definiteness (d^2={d2:.3g})")
        self._upper[:t, t] = l
        self._upper[t, t] = np.sqrt(d2)
        self._cross[:, t] = row
        self._y[t] = y
        self.observed.append(i)
        self._in_obs[i] = True
        self._mean_cache = None
        return self

    def _alpha(self) -> np.ndarray:
        t = self.t
        U = self._upper[:t, :t]
        z = scipy.linalg.solve_triangular(U, self._y[:t], trans="T", lower=False)
        return scipy.linalg.solve_triangular(U, z, lower=False)

    def means(self) -> np.ndarray:
        """Posterior mean of every item (cached until the next update)."""
        if self._mean_cache is None:
            t = self.t
            if t == 0:
                self._mean_cache = np.zeros(self.n)
            else:
                self._mean_cache = self._cross[:, :t] @ self._alpha()
        return self._mean_cache

    def mean(self, i: int) -> float:
        return float(self.means()[i])

    def explained(self, ids) -> np.ndarray:
        """k_t(v)^T (K_t + noise^2 I)^-1 k_t(v) for each v in ids."""
        ids = np.ascontiguousarray(np.atleast_1d(ids), dtype=np.int64)
        out = np.zeros(ids.size)
        if self.t and ids.size:
            explained_variance(self._upper, self.t, self._cross, ids, out)
        return out

    def variances(self, ids=None) -> np.ndarray:
        """Posterior variances, clamped at zero.

        Raises NumericalHealthError if a variance is negative beyond
        rounding level, which indicates a corrupted factor.
        """
        ids = np.arange(self.n) if ids is None else np.atleast_1d(np.asarray(ids, dtype=np.int64))
        prior = self.gram.diag()[ids]
        var = prior - self.explained(ids)
        if var.size and var.min() < 0:
            worst = np.argmin(var / np.maximum(prior, 1.0))
            if var[worst] < -NEGATIVE_VARIANCE_TOL * max(prior[worst], 1.0):
                raise NumericalHealthError(
                    f"negative posterior variance {var[worst]:.3g} for item {ids[worst]}"
                )
            np.maximum(var, 0.0, out=var)
        return var

    def variance(self, i: int) -> float:
        return float(self.variances([i])[0])


def init_posterior(gram: GramMatrix, noise: float) -> PosteriorState:
    return PosteriorState(gram, noise)


def dense_posterior(K, observed, y, noise, ids=None):
    """Direct evaluation of the GP predictive equations (test reference).

    Uses an explicit dense solve with ``K_t + noise^2 I`` rather than any
    factor reuse.
    """
    K = np.asarray(K, dtype=float)
    ids = np.arange(K.shape[0]) if ids is None else np.asarray(ids)
    observed = list(observed)
    if not observed:
        return np.zeros(ids.size), np.diag(K)[ids].copy()
    Kt = K[np.ix_(observed, observed)] + noise**2 * np.eye(len(observed))
    kx = K[np.ix_(observed, ids)]
    mean = kx.T @ np.linalg.solve(Kt, np.asarray(y, dtype=float))
    var = np.diag(K)[ids] - np.sum(kx * np.linalg.solve(Kt, kx), axis=0)
    return mean, var
