"""Kernel functions, Gram matrices and the information constant C_K."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np
import scipy.linalg


class KernelError(ValueError):
    pass


VARIANTS = ("rbf", "linear", "kronecker_linear")


@dataclass(frozen=True)
class KernelSpec:
    """Which kernel to use and its parameters.

    ``kronecker_linear`` expects feature vectors that are the row-major
    vectorisation of an outer product ``u ⊗ a`` with ``len(u) == d_user``
    and ``len(a) == d_item``.  On such features it equals the product of the
    user and item linear kernels.
    """

    variant: str = "rbf"
    bandwidth: float = 1.0
    d_user: Optional[int] = None
    d_item: Optional[int] = None

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise KernelError(f"unknown kernel variant {self.variant!r}")
        if self.variant == "rbf" and not self.bandwidth > 0:
            raise KernelError("rbf bandwidth must be positive")
        if self.variant == "kronecker_linear":
            if not (self.d_user and self.d_item) or self.d_user < 1 or self.d_item < 1:
                raise KernelError("kronecker_linear needs positive d_user and d_item")

    def check_dim(self, d: int) -> None:
        if self.variant == "kronecker_linear" and d != self.d_user * self.d_item:
            raise KernelError(
                f"kronecker_linear needs d = {self.d_user}*{self.d_item}, got {d}"
            )

    def matrix(self, X, Y) -> np.ndarray:
        """Cross-kernel matrix between the rows of X and the rows of Y."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        Y = np.atleast_2d(np.asarray(Y, dtype=float))
        if X.shape[1] != Y.shape[1]:
            raise KernelError(f"dimension mismatch: {X.shape[1]} vs {Y.shape[1]}")
        self.check_dim(X.shape[1])
        if self.variant == "rbf":
            sq = (
                np.sum(X * X, axis=1)[:, None]
                + np.sum(Y * Y, axis=1)[None, :]
                - 2.0 * (X @ Y.T)
            )
            np.maximum(sq, 0.0, out=sq)
            return np.exp(-sq / (2.0 * self.bandwidth**2))
        return X @ Y.T

    def diag(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        self.check_dim(X.shape[1])
        if self.variant == "rbf":
            return np.ones(X.shape[0])
        return np.sum(X * X, axis=1)

    def to_dict(self) -> dict:
        return {k: v for k, v in asdict(self).items() if v is not None}

    @classmethod
    def from_dict(cls, d: dict) -> "KernelSpec":
        return cls(**d)


def kernel_eval(kernel: KernelSpec, x, x_other) -> float:
    x = np.asarray(x, dtype=float).ravel()
    x_other = np.asarray(x_other, dtype=float).ravel()
    if x.shape != x_other.shape:
        raise KernelError(f"dimension mismatch: {x.size} vs {x_other.size}")
    return float(kernel.matrix(x[None, :], x_other[None, :])[0, 0])


def outer_features(U, A) -> np.ndarray:
    """Row-wise vectorised outer products, shape (n, d_user * d_item)."""
    U = np.atleast_2d(np.asarray(U, dtype=float))
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if U.shape[0] != A.shape[0]:
        raise KernelError("user and item feature counts differ")
    return np.einsum("ni,nj->nij", U, A).reshape(U.shape[0], -1)


def kronecker_gram(U, A, U_other=None, A_other=None) -> np.ndarray:
    """Product of user and item linear kernels, computed from the factors."""
    U_other = U if U_other is None else U_other
    A_other = A if A_other is None else A_other
    return (np.asarray(U) @ np.asarray(U_other).T) * (np.asarray(A) @ np.asarray(A_other).T)


class GramMatrix:
    """The n x n kernel matrix of a ground set.

    Entries are produced on demand from ``kernel`` and ``features`` so that
    large ground sets never materialise the full matrix; ``entries`` builds
    (and caches) the dense version.  A matrix can also be wrapped directly
    with :meth:`from_array`.
    """

    def __init__(self, kernel: Optional[KernelSpec], features, dense=None):
        self.kernel = kernel
        self.features = None if features is None else np.asarray(features, dtype=float)
        self._dense = None if dense is None else np.asarray(dense, dtype=float)
        if self.features is not None and kernel is not None:
            kernel.check_dim(self.features.shape[1])
            self.n = self.features.shape[0]
        elif self._dense is not None:
            self.n = self._dense.shape[0]
        else:
            raise KernelError("GramMatrix needs features or a dense matrix")
        self._diag = None

    @classmethod
    def from_array(cls, K) -> "GramMatrix":
        K = np.asarray(K, dtype=float)
        if K.ndim != 2 or K.shape[0] != K.shape[1]:
            raise KernelError("Gram matrix must be square")
        return cls(None, None, dense=K)

    def __len__(self):
        return self.n

    @property
    def entries(self) -> np.ndarray:
        if self._dense is None:
            K = self.kernel.matrix(self.features, self.features)
            # the norm expansion leaves ~1e-15 noise on the RBF diagonal
            np.fill_diagonal(K, self.diag())
            self._dense = K
        return self._dense

    def diag(self) -> np.ndarray:
        if self._diag is None:
            if self._dense is not None:
                self._diag = np.diag(self._dense).copy()
            else:
                self._diag = self.kernel.diag(self.features)
        return self._diag

    def rows(self, ids) -> np.ndarray:
        """Kernel values between items ``ids`` and every item, shape (len(ids), n)."""
        ids = np.atleast_1d(np.asarray(ids, dtype=np.intp))
        if self._dense is not None:
            return self._dense[ids]
        out = self.kernel.matrix(self.features[ids], self.features)
        out[np.arange(ids.size), ids] = self.diag()[ids]
        return out

    def block(self, rows, cols) -> np.ndarray:
        rows = np.atleast_1d(np.asarray(rows, dtype=np.intp))
        cols = np.atleast_1d(np.asarray(cols, dtype=np.intp))
        if self._dense is not None:
            return self._dense[np.ix_(rows, cols)]
        return self.kernel.matrix(self.features[rows], self.features[cols])

    def submatrix(self, ids) -> np.ndarray:
        ids = np.atleast_1d(np.asarray(ids, dtype=np.intp))
        K = self.block(ids, ids)
        if self._dense is None:
            np.fill_diagonal(K, self.diag()[ids])
        return K


def gram(kernel: KernelSpec, items, materialize: bool = True) -> GramMatrix:
    """Gram matrix of an ItemSet (or a raw feature array)."""
    features = getattr(items, "features", items)
    G = GramMatrix(kernel, features)
    if materialize:
        G.entries
    return G


def check_gram(K, sym_tol: float = 1e-12, psd_rel_tol: float = 1e-8) -> None:
    """Raise KernelError unless K is symmetric and positive semi-definite."""
    K = np.asarray(K, dtype=float)
    if K.size == 0:
        return
    if np.max(np.abs(K - K.T)) > sym_tol:
        raise KernelError("Gram matrix is not symmetric")
    eig = np.linalg.eigvalsh(K)
    if eig[0] < -psd_rel_tol * max(eig[-1], 0.0):
        raise KernelError(f"Gram matrix is not PSD (min eigenvalue {eig[0]:.3g})")


def logdet_identity_plus(K, scale: float) -> float:
    """log|I + scale * K| via Cholesky, with an eigenvalue fallback."""
    K = np.asarray(K, dtype=float)
    n = K.shape[0]
    if n == 0:
        return 0.0
    M = np.eye(n) + scale * K
    try:
        L = scipy.linalg.cholesky(M, lower=True)
        return float(2.0 * np.sum(np.log(np.diag(L))))
    except np.linalg.LinAlgError:
        eig = np.linalg.eigvalsh(0.5 * (M + M.T))
        return float(np.sum(np.log(np.maximum(eig, np.finfo(float).tiny))))


def information_constant(gram_matrix, noise: float) -> float:
    """C_K = 1/2 log|I + noise^-2 K| (natural log)."""
    if not noise > 0:
        raise KernelError("noise scale must be positive")
    K = gram_matrix.entries if isinstance(gram_matrix, GramMatrix) else np.asarray(gram_matrix)
    return 0.5 * logdet_identity_plus(K, noise**-2)
