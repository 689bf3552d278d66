import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from gpselect.kernels import (
    GramMatrix,
    KernelError,
    KernelSpec,
    check_gram,
    gram,
    information_constant,
    kernel_eval,
    kronecker_gram,
    outer_features,
)
from gpselect.items import ItemSet
from conftest import random_psd


class TestEval:
    def test_rbf_self_similarity(self):
        assert kernel_eval(KernelSpec("rbf", 0.3), [0.2, 0.7], [0.2, 0.7]) == 1.0

    def test_linear_dot_product(self):
        assert kernel_eval(KernelSpec("linear"), [1, 2], [3, 4]) == 11.0

    def test_rbf_formula(self):
        # exp(-|x-x'|^2 / (2 b^2)) with |x-x'|^2 = 0.25, b = 0.5
        assert kernel_eval(KernelSpec("rbf", 0.5), [0.0], [0.5]) == pytest.approx(math.exp(-0.5))

    def test_kronecker_matches_factor_product(self, rng):
        spec = KernelSpec("kronecker_linear", d_user=6, d_item=6)
        for _ in range(20):
            u, u2, a, a2 = rng.normal(size=(4, 6))
            x = outer_features(u[None], a[None])[0]
            x2 = outer_features(u2[None], a2[None])[0]
            assert kernel_eval(spec, x, x2) == pytest.approx((u @ u2) * (a @ a2), rel=1e-12)

    def test_kronecker_gram_helper(self, rng):
        U, A = rng.normal(size=(5, 3)), rng.normal(size=(5, 4))
        X = outer_features(U, A)
        spec = KernelSpec("kronecker_linear", d_user=3, d_item=4)
        np.testing.assert_allclose(spec.matrix(X, X), kronecker_gram(U, A), rtol=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(KernelError):
            kernel_eval(KernelSpec("linear"), [1, 2], [1, 2, 3])
        with pytest.raises(KernelError):
            KernelSpec("kronecker_linear", d_user=2, d_item=3).matrix(np.ones((1, 5)), np.ones((1, 5)))

    def test_invalid_specs(self):
        with pytest.raises(KernelError):
            KernelSpec("rbf", 0.0)
        with pytest.raises(KernelError):
            KernelSpec("poly")

    @given(st.lists(st.floats(-5, 5), min_size=3, max_size=3),
           st.lists(st.floats(-5, 5), min_size=3, max_size=3),
           st.floats(0.05, 5))
    def test_symmetric_and_bounded(self, x, y, bw):
        k = KernelSpec("rbf", bw)
        a, b = kernel_eval(k, x, y), kernel_eval(k, y, x)
        assert a == b
        assert 0 <= a <= 1


class TestGram:
    def test_single_item(self):
        items = ItemSet(np.array([[1.0, 2.0]]), [1.0])
        np.testing.assert_array_equal(gram(KernelSpec("linear"), items).entries, [[5.0]])

    def test_rbf_diagonal(self, rng):
        G = gram(KernelSpec("rbf", 0.4), rng.uniform(size=(30, 3)))
        np.testing.assert_array_equal(np.diag(G.entries), 1.0)
        np.testing.assert_array_equal(G.diag(), 1.0)

    @pytest.mark.parametrize("spec", [KernelSpec("rbf", 0.3), KernelSpec("linear")])
    def test_psd(self, rng, spec):
        K = gram(spec, rng.uniform(size=(20, 4))).entries
        check_gram(K)
        eig = np.linalg.eigvalsh(K)
        assert eig[0] >= -1e-8 * eig[-1]

    def test_permutation_invariance(self, rng):
        X = rng.uniform(size=(15, 2))
        p = rng.permutation(15)
        spec = KernelSpec("rbf", 0.5)
        K = gram(spec, X).entries
        np.testing.assert_allclose(gram(spec, X[p]).entries, K[np.ix_(p, p)], atol=1e-14)

    def test_lazy_rows_match_dense(self, rng):
        X = rng.uniform(size=(25, 2))
        spec = KernelSpec("rbf", 0.3)
        lazy, dense = GramMatrix(spec, X), gram(spec, X)
        np.testing.assert_allclose(lazy.rows([3, 7]), dense.entries[[3, 7]], atol=1e-15)
        np.testing.assert_allclose(lazy.block([1, 2], [4, 5, 6]), dense.entries[np.ix_([1, 2], [4, 5, 6])])

    def test_check_gram_rejects(self):
        with pytest.raises(KernelError):
            check_gram(np.array([[1.0, 2.0], [2.0, 1.0]]))
        with pytest.raises(KernelError):
            check_gram(np.array([[1.0, 0.1], [0.0, 1.0]]))


class TestInformationConstant:
    def test_identity(self):
        assert information_constant(np.eye(4), 1.0) == pytest.approx(2 * math.log(2), abs=1e-12)

    def test_empty(self):
        assert information_constant(np.zeros((0, 0)), 0.5) == 0.0

    def test_matches_eigenvalues(self, rng):
        for _ in range(10):
            K = random_psd(rng, 5)
            noise = rng.uniform(0.1, 2.0)
            expected = 0.5 * np.sum(np.log1p(np.linalg.eigvalsh(K) / noise**2))
            assert information_constant(K, noise) == pytest.approx(expected, abs=1e-10)

    def test_rejects_nonpositive_noise(self):
        with pytest.raises(ValueError):
            information_constant(np.eye(2), 0.0)

    def test_monotone_in_nested_subsets(self, rng):
        K = gram(KernelSpec("rbf", 0.3), rng.uniform(size=(12, 2))).entries
        for _ in range(30):
            T = rng.choice(12, size=rng.integers(1, 13), replace=False)
            S = T[: rng.integers(0, T.size + 1)]
            assert information_constant(K[np.ix_(S, S)], 0.3) <= information_constant(K[np.ix_(T, T)], 0.3) + 1e-12
