"""One-class scorer behaviour: hand values, invariances, error paths."""

import math

import numpy as np
import pytest

from conformal_outliers.scoring import fit_knn, fit_mahalanobis, oracle_mixture
from conformal_outliers.sim import MixtureSpec


class TestKnn:
    def test_coincident_point(self):
        m = fit_knn(np.array([[0.0], [0.0]]), k=1)
        assert m.score([[0.0]])[0] == 0.0

    def test_hand_average(self):
        m = fit_knn(np.array([[0.0], [2.0]]), k=2)
        assert m.score([[1.0]])[0] == pytest.approx(-1.0)

    def test_single_neighbor(self):
        m = fit_knn(np.array([[0.0]]), k=1)
        assert m.score([[5.0]])[0] == pytest.approx(-5.0)

    def test_empty_train(self):
        with pytest.raises(ValueError):
            fit_knn(np.empty((0, 2)), k=1)

    def test_k_bounds(self):
        with pytest.raises(ValueError):
            fit_knn(np.zeros((3, 2)), k=4)

    def test_permutation_invariance(self):
        g = np.random.default_rng(0)
        train = g.normal(size=(40, 3))
        x = g.normal(size=(7, 3))
        m1 = fit_knn(train, k=5)
        m2 = fit_knn(train[::-1], k=5)
        np.testing.assert_allclose(m1.score(x), m2.score(x), atol=1e-12)

    def test_translation_equivariance(self):
        g = np.random.default_rng(1)
        train = g.normal(size=(30, 4))
        x = g.normal(size=(5, 4))
        shift = g.normal(size=4)
        m1 = fit_knn(train, k=3)
        m2 = fit_knn(train + shift, k=3)
        np.testing.assert_allclose(m1.score(x), m2.score(x + shift), atol=1e-9)


class TestMahalanobis:
    def test_center_scores_zero(self):
        g = np.random.default_rng(2)
        train = g.normal(size=(50, 3))
        m = fit_mahalanobis(train, ridge=0.0)
        assert m.score([train.mean(axis=0)])[0] == pytest.approx(0.0, abs=1e-9)

    def test_unit_variance_distance(self):
        # 1-d sample with (ddof=1) variance exactly 1: score(mu + 2) = -2
        train = np.array([[-1.0], [0.0], [1.0]])
        m = fit_mahalanobis(train)
        assert m.score([[2.0]])[0] == pytest.approx(-2.0)

    def test_degenerate_with_ridge_is_euclidean(self):
        train = np.full((5, 2), 3.0)
        m = fit_mahalanobis(train, ridge=1.0)
        x = np.array([[3.0, 7.0]])
        assert m.score(x)[0] == pytest.approx(-4.0)

    def test_singular_without_ridge(self):
        with pytest.raises(ValueError):
            fit_mahalanobis(np.full((5, 2), 3.0), ridge=0.0)

    def test_rank_deficient_guard(self):
        with pytest.raises(ValueError):
            fit_mahalanobis(np.random.default_rng(3).normal(size=(3, 5)))

    def test_permutation_invariance_bitwise(self):
        g = np.random.default_rng(4)
        train = g.normal(size=(60, 3))
        x = g.normal(size=(4, 3))
        perm = g.permutation(60)
        s1 = fit_mahalanobis(train, ridge=0.01).score(x)
        s2 = fit_mahalanobis(train[perm], ridge=0.01).score(x)
        np.testing.assert_allclose(s1, s2, atol=1e-10)


class TestOracleMixture:
    def _spec(self, centers):
        c = np.atleast_2d(np.asarray(centers, dtype=float))
        return MixtureSpec(d=c.shape[1], centers=c, box=3.0)

    def test_log_density_difference(self):
        m = oracle_mixture(self._spec([[0.0]]), a=1.0)
        assert m.score([[0.0]])[0] - m.score([[1.0]])[0] == pytest.approx(0.5)

    def test_exact_log_density_single_center(self):
        m = oracle_mixture(self._spec([[0.0]]), a=1.0)
        assert m.score([[0.3]])[0] == pytest.approx(
            -0.5 * 0.09 - 0.5 * math.log(2 * math.pi))

    def test_symmetry_under_center_swap(self):
        m = oracle_mixture(self._spec([[-2.0], [2.0]]), a=1.0)
        assert m.score([[1.3]])[0] == pytest.approx(m.score([[-1.3]])[0])

    def test_far_tail_below_centers(self):
        spec = self._spec([[-2.0], [2.0]])
        m = oracle_mixture(spec, a=1.0)
        tail = m.score([[30.0]])[0]
        for c in (-2.0, 2.0):
            assert tail < m.score([[c]])[0]

    def test_signal_strength_domain(self):
        with pytest.raises(ValueError):
            oracle_mixture(self._spec([[0.0]]), a=0.5)

    def test_permutation_invariance_bitwise(self):
        g = np.random.default_rng(5)
        centers = g.normal(size=(10, 4))
        x = g.normal(size=(6, 4))
        s1 = oracle_mixture(self._spec(centers), a=2.0).score(x)
        s2 = oracle_mixture(self._spec(centers[::-1]), a=2.0).score(x)
        np.testing.assert_allclose(s1, s2, atol=1e-12)
