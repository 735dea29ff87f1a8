import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp
from scipy.stats import norm

from attrshift.core import Dataset
from attrshift.toydata import generate_overlap_demo
from attrshift.weights import (AttributeWeightEstimator, KnnAttributePosterior,
                               WeightEstimationError, domain_posterior, estimate_weights,
                               knn_attribute_posterior, straightforward_weights)

MIX_A_S = [0.1, 0.1, 0.2, 0.4, 0.2]
MIX_A_T = [0.2, 0.4, 0.2, 0.1, 0.1]


def random_dataset(rng, n=80, m=2, K=3):
    return Dataset(rng.normal(size=(n, m)), np.zeros(n), rng.integers(0, K, n), 1, K)


class TestDomainPosterior:
    def test_identical_priors(self):
        np.testing.assert_array_equal(domain_posterior(MIX_A_S, MIX_A_S), 0.5)

    def test_dataset_a_left_class(self):
        # 0.2 / (0.1 + 0.2) for the leftmost centroid
        assert domain_posterior(MIX_A_S, MIX_A_T)[0] == pytest.approx(2 / 3, abs=1e-15)

    def test_disjoint(self):
        np.testing.assert_array_equal(domain_posterior([1, 0], [0, 1]), [0, 1])

    def test_absent_class_is_half(self):
        np.testing.assert_array_equal(domain_posterior([1, 0, 0], [0, 1, 0]), [0, 1, 0.5])

    def test_length_mismatch(self):
        with pytest.raises(ValueError, match="length"):
            domain_posterior([0.5, 0.5], [1, 0, 0])


class TestKnnPosterior:
    def test_self_match_without_loo(self):
        X = np.array([[0.0], [1.0], [5.0]])
        est = KnnAttributePosterior(1, leave_one_out=False).fit(X, [0, 1, 2], n_attributes=3)
        np.testing.assert_array_equal(knn_attribute_posterior(est, [5.0]), [0, 0, 1])

    def test_k_equals_n(self):
        X = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [3.0, 3.0]])
        est = KnnAttributePosterior(4, leave_one_out=False).fit(X, [0, 0, 1, 1])
        for q in ([0, 0], [100, -5], [2, 2]):
            np.testing.assert_array_equal(knn_attribute_posterior(est, q), [0.5, 0.5])

    def test_one_d(self):
        est = KnnAttributePosterior(1, leave_one_out=False).fit([[-1.0], [1.0]], [0, 1])
        np.testing.assert_array_equal(knn_attribute_posterior(est, [0.9]), [0, 1])

    def test_loo_excludes_self(self):
        X = np.array([[0.0], [0.1], [10.0], [10.1]])
        est = KnnAttributePosterior(1).fit(X, [0, 1, 1, 0])
        np.testing.assert_array_equal(est.predict_proba(), [[0, 1], [1, 0], [1, 0], [0, 1]])

    def test_default_k(self):
        est = KnnAttributePosterior().fit(np.zeros((600, 1)), np.zeros(600, int), n_attributes=2)
        assert est.k_ == 25

    def test_errors(self):
        with pytest.raises(ValueError, match="n_neighbors"):
            KnnAttributePosterior(3).fit(np.zeros((3, 1)), [0, 1, 0])
        est = KnnAttributePosterior(1).fit(np.zeros((3, 2)), [0, 1, 0])
        with pytest.raises(ValueError, match="features"):
            est.predict_proba(np.zeros((1, 3)))

    @pytest.mark.parametrize("algorithm", ["brute", "kd_tree"])
    def test_tree_matches_brute(self, rng, algorithm):
        X = rng.normal(size=(200, 2))
        z = rng.integers(0, 4, 200)
        ref = KnnAttributePosterior(9).fit(X, z).predict_proba()
        np.testing.assert_array_equal(
            KnnAttributePosterior(9, algorithm=algorithm).fit(X, z).predict_proba(), ref)

    @settings(max_examples=40, deadline=None)
    @given(hnp.arrays(float, (30, 2), elements=st.floats(-100, 100)),
           st.integers(1, 29), st.integers(0, 2 ** 31))
    def test_valid_probability_vectors(self, X, k, seed):
        z = np.random.default_rng(seed).integers(0, 3, 30)
        est = KnnAttributePosterior(k).fit(X, z, n_attributes=3)
        for P in (est.predict_proba(), est.predict_proba(X[:5] + 0.5)):
            assert np.all(P >= 0)
            np.testing.assert_allclose(P.sum(axis=1), 1.0, atol=1e-12)


class TestEstimateWeights:
    def test_identical_priors_give_exact_ones(self, rng):
        d = random_dataset(rng)
        w = estimate_weights(d, [0.2, 0.3, 0.5], [0.2, 0.3, 0.5], k=7)
        assert np.array_equal(w, np.ones(len(d)))

    def test_one_hot_posterior_gives_prior_ratio(self):
        X = np.array([[0.0], [0.01], [0.02], [50.0], [50.01], [50.02]])
        d = Dataset(X, np.zeros(6), [0, 0, 0, 1, 1, 1], 1, 2)
        w = estimate_weights(d, [0.25, 0.75], [0.6, 0.4], k=2)
        np.testing.assert_allclose(w, [0.6 / 0.25] * 3 + [0.4 / 0.75] * 3, rtol=1e-12)

    def test_well_separated_step(self):
        d = generate_overlap_demo(10.0, n=1000, seed=3)
        w = estimate_weights(d, [0.5, 0.5], [1.0, 0.0])
        # analytic two-Gaussian weight at |x| = 5 is 2.000 (z=0 side) and ~1e-22 (z=1 side)
        deep0 = d.X[:, 0] < -4
        deep1 = d.X[:, 0] > 4
        np.testing.assert_allclose(w[deep0], 2.0, atol=1e-12)
        np.testing.assert_allclose(w[deep1], 0.0, atol=1e-12)

    def test_matches_analytic_posterior_weights_on_average(self):
        d = generate_overlap_demo(1.0, n=2000, seed=0)
        x = d.X[:, 0]
        f = norm.pdf(x[:, None], [-0.5, 0.5], 1)
        q = f / f.sum(axis=1, keepdims=True)
        oracle = (q @ [2 / 3, 0]) / (q @ [1 / 3, 1])
        w = estimate_weights(d, [0.5, 0.5], [1.0, 0.0])
        assert np.sqrt(np.mean((w - oracle) ** 2)) < 0.15

    def test_reduction_to_straightforward(self, rng):
        K = 4
        z = rng.integers(0, K, 200)
        X = np.column_stack([z * 100.0 + rng.normal(size=200), rng.normal(size=200)])
        d = Dataset(X, np.zeros(200), z, 1, K)
        ps, pt = [0.1, 0.2, 0.3, 0.4], [0.4, 0.3, 0.2, 0.1]
        np.testing.assert_allclose(estimate_weights(d, ps, pt, k=10),
                                   straightforward_weights(d, ps, pt), rtol=0, atol=1e-9)

    def test_smoothing_on_large_overlap(self):
        d = generate_overlap_demo(1.0, n=2000, seed=1)
        w = estimate_weights(d, [0.5, 0.5], [1.0, 0.0])
        sf = straightforward_weights(d, [0.5, 0.5], [1.0, 0.0])
        assert w[d.z == 1].min() > 0
        assert np.all(sf[d.z == 1] == 0)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2 ** 31), st.integers(1, 20))
    def test_bounded_by_extreme_ratios(self, seed, k):
        g = np.random.default_rng(seed)
        ps = g.dirichlet(np.ones(3))
        pt = g.dirichlet(np.ones(3))
        d = random_dataset(g, n=40)
        w = estimate_weights(d, ps, pt, k=k)
        r = domain_posterior(ps, pt)
        ratio = r / (1 - r)
        assert np.all(w >= ratio.min() * (1 - 1e-12))
        assert np.all(w <= ratio.max() * (1 + 1e-12))

    def test_infinite_weight_rejected(self, rng):
        with pytest.raises(WeightEstimationError, match="zero source prior"):
            estimate_weights(random_dataset(rng), [0.5, 0.5, 0.0], [0.4, 0.4, 0.2])

    def test_unsupported_class_named(self):
        d = Dataset([[0.0], [0.1], [9.0], [9.1]], np.zeros(4), [0, 0, 1, 1], 1, 2)
        with pytest.raises(WeightEstimationError, match=r"classes \[1\]"):
            estimate_weights(d, [1.0, 0.0], [0.0, 1.0], k=1)

    def test_empty_source(self):
        with pytest.raises(WeightEstimationError):
            estimate_weights(Dataset(np.empty((0, 1)), [], [], 1, 2), [0.5, 0.5], [0.5, 0.5])

    def test_normalize(self, rng):
        d = random_dataset(rng)
        w = estimate_weights(d, [0.2, 0.3, 0.5], [0.5, 0.3, 0.2], normalize=True)
        assert w.mean() == pytest.approx(1.0, abs=1e-12)

    def test_estimator_api(self, rng):
        d = random_dataset(rng)
        est = AttributeWeightEstimator([0.5, 0.3, 0.2], n_neighbors=5)
        w = est.fit_predict(d.X, d.z)
        np.testing.assert_allclose(est.prior_source_, np.bincount(d.z) / len(d))
        assert est.get_params()["n_neighbors"] == 5
        assert est.predict(d.X[:3]).shape == (3,)
        assert np.all(np.isfinite(w)) and np.all(w >= 0)


class TestStraightforward:
    def test_imbalanced_ratio_nine(self):
        d = Dataset(np.zeros((4, 1)), np.zeros(4), [0, 1, 0, 1], 1, 2)
        w = straightforward_weights(d, [0.5, 0.5], [0.9, 0.1])
        np.testing.assert_allclose(w, [1.8, 0.2, 1.8, 0.2])
        assert w[0] / w[1] == pytest.approx(9.0)

    def test_equal_priors(self):
        d = Dataset(np.zeros((3, 1)), np.zeros(3), [0, 1, 1], 1, 2)
        np.testing.assert_array_equal(straightforward_weights(d, [0.3, 0.7], [0.3, 0.7]), 1.0)

    def test_delta_target(self):
        d = Dataset(np.zeros((3, 1)), np.zeros(3), [0, 1, 1], 1, 2)
        np.testing.assert_array_equal(straightforward_weights(d, [0.5, 0.5], [1, 0]), [2, 0, 0])

    def test_zero_source_prior(self):
        d = Dataset(np.zeros((2, 1)), np.zeros(2), [0, 1], 1, 2)
        with pytest.raises(WeightEstimationError, match="sample 1"):
            straightforward_weights(d, [1.0, 0.0], [1.0, 0.0])


def test_default_k_is_ceil_sqrt():
    assert all(KnnAttributePosterior(leave_one_out=False).fit(np.arange(n, dtype=float)[:, None],
                                           np.zeros(n, int), 1).k_ == math.ceil(math.sqrt(n))
               for n in (2, 10, 17, 600))
