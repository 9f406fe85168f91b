import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from face_rank.errors import DataError, MissingClassError, SymmetryError
from face_rank.linalg import (
    FeatureSet,
    class_statistics,
    log_det_psd,
    pinv_psd,
)

from oracles import naive_class_stats


def hand_featureset():
    # d=1: class 0 holds {1, 3}, class 1 holds {-1, -3}
    return FeatureSet(features=np.array([[1.0], [3.0], [-1.0], [-3.0]]),
                      labels=np.array([0, 0, 1, 1]), k_count=2)


def random_featureset(rng, n_per_class=None, k=None, d=None):
    k = k or rng.integers(2, 6)
    d = d or rng.integers(1, 9)
    n_per_class = n_per_class or rng.integers(2, 12)
    feats = rng.standard_normal((k * n_per_class, d)) * rng.uniform(0.5, 3)
    feats += rng.standard_normal((k, d))[np.repeat(np.arange(k), n_per_class)]
    labels = np.repeat(np.arange(k), n_per_class)
    perm = rng.permutation(len(labels))
    return FeatureSet(features=feats[perm], labels=labels[perm], k_count=int(k))


class TestFeatureSetValidation:
    def test_rejects_nan(self):
        with pytest.raises(DataError):
            FeatureSet(features=np.array([[np.nan], [1.0]]),
                       labels=np.array([0, 1]), k_count=2)

    def test_rejects_single_class(self):
        with pytest.raises(DataError):
            FeatureSet(features=np.zeros((3, 2)), labels=np.zeros(3, int),
                       k_count=1)

    def test_rejects_empty_class(self):
        with pytest.raises(MissingClassError):
            FeatureSet(features=np.zeros((4, 2)),
                       labels=np.array([0, 0, 2, 2]), k_count=3)

    def test_rejects_out_of_range_label(self):
        with pytest.raises(DataError):
            FeatureSet(features=np.zeros((4, 2)),
                       labels=np.array([0, 1, 2, 3]), k_count=2)


class TestClassStatistics:
    def test_hand_instance(self):
        st_ = class_statistics(hand_featureset())
        assert st_.global_mean == pytest.approx([0.0], abs=0)
        np.testing.assert_allclose(st_.class_means, [[2.0], [-2.0]])
        np.testing.assert_allclose(st_.sigma_w, [[1.0]])
        np.testing.assert_allclose(st_.sigma_b, [[4.0]])
        np.testing.assert_allclose(st_.sigma_k, [[1.0], [1.0]])

    def test_identical_samples_give_zero_covariances(self):
        v = np.array([2.0, -1.0, 0.5])
        fs = FeatureSet(features=np.tile(v, (6, 1)),
                        labels=np.array([0, 0, 0, 1, 1, 1]), k_count=2)
        st_ = class_statistics(fs)
        np.testing.assert_array_equal(st_.sigma_w, 0)
        np.testing.assert_array_equal(st_.sigma_b, 0)
        np.testing.assert_array_equal(st_.sigma_k, 0)
        np.testing.assert_allclose(st_.class_means, np.tile(v, (2, 1)))

    @pytest.mark.parametrize("seed", range(10))
    def test_matches_naive_double_loop(self, seed):
        fs = random_featureset(np.random.default_rng(seed))
        st_ = class_statistics(fs, cov_mode="full")
        gm, cm, sw, sb, sk = naive_class_stats(fs.features, fs.labels, fs.k_count)
        np.testing.assert_allclose(st_.global_mean, gm, atol=1e-10)
        np.testing.assert_allclose(st_.class_means, cm, atol=1e-10)
        np.testing.assert_allclose(st_.sigma_w, sw, atol=1e-10)
        np.testing.assert_allclose(st_.sigma_b, sb, atol=1e-10)
        np.testing.assert_allclose(st_.sigma_k, sk, atol=1e-10)

    @pytest.mark.parametrize("seed", range(5))
    def test_count_weighted_mean_identity(self, seed):
        rng = np.random.default_rng(seed)
        fs = random_featureset(rng)
        st_ = class_statistics(fs)
        weighted = (st_.class_counts[:, None] * st_.class_means).sum(0) / fs.n
        np.testing.assert_allclose(weighted, st_.global_mean, rtol=1e-9)

    def test_permutation_invariance(self):
        rng = np.random.default_rng(7)
        fs = random_featureset(rng)
        perm = rng.permutation(fs.n)
        fs2 = FeatureSet(features=fs.features[perm], labels=fs.labels[perm],
                         k_count=fs.k_count)
        a, b = class_statistics(fs), class_statistics(fs2)
        np.testing.assert_allclose(a.sigma_w, b.sigma_w, atol=1e-12)
        np.testing.assert_allclose(a.sigma_b, b.sigma_b, atol=1e-12)
        np.testing.assert_allclose(a.class_means, b.class_means, atol=1e-12)

    @pytest.mark.parametrize("seed", range(5))
    def test_sigma_b_rank_bound(self, seed):
        rng = np.random.default_rng(seed)
        fs = random_featureset(rng, k=3, d=8, n_per_class=10)
        st_ = class_statistics(fs)
        eigvals = np.linalg.eigvalsh(st_.sigma_b)
        above = (eigvals > 1e-8 * eigvals.max()).sum()
        assert above <= fs.k_count - 1

    def test_diagonal_mode_matches_full_diagonal(self):
        fs = random_featureset(np.random.default_rng(3))
        full = class_statistics(fs, cov_mode="full")
        diag = class_statistics(fs, cov_mode="diagonal")
        for k in range(fs.k_count):
            np.testing.assert_array_equal(diag.sigma_k[k], np.diag(full.sigma_k[k]))

    def test_symmetry_and_psd(self):
        fs = random_featureset(np.random.default_rng(11))
        st_ = class_statistics(fs, cov_mode="full")
        for m in (st_.sigma_w, st_.sigma_b, *st_.sigma_k):
            assert np.abs(m - m.T).max() <= 1e-8
            assert np.linalg.eigvalsh(m).min() >= -1e-8


class TestPinvPsd:
    def test_identity(self):
        np.testing.assert_array_equal(pinv_psd(np.eye(3)), np.eye(3))

    def test_zero_matrix(self):
        np.testing.assert_array_equal(pinv_psd(np.zeros((2, 2))), np.zeros((2, 2)))

    def test_diagonal_with_zero_eigenvalue(self):
        np.testing.assert_allclose(pinv_psd(np.diag([4.0, 0.0])),
                                   np.diag([0.25, 0.0]))

    def test_rejects_asymmetric(self):
        with pytest.raises(SymmetryError):
            pinv_psd(np.array([[1.0, 2.0], [0.0, 1.0]]))

    @settings(max_examples=40, deadline=None)
    @given(st.integers(1, 16), st.integers(0, 10_000))
    def test_pseudoinverse_identity_on_range(self, dim, seed):
        rng = np.random.default_rng(seed)
        a = rng.standard_normal((dim, dim + 2))
        m = a @ a.T  # PSD, usually full rank
        p = pinv_psd(m)
        err = np.linalg.norm(m @ p @ m - m)
        assert err <= 1e-6 * max(np.linalg.norm(m), 1e-30)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(2, 12), st.integers(0, 10_000))
    def test_double_pinv_recovers_nonzero_eigenspace(self, dim, seed):
        rng = np.random.default_rng(seed)
        a = rng.standard_normal((dim, max(1, dim - 2)))
        m = a @ a.T  # rank-deficient PSD
        back = pinv_psd(pinv_psd(m))
        assert np.linalg.norm(back - m) <= 1e-6 * np.linalg.norm(m)


class TestLogDetPsd:
    def test_identity_is_zero(self):
        assert log_det_psd(np.eye(5)) == 0.0

    def test_diag_two_three(self):
        assert log_det_psd(np.diag([2.0, 3.0])) == pytest.approx(np.log(6.0),
                                                                 abs=1e-12)

    def test_floor_applies_to_zero_eigenvalue(self):
        val = log_det_psd(np.diag([1.0, 0.0]), floor=1e-12)
        assert val == pytest.approx(np.log(1e-12), abs=1e-9)
        assert np.isfinite(val)

    def test_diagonal_vector_input(self):
        assert log_det_psd(np.array([2.0, 3.0])) == pytest.approx(np.log(6.0))

    def test_rejects_asymmetric(self):
        with pytest.raises(SymmetryError):
            log_det_psd(np.array([[1.0, 1.0], [0.0, 1.0]]))
