import numpy as np
import pytest

from face_rank.errors import DataError
from face_rank.linalg import FeatureSet, class_statistics
from face_rank.baselines import SourcePredictions, gbc, hscore, leep, logme, nce
from face_rank.metrics import OverlapMatrix, class_fairness, overlap_matrix

from oracles import leep_bruteforce, logme_grid_oracle

LABELS6 = np.array([0, 0, 0, 1, 1, 1])
ONEHOT6 = np.eye(2)[LABELS6]


class TestSourcePredictions:
    def test_rejects_bad_row_sum(self):
        with pytest.raises(DataError):
            SourcePredictions(probs=np.array([[0.6, 0.3]]), source_class_count=2)

    def test_rejects_negative_entries(self):
        with pytest.raises(DataError):
            SourcePredictions(probs=np.array([[1.2, -0.2]]), source_class_count=2)


class TestLeep:
    def test_perfect_onehot_predictor_scores_zero(self):
        preds = SourcePredictions(probs=ONEHOT6, source_class_count=2)
        assert leep(preds, LABELS6) == pytest.approx(0.0, abs=1e-12)

    def test_uniform_predictor_scores_log_half(self):
        theta = np.full((8, 4), 0.25)
        labels = np.array([0, 1] * 4)
        preds = SourcePredictions(probs=theta, source_class_count=4)
        assert leep(preds, labels) == pytest.approx(np.log(0.5), abs=1e-12)

    def test_four_sample_instance_matches_bruteforce(self):
        theta = np.array([[0.9, 0.1], [0.8, 0.2], [0.2, 0.8], [0.1, 0.9]])
        labels = np.array([0, 0, 1, 1])
        preds = SourcePredictions(probs=theta, source_class_count=2)
        assert leep(preds, labels) == pytest.approx(
            leep_bruteforce(theta, labels), abs=1e-12)

    @pytest.mark.parametrize("seed", range(8))
    def test_random_instances_match_bruteforce(self, seed):
        rng = np.random.default_rng(seed)
        n, z, k = 20, int(rng.integers(2, 5)), int(rng.integers(2, 4))
        theta = rng.dirichlet(np.ones(z), size=n)
        labels = rng.integers(0, k, n)
        labels[:k] = np.arange(k)
        preds = SourcePredictions(probs=theta, source_class_count=z)
        assert leep(preds, labels) == pytest.approx(
            leep_bruteforce(theta, labels), abs=1e-10)

    def test_never_positive(self):
        rng = np.random.default_rng(99)
        theta = rng.dirichlet(np.ones(3), size=30)
        labels = rng.integers(0, 2, 30)
        preds = SourcePredictions(probs=theta, source_class_count=3)
        assert leep(preds, labels) <= 0.0

    def test_onehot_reduces_to_confusion_matrix_likelihood(self):
        rng = np.random.default_rng(4)
        n, k = 40, 3
        z_hard = rng.integers(0, k, n)
        labels = rng.integers(0, k, n)
        labels[:k] = np.arange(k)
        theta = np.eye(k)[z_hard]
        preds = SourcePredictions(probs=theta, source_class_count=k)
        # direct confusion-matrix likelihood
        conf = np.zeros((k, k))
        for zi, yi in zip(z_hard, labels):
            conf[yi, zi] += 1
        cond = conf / np.maximum(conf.sum(axis=0, keepdims=True), 1e-12)
        expected = np.mean([np.log(max(cond[yi, zi], 1e-12))
                            for zi, yi in zip(z_hard, labels)])
        assert leep(preds, labels) == pytest.approx(expected, abs=1e-10)

    def test_length_mismatch_rejected(self):
        preds = SourcePredictions(probs=ONEHOT6, source_class_count=2)
        with pytest.raises(DataError):
            leep(preds, LABELS6[:4])


class TestNce:
    def test_identity_mapping(self):
        z = np.array([0, 1, 0, 1, 1])
        assert nce(z, z) == pytest.approx(0.0, abs=1e-12)

    def test_bijective_flip(self):
        z = np.array([0, 1, 0, 1])
        assert nce(z, 1 - z) == pytest.approx(0.0, abs=1e-12)

    def test_independent_uniform(self):
        z = np.array([0, 0, 1, 1])
        y = np.array([0, 1, 0, 1])
        assert nce(z, y) == pytest.approx(-np.log(2), abs=1e-12)

    def test_bounds(self):
        rng = np.random.default_rng(0)
        for _ in range(10):
            z = rng.integers(0, 3, 30)
            y = rng.integers(0, 4, 30)
            val = nce(z, y)
            assert -np.log(4) - 1e-12 <= val <= 0.0

    def test_relabeling_invariance(self):
        rng = np.random.default_rng(8)
        z = rng.integers(0, 4, 50)
        y = rng.integers(0, 3, 50)
        base = nce(z, y)
        pz = rng.permutation(4)
        py = rng.permutation(3)
        assert nce(pz[z], py[y]) == pytest.approx(base, abs=1e-12)

    def test_empty_rejected(self):
        with pytest.raises(DataError):
            nce(np.array([]), np.array([]))


class TestLogme:
    @pytest.mark.parametrize("seed,noise", [(0, 0.3), (1, 0.4), (2, 0.5),
                                            (3, 0.7), (5, 0.35)])
    def test_matches_grid_oracle_on_noisy_instances(self, seed, noise):
        rng = np.random.default_rng(seed)
        feats = ONEHOT6 + noise * rng.standard_normal((6, 2))
        fs = FeatureSet(features=feats, labels=LABELS6, k_count=2)
        assert logme(fs) == pytest.approx(
            logme_grid_oracle(feats, LABELS6, 2), abs=1e-3)

    def test_constant_features_converge_and_match_oracle(self):
        feats = np.tile([0.7, -0.2], (6, 1))
        fs = FeatureSet(features=feats, labels=LABELS6, k_count=2)
        flags = []
        value = logme(fs, flags=flags)
        assert not flags
        assert value == pytest.approx(logme_grid_oracle(feats, LABELS6, 2),
                                      abs=1e-3)

    def test_perfect_fit_flags_nonconvergence_with_finite_value(self):
        fs = FeatureSet(features=ONEHOT6.copy(), labels=LABELS6, k_count=2)
        flags = []
        value = logme(fs, flags=flags)
        assert np.isfinite(value)
        assert any(f.startswith("logme_nonconverged") for f in flags)

    def test_feature_scaling_changes_value(self):
        rng = np.random.default_rng(10)
        feats = ONEHOT6 + 0.3 * rng.standard_normal((6, 2))
        a = logme(FeatureSet(features=feats, labels=LABELS6, k_count=2))
        b = logme(FeatureSet(features=10 * feats, labels=LABELS6, k_count=2))
        assert a != b

    def test_two_model_ranking_matches_oracle(self):
        rng = np.random.default_rng(10)
        quiet = ONEHOT6 + 0.3 * rng.standard_normal((6, 2))
        noisy = ONEHOT6 + 0.8 * rng.standard_normal((6, 2))
        ours = (logme(FeatureSet(features=quiet, labels=LABELS6, k_count=2)),
                logme(FeatureSet(features=noisy, labels=LABELS6, k_count=2)))
        oracle = (logme_grid_oracle(quiet, LABELS6, 2),
                  logme_grid_oracle(noisy, LABELS6, 2))
        assert (ours[0] > ours[1]) == (oracle[0] > oracle[1])

    def test_deterministic(self):
        rng = np.random.default_rng(3)
        feats = rng.standard_normal((12, 3))
        labels = np.repeat([0, 1, 2], 4)
        fs = FeatureSet(features=feats, labels=labels, k_count=3)
        assert logme(fs) == logme(fs)


class TestHscore:
    def test_hand_instance(self):
        fs = FeatureSet(features=np.array([[1.0], [1.0], [-1.0], [-1.0]]),
                        labels=np.array([0, 0, 1, 1]), k_count=2)
        assert hscore(fs) == pytest.approx(1.0, abs=1e-12)

    def test_identical_class_means_score_zero(self):
        fs = FeatureSet(features=np.array([[1.0], [-1.0], [2.0], [-2.0]]),
                        labels=np.array([0, 0, 1, 1]), k_count=2)
        assert hscore(fs) == pytest.approx(0.0, abs=1e-12)

    def test_constant_features_score_zero(self):
        fs = FeatureSet(features=np.full((4, 2), 3.0),
                        labels=np.array([0, 0, 1, 1]), k_count=2)
        assert hscore(fs) == 0.0

    def test_non_negative(self):
        rng = np.random.default_rng(1)
        for _ in range(10):
            feats = rng.standard_normal((24, 4))
            labels = np.repeat([0, 1, 2], 8)
            assert hscore(FeatureSet(features=feats, labels=labels,
                                     k_count=3)) >= 0.0

    @pytest.mark.parametrize("seed", range(5))
    def test_invariant_under_invertible_linear_transform(self, seed):
        rng = np.random.default_rng(seed)
        d = int(rng.integers(2, 8))
        feats = rng.standard_normal((10 * d, d))
        labels = np.tile(np.arange(2), 5 * d)
        fs = FeatureSet(features=feats, labels=labels, k_count=2)
        a = rng.standard_normal((d, d)) + 2 * np.eye(d)
        fs_t = FeatureSet(features=feats @ a, labels=labels, k_count=2)
        assert hscore(fs_t) == pytest.approx(hscore(fs), rel=1e-6)


class TestGbc:
    def test_identical_distributions(self):
        om = OverlapMatrix(distances=np.zeros((2, 2)),
                           coefficients=np.ones((2, 2)))
        assert gbc(om) == -1.0

    def test_half_distance_instance(self):
        d = np.array([[0.0, 0.5], [0.5, 0.0]])
        om = OverlapMatrix(distances=d, coefficients=np.exp(-d))
        assert gbc(om) == pytest.approx(-np.exp(-0.5), abs=1e-12)

    def test_far_separated_classes_vanish(self):
        # means 100 sigma apart in 1-D: overlap is numerically zero
        fs = FeatureSet(
            features=np.concatenate([np.random.default_rng(0).normal(0, 1, 50),
                                     np.random.default_rng(1).normal(100, 1, 50)]
                                    ).reshape(-1, 1),
            labels=np.repeat([0, 1], 50), k_count=2)
        value = gbc(overlap_matrix(class_statistics(fs)))
        assert value <= 0 and abs(value) < 1e-20

    def test_bounds(self):
        rng = np.random.default_rng(7)
        k = 4
        d = np.abs(rng.standard_normal((k, k)))
        d = 0.5 * (d + d.T)
        np.fill_diagonal(d, 0)
        om = OverlapMatrix(distances=d, coefficients=np.exp(-d))
        assert -k * (k - 1) / 2 <= gbc(om) < 0

    def test_shares_distance_path_with_fairness(self):
        # both consume the same overlap matrix: distances agree bit-for-bit
        rng = np.random.default_rng(12)
        feats = rng.standard_normal((60, 3))
        feats[20:40] += 1.5
        feats[40:] += 3.0
        fs = FeatureSet(features=feats, labels=np.repeat([0, 1, 2], 20),
                        k_count=3)
        om1 = overlap_matrix(class_statistics(fs))
        om2 = overlap_matrix(class_statistics(fs))
        np.testing.assert_array_equal(om1.distances, om2.distances)
        gbc(om1)
        class_fairness(om1)
        np.testing.assert_array_equal(om1.distances, om2.distances)
