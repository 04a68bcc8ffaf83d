"""Similarity/cost construction and the checkpoint-weighted variant."""

import numpy as np
import pytest

from tsel.similarity import (
    CheckpointFeatureStore,
    cosine_similarity,
    load_checkpoint_store,
    pairwise_cosine,
    pairwise_l2,
    similarity_to_cost,
    weighted_checkpoint_similarity,
)


class TestCosine:
    def test_identical_direction(self):
        assert cosine_similarity([1, 0], [1, 0]) == 1.0

    def test_orthogonal(self):
        assert cosine_similarity([1, 0], [0, 1]) == 0.0

    def test_direct_formula(self):
        # 32 / (sqrt(14) * sqrt(77))
        assert cosine_similarity([1, 2, 3], [4, 5, 6]) == pytest.approx(0.974632, abs=1e-6)

    def test_zero_norm_rejected(self):
        with pytest.raises(ValueError, match="zero-norm"):
            cosine_similarity([0, 0], [1, 0])

    def test_dim_mismatch_rejected(self):
        with pytest.raises(ValueError, match="mismatch"):
            cosine_similarity([1, 0], [1, 0, 0])


class TestPairwiseCosine:
    def test_single_row_self(self):
        np.testing.assert_allclose(pairwise_cosine([[2.0, 1.0]], [[2.0, 1.0]]), [[1.0]], atol=1e-12)

    def test_axis_rows(self):
        np.testing.assert_allclose(pairwise_cosine([[1, 0]], [[1, 0], [0, 1]]), [[1.0, 0.0]])

    def test_formula_row(self):
        got = pairwise_cosine([[1, 1]], [[1, 0], [1, 2]])
        np.testing.assert_allclose(got, [[0.707107, 0.948683]], atol=1e-6)

    def test_unit_diagonal(self):
        rng = np.random.default_rng(5)
        x = rng.standard_normal((20, 7))
        np.testing.assert_allclose(np.diag(pairwise_cosine(x, x)), 1.0, atol=1e-6)

    def test_zero_row_names_offender(self):
        x = np.ones((3, 2))
        x[2] = 0.0
        with pytest.raises(ValueError, match="row 2"):
            pairwise_cosine([[1.0, 0.0]], x)

    def test_deterministic(self):
        rng = np.random.default_rng(9)
        q, c = rng.standard_normal((4, 6)), rng.standard_normal((9, 6))
        first = pairwise_cosine(q, c)
        second = pairwise_cosine(q, c)
        assert np.array_equal(first, second)

    def test_float32_inputs_accumulate_in_float64(self):
        q = np.array([[1, 1]], dtype=np.float32)
        assert pairwise_cosine(q, q).dtype == np.float64


class TestSimilarityToCost:
    def test_endpoints_with_half(self):
        got = similarity_to_cost(np.array([[1.0, -1.0]]), normalize_half=True)
        np.testing.assert_array_equal(got, [[0.0, 1.0]])

    def test_zero_without_half(self):
        assert similarity_to_cost(np.array([[0.0]]))[0, 0] == 1.0

    def test_monotone_decreasing_onto_unit_interval(self):
        s = np.linspace(-1, 1, 101)[None, :]
        c = similarity_to_cost(s, normalize_half=True)
        assert c.min() == 0.0 and c.max() == 1.0
        assert np.all(np.diff(c[0]) < 0)

    def test_slack_absorbs_float_drift(self):
        got = similarity_to_cost(np.array([[1.0 + 5e-10]]), normalize_half=True)
        assert got[0, 0] == 0.0

    def test_large_violation_rejected(self):
        with pytest.raises(ValueError, match="outside"):
            similarity_to_cost(np.array([[1.1]]))


class TestPairwiseL2:
    def test_identical_rows(self):
        assert pairwise_l2([[1.0, 2.0]], [[1.0, 2.0]])[0, 0] == 0.0

    def test_3_4_5(self):
        assert pairwise_l2([[0.0, 0.0]], [[3.0, 4.0]])[0, 0] == pytest.approx(5.0)

    def test_formula(self):
        assert pairwise_l2([[1.0, 2.0]], [[4.0, 6.0]])[0, 0] == pytest.approx(5.0)

    def test_dim_mismatch(self):
        with pytest.raises(ValueError, match="mismatch"):
            pairwise_l2([[1.0]], [[1.0, 2.0]])


class TestCheckpointStore:
    def test_learning_rate_normalization(self):
        mats = [np.ones((2, 2)), np.ones((2, 2))]
        store = CheckpointFeatureStore.from_learning_rates(mats, [0.001, 0.003])
        np.testing.assert_allclose(store.weights, [0.25, 0.75], atol=1e-12)

    def test_single_checkpoint_equals_pairwise_exactly(self):
        rng = np.random.default_rng(2)
        q = rng.standard_normal((3, 5))
        c = rng.standard_normal((6, 5))
        store_q = CheckpointFeatureStore.from_learning_rates([q], [0.01])
        store_c = CheckpointFeatureStore.from_learning_rates([c], [0.01])
        got = weighted_checkpoint_similarity(store_q, store_c)
        assert np.array_equal(got, pairwise_cosine(q, c))

    def test_two_checkpoints_average(self):
        # per-checkpoint cosines 1.0 and 0.0 under equal weights -> 0.5
        q1, c1 = [[1.0, 0.0]], [[2.0, 0.0]]
        q2, c2 = [[1.0, 0.0]], [[0.0, 3.0]]
        store_q = CheckpointFeatureStore((np.array(q1), np.array(q2)), np.array([0.5, 0.5]))
        store_c = CheckpointFeatureStore((np.array(c1), np.array(c2)), np.array([0.5, 0.5]))
        got = weighted_checkpoint_similarity(store_q, store_c)
        np.testing.assert_allclose(got, [[0.5]])

    def test_checkpoint_count_mismatch(self):
        one = CheckpointFeatureStore.from_learning_rates([np.ones((2, 2))], [1.0])
        two = CheckpointFeatureStore.from_learning_rates([np.ones((2, 2))] * 2, [1.0, 1.0])
        with pytest.raises(ValueError, match="checkpoint count"):
            weighted_checkpoint_similarity(one, two)

    def test_unnormalized_weights_rejected(self):
        with pytest.raises(ValueError, match="sum to 1"):
            CheckpointFeatureStore((np.ones((2, 2)),), np.array([0.9]))

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError, match="shape"):
            CheckpointFeatureStore.from_learning_rates([np.ones((2, 2)), np.ones((3, 2))], [1.0, 1.0])

    def test_manifest_loading(self, tmp_path):
        from tsel.io import write_features

        write_features(tmp_path / "c1.tsel", np.eye(3))
        write_features(tmp_path / "c2.tsel", 2 * np.eye(3))
        manifest = tmp_path / "store.json"
        manifest.write_text(
            '{"checkpoints": [{"path": "c1.tsel", "lr": 0.001}, {"path": "c2.tsel", "lr": 0.003}]}'
        )
        store = load_checkpoint_store(manifest)
        assert store.n_checkpoints == 2 and store.rows == 3
        np.testing.assert_allclose(store.weights, [0.25, 0.75])
