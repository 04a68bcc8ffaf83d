"""Representation operators: pooling, optimizer updates, sign projection."""

import numpy as np
import pytest

from tsel.features import (
    AdamHyper,
    AdamState,
    ProjectionSpec,
    adam_update,
    position_weighted_pool,
    project_features,
    projection_entries,
    rademacher_project,
)


class TestPositionWeightedPool:
    def test_single_vector_unchanged(self):
        np.testing.assert_array_equal(position_weighted_pool([[3.0, -1.0]]), [3.0, -1.0])

    def test_two_vectors(self):
        got = position_weighted_pool([[1.0, 0.0], [0.0, 1.0]])
        np.testing.assert_allclose(got, [1 / 3, 2 / 3])

    def test_three_axis_vectors(self):
        got = position_weighted_pool(np.eye(3))
        np.testing.assert_allclose(got, [1 / 6, 2 / 6, 3 / 6])

    @pytest.mark.parametrize("length", range(1, 101))
    def test_weights_sum_to_one(self, length):
        # pooling a constant sequence returns the constant iff weights sum to 1
        got = position_weighted_pool(np.ones((length, 1)))
        np.testing.assert_allclose(got, [1.0], atol=1e-12)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            position_weighted_pool(np.empty((0, 4)))


class TestAdamUpdate:
    def test_zero_everything(self):
        got = adam_update([0.0, 0.0], AdamState.zeros(2))
        np.testing.assert_array_equal(got, [0.0, 0.0])

    def test_beta_zero_closed_form(self):
        got = adam_update([2.0, -3.0], AdamState.zeros(2), AdamHyper(0.0, 0.0, 1e-8))
        expected = np.array([2.0 / (2.0 + 1e-8), -3.0 / (3.0 + 1e-8)])
        np.testing.assert_allclose(got, expected, atol=1e-12)

    def test_bias_correction_cancels_at_step_zero(self):
        eps = 1e-8
        got = adam_update([1.0], AdamState.zeros(1, step=0), AdamHyper(0.9, 0.999, eps))
        np.testing.assert_allclose(got, [1.0 / (1.0 + eps)], atol=1e-15)

    def test_sign_covariance(self):
        rng = np.random.default_rng(0)
        g = rng.standard_normal(16)
        plus = adam_update(g, AdamState.zeros(16))
        minus = adam_update(-g, AdamState.zeros(16))
        np.testing.assert_allclose(minus, -plus, atol=1e-15)

    def test_nonfinite_gradient_rejected(self):
        with pytest.raises(ValueError):
            adam_update([np.inf], AdamState.zeros(1))

    def test_moment_dim_mismatch_rejected(self):
        with pytest.raises(ValueError):
            adam_update([1.0, 2.0], AdamState.zeros(3))

    def test_negative_second_moment_rejected(self):
        with pytest.raises(ValueError):
            AdamState(np.zeros(2), np.array([1.0, -0.1]))


class TestRademacherProjection:
    def test_deterministic(self):
        spec = ProjectionSpec(seed=42, in_dim=300, out_dim=32)
        rng = np.random.default_rng(1)
        x = rng.standard_normal(300)
        assert np.array_equal(rademacher_project(x, spec), rademacher_project(x, spec))

    def test_zero_maps_to_zero(self):
        spec = ProjectionSpec(seed=7, in_dim=50, out_dim=8)
        np.testing.assert_array_equal(rademacher_project(np.zeros(50), spec), np.zeros(8))

    def test_entries_are_signs(self):
        spec = ProjectionSpec(seed=3, in_dim=200, out_dim=24)
        block = projection_entries(spec, slice(0, 200))
        assert set(np.unique(block)) == {-1.0, 1.0}

    def test_blocks_agree_with_full_matrix(self):
        # regenerating a sub-block must reproduce the same entries
        spec = ProjectionSpec(seed=3, in_dim=100, out_dim=24)
        full = projection_entries(spec, slice(0, 100))
        part = projection_entries(spec, slice(37, 61))
        assert np.array_equal(part, full[37:61])

    def test_linearity(self):
        spec = ProjectionSpec(seed=11, in_dim=400, out_dim=64)
        rng = np.random.default_rng(2)
        a, b = rng.standard_normal(400), rng.standard_normal(400)
        lhs = rademacher_project(a + b, spec)
        rhs = rademacher_project(a, spec) + rademacher_project(b, spec)
        np.testing.assert_allclose(lhs, rhs, rtol=1e-5)

    def test_matrix_rows_match_vector_calls(self):
        spec = ProjectionSpec(seed=5, in_dim=150, out_dim=16)
        rng = np.random.default_rng(3)
        x = rng.standard_normal((4, 150))
        rows = project_features(x, spec)
        for i in range(4):
            np.testing.assert_allclose(rows[i], rademacher_project(x[i], spec), rtol=1e-12)

    def test_dim_mismatch_rejected(self):
        with pytest.raises(ValueError, match="mismatch"):
            rademacher_project(np.zeros(10), ProjectionSpec(seed=0, in_dim=11, out_dim=4))

    def test_cosine_preservation_small_scale(self):
        # coarse angle-preservation check at a size cheap enough for unit
        # tests; the full-size run lives in the acceptance suite
        spec = ProjectionSpec(seed=17, in_dim=1000, out_dim=512)
        rng = np.random.default_rng(4)
        a = rng.standard_normal((60, 1000))
        b = rng.standard_normal((60, 1000))
        pa, pb = project_features(a, spec), project_features(b, spec)

        def cosines(u, v):
            num = np.sum(u * v, axis=1)
            return num / (np.linalg.norm(u, axis=1) * np.linalg.norm(v, axis=1))

        err = np.abs(cosines(pa, pb) - cosines(a, b))
        assert err.mean() <= 0.08
