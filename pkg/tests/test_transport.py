"""Transport solvers: entropic plans, soft marginals, and the exact oracle.

The exact oracle is cross-checked against an independent LP solve
(HiGHS) on small instances, so the assignment fast path and the
integer min-cost-flow fallback are both validated from outside.
"""

import numpy as np
import pytest
from scipy.optimize import linprog

from tsel.transport import (
    OracleSizeError,
    exact_w1,
    sinkhorn,
    sinkhorn_unbalanced,
    uniform_weights,
)


def lp_transport_value(costs, wx, wy):
    """Reference transportation LP solved by scipy's HiGHS backend."""
    m, n = costs.shape
    rows = []
    for i in range(m):
        block = np.zeros((m, n))
        block[i, :] = 1.0
        rows.append(block.ravel())
    for j in range(n):
        block = np.zeros((m, n))
        block[:, j] = 1.0
        rows.append(block.ravel())
    res = linprog(
        costs.ravel(),
        A_eq=np.array(rows),
        b_eq=np.concatenate([wx, wy]),
        bounds=(0, None),
        method="highs",
    )
    assert res.status == 0
    return res.fun


class TestSinkhornBalanced:
    def test_zero_cost_gives_product_coupling(self):
        mu = np.array([0.2, 0.8])
        nu = np.array([0.5, 0.3, 0.2])
        plan = sinkhorn(np.zeros((2, 3)), mu, nu, epsilon=0.5)
        np.testing.assert_allclose(plan.values, np.outer(mu, nu), atol=1e-12)

    def test_two_by_two_identity_structure(self):
        costs = np.array([[0.0, 1.0], [1.0, 0.0]])
        plan = sinkhorn(costs, epsilon=0.01)
        assert plan.converged
        np.testing.assert_allclose(plan.values, np.diag([0.5, 0.5]), atol=1e-6)
        assert plan.transport_cost(costs) <= 0.0 + 0.02

    def test_large_epsilon_approaches_product(self):
        rng = np.random.default_rng(0)
        costs = rng.random((4, 5)) * 0.3
        mu, nu = uniform_weights(4), uniform_weights(5)
        plan = sinkhorn(costs, mu, nu, epsilon=10.0)
        np.testing.assert_allclose(plan.values, np.outer(mu, nu), atol=1e-3)

    def test_marginals_hard(self):
        rng = np.random.default_rng(1)
        costs = rng.random((6, 9))
        plan = sinkhorn(costs, epsilon=0.05)
        assert plan.converged
        np.testing.assert_allclose(plan.row_marginal(), uniform_weights(6), atol=1e-9)
        np.testing.assert_allclose(plan.col_marginal(), uniform_weights(9), atol=1e-9)

    def test_non_convergence_reported_not_raised(self):
        rng = np.random.default_rng(2)
        plan = sinkhorn(rng.random((5, 5)), epsilon=0.01, max_iter=1)
        assert not plan.converged
        assert plan.iterations == 1
        assert max(plan.marginal_residuals) > 0

    def test_objective_near_exact_value(self):
        # entropic transport cost exceeds the exact cost by O(epsilon)
        rng = np.random.default_rng(3)
        for trial in range(5):
            x = rng.random((12, 3))
            y = rng.random((15, 3))
            costs = np.linalg.norm(x[:, None, :] - y[None, :, :], axis=2)
            epsilon = 0.05
            plan = sinkhorn(costs, epsilon=epsilon)
            assert plan.converged
            gap = plan.transport_cost(costs) - exact_w1(x, y)
            assert -1e-9 <= gap <= 10 * epsilon


class TestSinkhornUnbalanced:
    def test_large_tau_matches_balanced(self):
        rng = np.random.default_rng(4)
        costs = rng.random((10, 10))
        balanced = sinkhorn(costs, epsilon=0.05)
        soft = sinkhorn_unbalanced(costs, epsilon=0.05, tau1=1e6, tau2=1e6)
        assert balanced.converged and soft.converged
        np.testing.assert_allclose(soft.values, balanced.values, atol=1e-4)

    def test_hard_row_marginal_regardless_of_tau2(self):
        rng = np.random.default_rng(5)
        costs = rng.random((7, 13))
        for tau2 in (1.0, 1e-2, 1e-4):
            plan = sinkhorn_unbalanced(costs, epsilon=0.01, tau2=tau2)
            assert plan.converged
            np.testing.assert_allclose(plan.row_marginal(), uniform_weights(7), atol=1e-9)

    def test_tiny_tau2_concentrates_mass(self):
        plan = sinkhorn_unbalanced(np.array([[0.0, 1.0]]), epsilon=0.01, tau2=1e-4)
        assert plan.converged
        assert plan.values[0, 0] > 0.999
        assert plan.values[0, 1] < 1e-3

    def test_total_mass_shrinks_with_tau2_when_outlier_present(self):
        """Loosening the candidate marginal sheds the outlier's mass.

        Measured on the stiff-to-moderate tau2 branch, where marginal
        pressure dominates: a stiff tau2 forces a third of the mass onto
        the cost-1 outlier column, and each relaxation step lets the
        plan drop more of it. (Near tau2 = 0 the entropic anchor takes
        over and total mass drifts back toward the product coupling's.)
        """
        costs = np.array([[0.0, 0.0, 1.0], [0.0, 0.0, 1.0]])
        masses = []
        for tau2 in (100.0, 30.0, 10.0, 3.0, 1.0):
            plan = sinkhorn_unbalanced(costs, epsilon=0.05, tau1=1.0, tau2=tau2)
            assert plan.converged
            masses.append(plan.values.sum())
        assert all(b < a for a, b in zip(masses, masses[1:]))

    def test_rejects_nonpositive_tau(self):
        with pytest.raises(ValueError):
            sinkhorn_unbalanced(np.ones((2, 2)), epsilon=0.1, tau1=0.0, tau2=1.0)


class TestExactW1:
    def test_identical_supports(self):
        x = np.array([[0.0, 1.0], [2.0, 3.0]])
        assert exact_w1(x, x) == 0.0

    def test_two_single_points(self):
        assert exact_w1([[0.0, 0.0]], [[3.0, 4.0]]) == pytest.approx(5.0)

    def test_split_mass(self):
        # both half-masses at 0 and 2 travel distance 1 to reach 1
        assert exact_w1([[0.0], [2.0]], [[1.0]]) == pytest.approx(1.0)

    def test_matches_reference_lp_uniform(self):
        rng = np.random.default_rng(6)
        for trial in range(5):
            x = rng.random((6, 2))
            y = rng.random((9, 2))
            costs = np.linalg.norm(x[:, None] - y[None, :], axis=2)
            expected = lp_transport_value(costs, uniform_weights(6), uniform_weights(9))
            assert exact_w1(x, y) == pytest.approx(expected, abs=1e-7)

    def test_matches_reference_lp_random_weights(self):
        # irrational-looking weights force the min-cost-flow fallback
        rng = np.random.default_rng(7)
        for trial in range(5):
            x = rng.random((5, 3))
            y = rng.random((7, 3))
            wx = rng.random(5)
            wx /= wx.sum()
            wy = rng.random(7)
            wy /= wy.sum()
            costs = np.linalg.norm(x[:, None] - y[None, :], axis=2)
            expected = lp_transport_value(costs, wx, wy)
            assert exact_w1(x, y, wx, wy) == pytest.approx(expected, abs=1e-6)

    def test_symmetry(self):
        rng = np.random.default_rng(8)
        x, y = rng.random((8, 3)), rng.random((5, 3))
        assert exact_w1(x, y) == pytest.approx(exact_w1(y, x), abs=1e-9)

    def test_triangle_inequality(self):
        rng = np.random.default_rng(9)
        for trial in range(20):
            x, y, z = (rng.random((rng.integers(2, 7), 2)) for _ in range(3))
            d_xz = exact_w1(x, z)
            d_xy = exact_w1(x, y)
            d_yz = exact_w1(y, z)
            assert d_xz <= d_xy + d_yz + 1e-9

    def test_affine_homogeneity(self):
        rng = np.random.default_rng(10)
        x, y = rng.random((6, 3)), rng.random((4, 3))
        shift = rng.random(3)
        scale = -2.5
        base = exact_w1(x, y)
        mapped = exact_w1(scale * x + shift, scale * y + shift)
        assert mapped == pytest.approx(abs(scale) * base, rel=1e-9)

    def test_zero_weight_points_are_ignored(self):
        x = np.array([[0.0], [100.0]])
        wx = np.array([1.0, 0.0])
        assert exact_w1(x, [[0.0]], wx, None) == pytest.approx(0.0)

    def test_oracle_cap(self):
        big = np.zeros((513, 2))
        with pytest.raises(OracleSizeError, match="entropic"):
            exact_w1(big, [[0.0, 0.0]])

    def test_weight_validation(self):
        with pytest.raises(ValueError, match="sum to 1"):
            exact_w1([[0.0]], [[1.0]], np.array([0.5]), None)
