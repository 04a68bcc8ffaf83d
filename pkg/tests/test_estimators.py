"""Estimator-protocol front end."""

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from tsel.estimators import SubsetSelector
from tsel.selection import select_from_features


@pytest.fixture
def data():
    rng = np.random.default_rng(0)
    return rng.standard_normal((20, 6)), rng.standard_normal((3, 6))


class TestSubsetSelector:
    def test_fit_transform_keeps_budget_rows(self, data):
        pool, queries = data
        selector = SubsetSelector(method="rr", budget=5)
        kept = selector.fit_transform(pool, queries)
        assert kept.shape == (5, 6)
        np.testing.assert_array_equal(kept, pool[selector.indices_])

    def test_matches_functional_api(self, data):
        pool, queries = data
        for method in ("rr", "dg", "knn-uniform", "knn-kde", "uot"):
            selector = SubsetSelector(method=method, budget=4).fit(pool, queries)
            expected = select_from_features(method, queries, pool, 4)
            np.testing.assert_array_equal(selector.indices_, expected.indices)

    def test_get_support_mask(self, data):
        pool, queries = data
        selector = SubsetSelector(method="dg", budget=3).fit(pool, queries)
        mask = selector.get_support()
        assert mask.dtype == bool and mask.sum() == 3
        np.testing.assert_array_equal(np.flatnonzero(mask), np.sort(selector.indices_))
        np.testing.assert_array_equal(selector.get_support(indices=True), selector.indices_)

    def test_clone_and_params_round_trip(self):
        selector = SubsetSelector(method="uot", budget=7, epsilon=0.05, tau2=1e-3)
        params = selector.get_params()
        assert params["method"] == "uot" and params["tau2"] == 1e-3
        twin = clone(selector)
        assert twin.get_params() == params

    def test_unfitted_transform_rejected(self, data):
        pool, _ = data
        with pytest.raises(NotFittedError):
            SubsetSelector().transform(pool)

    def test_transform_requires_same_pool_height(self, data):
        pool, queries = data
        selector = SubsetSelector(budget=2).fit(pool, queries)
        with pytest.raises(ValueError, match="rows"):
            selector.transform(pool[:10])

    def test_invalid_method_rejected_at_fit(self, data):
        pool, queries = data
        with pytest.raises(ValueError, match="unknown method"):
            SubsetSelector(method="nope").fit(pool, queries)
