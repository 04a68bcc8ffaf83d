"""Scikit-learn style front end for the selection algorithms.

SubsetSelector behaves like a sample-wise feature selector: fit() runs
one of the selection methods against a query set and records which pool
rows were chosen, transform() keeps exactly those rows. Parameters
follow the estimator protocol (get_params / set_params / clone), so the
selector drops into sklearn pipelines and model-selection utilities.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .selection import METHODS, KnnParams, UotParams, select_from_features


class SubsetSelector(BaseEstimator):
    """Select a budgeted subset of rows guided by a query set.

    Parameters
    ----------
    method : one of "rr", "dg", "knn-uniform", "knn-kde", "uot".
    budget : number of rows to keep.
    metric : "cosine" or "l2" row-pair geometry.
    half_normalize : map cosine costs onto [0, 1]; None picks the
        method's convention (on for "uot", off otherwise).
    k, sigma : neighborhood size and kernel bandwidth for the KNN
        methods (k=None derives the size from the budget).
    epsilon, tau2 : regularization and soft-marginal strength for "uot".

    Attributes (after fit)
    ----------------------
    indices_ : ndarray of selected row indices, in selection order.
    scores_ : ndarray of per-index selection scores.
    result_ : the underlying SelectionResult.
    """

    def __init__(
        self,
        method: str = "rr",
        budget: int = 10,
        metric: str = "cosine",
        half_normalize: bool | None = None,
        k: int | None = None,
        sigma: float = 0.75,
        epsilon: float = 0.01,
        tau2: float = 1e-4,
    ):
        self.method = method
        self.budget = budget
        self.metric = metric
        self.half_normalize = half_normalize
        self.k = k
        self.sigma = sigma
        self.epsilon = epsilon
        self.tau2 = tau2

    def fit(self, X, queries):
        """Run the configured selection of `budget` rows of X against `queries`."""
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}, expected one of {METHODS}")
        X = check_array(X, dtype=np.float64, ensure_min_samples=1)
        queries = check_array(queries, dtype=np.float64, ensure_min_samples=1)
        result = select_from_features(
            self.method,
            queries,
            X,
            self.budget,
            metric=self.metric,
            half_normalize=self.half_normalize,
            knn_params=KnnParams(k=self.k, sigma=self.sigma),
            uot_params=UotParams(epsilon=self.epsilon, tau2=self.tau2),
        )
        self.result_ = result
        self.indices_ = np.asarray(result.indices, dtype=np.intp)
        self.scores_ = np.asarray(result.scores, dtype=np.float64)
        self.n_features_in_ = X.shape[1]
        self.n_samples_in_ = X.shape[0]
        return self

    def transform(self, X):
        """Keep the selected rows of X, in selection order."""
        check_is_fitted(self, "indices_")
        X = check_array(X, dtype=None, ensure_min_samples=1)
        if X.shape[0] != self.n_samples_in_:
            raise ValueError(
                f"X has {X.shape[0]} rows but the selector was fitted on {self.n_samples_in_}"
            )
        return X[self.indices_]

    def fit_transform(self, X, queries):
        return self.fit(X, queries).transform(X)

    def get_support(self, indices: bool = False):
        """Boolean mask (or index array) of the selected pool rows."""
        check_is_fitted(self, "indices_")
        if indices:
            return self.indices_.copy()
        mask = np.zeros(self.n_samples_in_, dtype=bool)
        mask[self.indices_] = True
        return mask
