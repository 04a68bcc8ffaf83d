"""Budgeted subset selection from similarity or cost matrices.

Five selectors share one contract: given an M-query by N-candidate
matrix and a budget B, return B distinct candidate indices with
per-index scores. Ties everywhere break toward the smaller candidate
index, which makes every selector fully deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import similarity as sim
from .transport import ConvergenceError, sinkhorn_unbalanced

_RANGE_SLACK = 1e-9

METHODS = ("rr", "dg", "knn-uniform", "knn-kde", "uot")


@dataclass(frozen=True)
class SelectionResult:
    """Ordered, duplicate-free candidate indices with per-index scores."""

    method: str
    budget: int
    indices: tuple[int, ...]
    scores: tuple[float, ...]
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.budget < 0:
            raise ValueError("budget must be nonnegative")
        if len(self.indices) != self.budget or len(self.scores) != self.budget:
            raise ValueError("indices and scores must both have exactly budget entries")
        if len(set(self.indices)) != len(self.indices):
            raise ValueError("indices must be distinct")
        if any(i < 0 for i in self.indices):
            raise ValueError("indices must be nonnegative")

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "budget": self.budget,
            "indices": list(self.indices),
            "scores": [float(s) for s in self.scores],
        }


@dataclass(frozen=True)
class KnnParams:
    """Neighborhood-mass selector knobs.

    k is the per-query neighborhood size; when omitted it is derived as
    ceil(k_scale * budget / n_queries) so the union of neighborhoods can
    carry at least the budget. prefetch caps how many neighbors a query
    scans, kde_neighbors and sigma shape the Gaussian density estimate,
    and mass_cutoff is a reporting threshold only.
    """

    k: int | None = None
    prefetch: int = 5000
    kde_neighbors: int = 1000
    sigma: float = 0.75
    k_scale: float = 5.0
    mass_cutoff: float = 0.01

    def __post_init__(self):
        if self.k is not None:
            if self.k < 1:
                raise ValueError("k must be >= 1 when given")
            if self.prefetch < self.k:
                raise ValueError("prefetch must be >= k")
        if self.prefetch < 1 or self.kde_neighbors < 1:
            raise ValueError("prefetch and kde_neighbors must be >= 1")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if not self.k_scale > 0:
            raise ValueError("k_scale must be positive")


@dataclass(frozen=True)
class UotParams:
    """Unbalanced-transport selector knobs.

    The query marginal is hard (tau1 defaults to infinity); tau2 sets
    how softly candidate mass may deviate from uniform, which is what
    lets the plan drop irrelevant candidates.
    """

    epsilon: float = 0.01
    tau1: float = math.inf
    tau2: float = 1e-4
    tol: float = 1e-9
    max_iter: int = 10_000

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if not (self.tau1 > 0 and self.tau2 > 0):
            raise ValueError("tau1 and tau2 must be positive (tau1 may be inf)")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")


def _check_matrix(matrix, budget: int, kind: str) -> np.ndarray:
    m = np.asarray(matrix, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 1:
        raise ValueError(f"{kind} matrix must be 2-D and non-empty")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{kind} matrix contains non-finite values")
    if budget < 0:
        raise ValueError("budget must be nonnegative")
    if budget > m.shape[1]:
        raise ValueError(f"budget {budget} exceeds the {m.shape[1]} available candidates")
    return m


def _top_by_score(scores: np.ndarray, budget: int, method: str, diagnostics: dict) -> SelectionResult:
    order = np.lexsort((np.arange(scores.shape[0]), -scores))
    chosen = order[:budget]
    return SelectionResult(
        method=method,
        budget=budget,
        indices=tuple(int(i) for i in chosen),
        scores=tuple(float(scores[i]) for i in chosen),
        diagnostics=diagnostics,
    )


def select_round_robin(similarities, budget: int) -> SelectionResult:
    """Cycle queries in row order; each takes its best unselected candidate.

    Selection order is pick time. A query whose remaining candidates all
    have -inf similarity forfeits its turn instead of aborting the round.

    Each query walks a precomputed preference list (stable descending
    sort, so equal similarities resolve to the smaller index), advancing
    past candidates other queries already took. Total work is
    O(M N log N) for the sorts plus O(M N) pointer advances, which keeps
    full-pool orderings cheap.
    """
    s = _check_similarities(similarities, budget)
    n_queries, n_candidates = s.shape
    preference = np.argsort(-s, axis=1, kind="stable")
    cursor = np.zeros(n_queries, dtype=np.intp)
    taken = np.zeros(n_candidates, dtype=bool)
    picked: list[int] = []
    scores: list[float] = []
    while len(picked) < budget:
        progressed = False
        for q in range(n_queries):
            if len(picked) == budget:
                break
            row = preference[q]
            pos = cursor[q]
            while pos < n_candidates and taken[row[pos]]:
                pos += 1
            cursor[q] = pos
            if pos == n_candidates or s[q, row[pos]] == -np.inf:
                continue
            best = int(row[pos])
            taken[best] = True
            cursor[q] = pos + 1
            picked.append(best)
            scores.append(float(s[q, best]))
            progressed = True
        if not progressed:
            raise ValueError(
                f"round-robin stalled after {len(picked)} picks: no query has a finite-similarity candidate left"
            )
    return SelectionResult("rr", budget, tuple(picked), tuple(scores))


def _check_similarities(similarities, budget: int) -> np.ndarray:
    s = np.asarray(similarities, dtype=np.float64)
    if s.ndim != 2 or s.shape[0] < 1 or s.shape[1] < 1:
        raise ValueError("similarity matrix must be 2-D and non-empty")
    if np.any(np.isnan(s)) or np.any(s == np.inf):
        raise ValueError("similarity matrix contains NaN or +inf")
    if budget < 0:
        raise ValueError("budget must be nonnegative")
    if budget > s.shape[1]:
        raise ValueError(f"budget {budget} exceeds the {s.shape[1]} available candidates")
    return s


def select_doubly_greedy(similarities, budget: int) -> SelectionResult:
    """Score each candidate by its best similarity to any query; take the top B."""
    s = _check_similarities(similarities, budget)
    return _top_by_score(s.max(axis=0), budget, "dg", {})


def _derived_k(params: KnnParams, budget: int, n_queries: int, n_candidates: int) -> int:
    if params.k is not None:
        if params.k > n_candidates:
            raise ValueError(f"k={params.k} exceeds the {n_candidates} available candidates")
        k = params.k
    else:
        k = max(1, math.ceil(params.k_scale * max(budget, 1) / n_queries))
    return min(k, params.prefetch, n_candidates)


def _neighborhoods(costs: np.ndarray, k: int) -> np.ndarray:
    # Stable sort keeps equal-cost candidates in index order.
    return np.argsort(costs, axis=1, kind="stable")[:, :k]


def select_knn_uniform(costs, budget: int, params: KnnParams | None = None) -> SelectionResult:
    """Each query spreads mass 1/(M*K) over its K nearest candidates; take top mass."""
    params = params or KnnParams()
    c = _check_matrix(costs, budget, "cost")
    if np.any(c < 0):
        raise ValueError("cost matrix must be nonnegative")
    n_queries, n_candidates = c.shape
    k = _derived_k(params, budget, n_queries, n_candidates)
    mass = np.zeros(n_candidates)
    np.add.at(mass, _neighborhoods(c, k).ravel(), 1.0 / (n_queries * k))
    diagnostics = {
        "k": k,
        "positive_mass": int(np.count_nonzero(mass > 0)),
        "mass_cutoff": params.mass_cutoff,
    }
    return _top_by_score(mass, budget, "knn-uniform", diagnostics)


def kde_densities(candidate_costs: np.ndarray, params: KnnParams) -> np.ndarray:
    """Gaussian-kernel density of each candidate over its nearest candidates.

    density(i) = mean over the kde_neighbors nearest candidates j of
    exp(-cost(i, j)^2 / (2 sigma^2)). The candidate itself sits at cost
    zero and is part of its own neighborhood, so duplicated candidates
    see their density roughly doubled.
    """
    n = candidate_costs.shape[0]
    k = min(params.kde_neighbors, n)
    neigh = _neighborhoods(candidate_costs, k)
    picked = np.take_along_axis(candidate_costs, neigh, axis=1)
    dens = np.exp(-(picked**2) / (2.0 * params.sigma**2)).mean(axis=1)
    if np.any(dens <= 0):  # kernel is strictly positive; this would be a numerics bug
        raise AssertionError("kernel density collapsed to zero")
    return dens


def select_knn_kde(
    costs, candidate_costs, budget: int, params: KnnParams | None = None
) -> SelectionResult:
    """KNN mass weighted inversely by candidate density, damping near-duplicates.

    Each query's K nearest candidates receive mass proportional to
    1/density, renormalized within the neighborhood so the query still
    contributes total mass 1/M.
    """
    params = params or KnnParams()
    c = _check_matrix(costs, budget, "cost")
    if np.any(c < 0):
        raise ValueError("cost matrix must be nonnegative")
    n_queries, n_candidates = c.shape
    cc = np.asarray(candidate_costs, dtype=np.float64)
    if cc.shape != (n_candidates, n_candidates):
        raise ValueError(
            f"candidate-candidate costs must be {n_candidates}x{n_candidates}, got {cc.shape}"
        )
    if not np.all(np.isfinite(cc)) or np.any(cc < 0):
        raise ValueError("candidate-candidate costs must be finite and nonnegative")
    if np.any(np.abs(np.diagonal(cc)) > _RANGE_SLACK):
        raise ValueError("candidate-candidate costs must have a zero diagonal")
    dens = kde_densities(cc, params)
    inv = 1.0 / dens
    k = _derived_k(params, budget, n_queries, n_candidates)
    neigh = _neighborhoods(c, k)
    weights = inv[neigh]
    weights /= weights.sum(axis=1, keepdims=True) * n_queries
    mass = np.zeros(n_candidates)
    np.add.at(mass, neigh.ravel(), weights.ravel())
    diagnostics = {
        "k": k,
        "positive_mass": int(np.count_nonzero(mass > 0)),
        "mass_cutoff": params.mass_cutoff,
    }
    return _top_by_score(mass, budget, "knn-kde", diagnostics)


def select_uot(costs, budget: int, params: UotParams | None = None) -> SelectionResult:
    """Rank candidates by transported mass under soft candidate marginals.

    Solves unbalanced entropic transport from the uniform query measure
    (hard marginal) to the uniform candidate measure (softly penalized),
    sums the plan over queries, and keeps the top-B columns.
    """
    params = params or UotParams()
    c = _check_matrix(costs, budget, "cost")
    if np.any(c < -_RANGE_SLACK) or np.any(c > 1.0 + _RANGE_SLACK):
        raise ValueError("cost matrix must be normalized to [0, 1] for transport selection")
    c = np.clip(c, 0.0, 1.0)
    plan = sinkhorn_unbalanced(
        c,
        epsilon=params.epsilon,
        tau1=params.tau1,
        tau2=params.tau2,
        tol=params.tol,
        max_iter=params.max_iter,
    )
    if not plan.converged:
        raise ConvergenceError(
            f"transport solve did not converge in {plan.iterations} iterations "
            f"(marginal residuals {plan.marginal_residuals[0]:.3e}, {plan.marginal_residuals[1]:.3e})",
            plan.iterations,
            max(plan.marginal_residuals),
        )
    mass = plan.col_marginal()
    diagnostics = {
        "iterations": plan.iterations,
        "row_residual": plan.marginal_residuals[0],
        "col_residual": plan.marginal_residuals[1],
        "positive_mass": int(np.count_nonzero(mass > 0)),
    }
    return _top_by_score(mass, budget, "uot", diagnostics)


def select_from_features(
    method: str,
    queries,
    pool,
    budget: int,
    *,
    metric: str = "cosine",
    half_normalize: bool | None = None,
    knn_params: KnnParams | None = None,
    uot_params: UotParams | None = None,
) -> SelectionResult:
    """Build the matrices a selector needs from features and dispatch.

    queries and pool are either plain feature matrices or
    CheckpointFeatureStore instances. With the cosine metric, stores use
    the weight-averaged per-checkpoint cosine; with the L2 metric their
    weight-scaled checkpoints are concatenated first. half_normalize
    defaults to on for the transport selector (whose costs must lie in
    [0, 1]) and off otherwise.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}, expected one of {METHODS}")
    if metric not in ("cosine", "l2"):
        raise ValueError(f"unknown metric {metric!r}, expected 'cosine' or 'l2'")
    if half_normalize is None:
        half_normalize = method == "uot"
    is_store = isinstance(queries, sim.CheckpointFeatureStore)
    if is_store != isinstance(pool, sim.CheckpointFeatureStore):
        raise ValueError("queries and pool must both be matrices or both be checkpoint stores")

    if metric == "l2" and is_store:
        queries = sim.concat_scaled_features(queries)
        pool = sim.concat_scaled_features(pool)
        is_store = False

    if method in ("rr", "dg"):
        if metric == "cosine":
            s = (
                sim.weighted_checkpoint_similarity(queries, pool)
                if is_store
                else sim.pairwise_cosine(queries, pool)
            )
        else:
            s = -sim.pairwise_l2(queries, pool)
        return select_round_robin(s, budget) if method == "rr" else select_doubly_greedy(s, budget)

    if metric == "cosine":
        s = (
            sim.weighted_checkpoint_similarity(queries, pool)
            if is_store
            else sim.pairwise_cosine(queries, pool)
        )
        costs = sim.similarity_to_cost(s, normalize_half=half_normalize)
    else:
        if method == "uot":
            raise ValueError(
                "transport selection expects cosine costs normalized to [0, 1]; "
                "the l2 metric is unbounded"
            )
        costs = sim.pairwise_l2(queries, pool)

    if method == "knn-uniform":
        return select_knn_uniform(costs, budget, knn_params)
    if method == "knn-kde":
        if metric == "cosine":
            pool_sim = (
                sim.weighted_checkpoint_similarity(pool, pool)
                if is_store
                else sim.pairwise_cosine(pool, pool)
            )
            cand_costs = sim.similarity_to_cost(pool_sim, normalize_half=half_normalize)
        else:
            cand_costs = sim.pairwise_l2(pool, pool)
        np.fill_diagonal(cand_costs, 0.0)
        return select_knn_kde(costs, cand_costs, budget, knn_params)
    return select_uot(costs, budget, uot_params)
