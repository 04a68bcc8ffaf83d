"""Monte-Carlo study of how the transport distance between a random
sample and its source pool shrinks with sample size.

For pools of diameter D in dimension d >= 3, the expected distance of a
B-point i.i.d. sample decays like B**(-1/d) and concentrates within
D * sqrt(log(1/delta) / (2B)) of its mean. Everything here measures
those two behaviors with the exact transport oracle on synthetic pools
small enough for exact solves, plus a brute-force minimum-distance
subset search used as a lower envelope for the selection algorithms.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .selection import SelectionResult
from .similarity import as_feature_matrix
from .transport import ORACLE_CAP, exact_w1

ENUMERATION_GUARD = 1_000_000

DISTRIBUTIONS = ("uniform-cube", "gaussian-clipped")


@dataclass(frozen=True)
class SyntheticPoolSpec:
    """Reproducible synthetic pool with a known diameter bound.

    uniform-cube fills a cube whose main diagonal equals the diameter;
    gaussian-clipped draws centered normals and radially clips them to
    a ball of radius diameter/2. Either way every pairwise distance is
    at most `diameter`. Dimension must be at least 3 so the B**(-1/d)
    term dominates the B**(-1/2) concentration term.
    """

    n: int
    dim: int
    diameter: float = 1.0
    distribution: str = "uniform-cube"
    seed: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("pool size must be >= 1")
        if self.dim < 3:
            raise ValueError("dimension must be >= 3")
        if not self.diameter > 0:
            raise ValueError("diameter must be positive")
        if self.distribution not in DISTRIBUTIONS:
            raise ValueError(f"unknown distribution {self.distribution!r}, expected one of {DISTRIBUTIONS}")

    def sample(self) -> np.ndarray:
        rng = np.random.default_rng(self.seed)
        if self.distribution == "uniform-cube":
            side = self.diameter / math.sqrt(self.dim)
            return rng.random((self.n, self.dim)) * side
        points = rng.standard_normal((self.n, self.dim)) * (self.diameter / 6.0)
        radius = self.diameter / 2.0
        norms = np.linalg.norm(points, axis=1)
        over = norms > radius
        if np.any(over):
            points[over] *= (radius / norms[over])[:, None]
        return points


@dataclass(frozen=True)
class DecayReport:
    """Mean sample-to-pool distances per budget plus the fitted decay slope."""

    budgets: tuple[int, ...]
    mean_w1: tuple[float, ...]
    stderr: tuple[float, ...]
    loglog_slope: float
    trials: int
    seed: int
    degenerate: bool = False

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if any(b2 <= b1 for b1, b2 in zip(self.budgets, self.budgets[1:])):
            raise ValueError("budgets must be strictly increasing")

    def to_dict(self) -> dict:
        return {
            "budgets": list(self.budgets),
            "mean_w1": [float(v) for v in self.mean_w1],
            "stderr": [float(v) for v in self.stderr],
            "loglog_slope": None if math.isnan(self.loglog_slope) else float(self.loglog_slope),
            "trials": self.trials,
            "seed": self.seed,
            "degenerate": self.degenerate,
        }


def sample_random_multiset(pool, size: int, seed: int) -> np.ndarray:
    """Draw `size` row indices i.i.d. uniform with replacement."""
    p = as_feature_matrix(pool, "pool")
    if size < 1:
        raise ValueError("sample size must be >= 1")
    rng = np.random.default_rng(seed)
    return rng.integers(0, p.shape[0], size=size)


def multiset_measure(pool, indices) -> tuple[np.ndarray, np.ndarray]:
    """Support points and weights of the empirical measure of a multiset."""
    p = as_feature_matrix(pool, "pool")
    idx = np.asarray(indices, dtype=np.intp)
    if idx.ndim != 1 or idx.size < 1:
        raise ValueError("indices must be a non-empty 1-D sequence")
    uniq, counts = np.unique(idx, return_counts=True)
    return p[uniq], counts / idx.size


def sample_to_pool_w1(pool, indices) -> float:
    """Exact distance between a sampled multiset's measure and the pool measure."""
    support, weights = multiset_measure(pool, indices)
    return exact_w1(support, pool, weights, None)


def empirical_w1_decay(spec: SyntheticPoolSpec, budgets, trials: int) -> DecayReport:
    """Average sample-to-pool distance per budget and its log-log slope.

    Trial t of every budget uses seed spec.seed + t, so results are
    reproducible and trials could run in any order. A pool whose mean
    distances are all zero (e.g. identical points) is flagged degenerate
    and gets no slope.
    """
    budgets = tuple(int(b) for b in budgets)
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if not budgets or any(b < 1 for b in budgets):
        raise ValueError("budgets must be a non-empty sequence of positive counts")
    if any(b2 <= b1 for b1, b2 in zip(budgets, budgets[1:])):
        raise ValueError("budgets must be strictly increasing")
    if spec.n > ORACLE_CAP:
        raise ValueError(f"pool size {spec.n} exceeds the exact-oracle cap {ORACLE_CAP}")
    pool = spec.sample()
    means = []
    stderrs = []
    for budget in budgets:
        values = np.array(
            [sample_to_pool_w1(pool, sample_random_multiset(pool, budget, spec.seed + t)) for t in range(trials)]
        )
        means.append(float(values.mean()))
        stderrs.append(float(values.std(ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0)
    degenerate = any(m <= 0.0 for m in means)
    if degenerate or len(budgets) < 2:
        slope = math.nan
        degenerate = True
    else:
        slope = float(np.polyfit(np.log(np.asarray(budgets, dtype=float)), np.log(means), 1)[0])
    return DecayReport(budgets, tuple(means), tuple(stderrs), slope, trials, spec.seed, degenerate)


def mcdiarmid_coverage(spec: SyntheticPoolSpec, budget: int, trials: int, delta: float) -> float:
    """Fraction of sampled distances within the concentration bound.

    Estimates the mean sample-to-pool distance over `trials` draws, then
    counts how many draws fall below mean + diameter *
    sqrt(log(1/delta) / (2 * budget)). The bound promises this fraction
    is at least 1 - delta.
    """
    if trials < 100:
        raise ValueError("need at least 100 trials for a meaningful coverage estimate")
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    if budget < 1:
        raise ValueError("budget must be >= 1")
    pool = spec.sample()
    values = np.array(
        [sample_to_pool_w1(pool, sample_random_multiset(pool, budget, spec.seed + t)) for t in range(trials)]
    )
    threshold = float(values.mean()) + concentration_slack(spec.diameter, budget, delta)
    return float(np.mean(values <= threshold))


def concentration_slack(diameter: float, budget: int, delta: float) -> float:
    """Additive deviation allowance diameter * sqrt(log(1/delta) / (2B))."""
    return diameter * math.sqrt(math.log(1.0 / delta) / (2.0 * budget))


def brute_force_min_w1_subset(pool, queries, budget: int) -> SelectionResult:
    """Exhaustive search for the size-B subset closest to the query measure.

    Ties resolve to the lexicographically smallest index tuple because
    subsets are enumerated in lexicographic order and only strict
    improvements replace the incumbent.
    """
    p = as_feature_matrix(pool, "pool")
    n = p.shape[0]
    if not 1 <= budget <= n:
        raise ValueError(f"budget must lie in 1..{n}")
    n_subsets = math.comb(n, budget)
    if n_subsets > ENUMERATION_GUARD:
        raise ValueError(
            f"{n_subsets} subsets exceed the enumeration guard of {ENUMERATION_GUARD}"
        )
    best_value = math.inf
    best_combo: tuple[int, ...] | None = None
    for combo in itertools.combinations(range(n), budget):
        value = exact_w1(p[list(combo)], queries)
        if value < best_value:
            best_value = value
            best_combo = combo
    return SelectionResult(
        method="brute-force-w1",
        budget=budget,
        indices=best_combo,
        scores=tuple(best_value for _ in best_combo),
        diagnostics={"w1": best_value, "subsets_evaluated": n_subsets},
    )


@dataclass(frozen=True)
class DecompositionReport:
    """Numerical check of the two triangle steps behind the decay bound.

    First: d(random, optimal) <= d(random, Q) + d(optimal, Q).
    Second: d(random, Q) <= d(random, pool) + d(pool, Q).
    Slack is rhs - lhs; a negative slack beyond tolerance would mean the
    exact solver violated the metric axioms, i.e. a solver bug.
    """

    w1_rand_star: float
    w1_rand_query: float
    w1_star_query: float
    w1_rand_pool: float
    w1_pool_query: float
    slack_first: float
    slack_second: float
    ok: bool


def decomposition_check(pool, queries, random_indices, star_indices, tol: float = 1e-9) -> DecompositionReport:
    """Verify both triangle inequalities on concrete selections."""
    p = as_feature_matrix(pool, "pool")
    q = as_feature_matrix(queries, "queries")
    rnd_support, rnd_weights = multiset_measure(p, random_indices)
    star_idx = np.asarray(
        star_indices.indices if isinstance(star_indices, SelectionResult) else tuple(star_indices),
        dtype=np.intp,
    )
    star = p[star_idx]
    w1_rand_star = exact_w1(rnd_support, star, rnd_weights, None)
    w1_rand_query = exact_w1(rnd_support, q, rnd_weights, None)
    w1_star_query = exact_w1(star, q)
    w1_rand_pool = exact_w1(rnd_support, p, rnd_weights, None)
    w1_pool_query = exact_w1(p, q)
    slack_first = (w1_rand_query + w1_star_query) - w1_rand_star
    slack_second = (w1_rand_pool + w1_pool_query) - w1_rand_query
    return DecompositionReport(
        w1_rand_star=w1_rand_star,
        w1_rand_query=w1_rand_query,
        w1_star_query=w1_star_query,
        w1_rand_pool=w1_rand_pool,
        w1_pool_query=w1_pool_query,
        slack_first=slack_first,
        slack_second=slack_second,
        ok=slack_first >= -tol and slack_second >= -tol,
    )
