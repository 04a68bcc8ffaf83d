"""Optimal-transport solvers for discrete measures.

Two entropic solvers (balanced and unbalanced, both iterated in the log
domain so tiny regularization with costs in [0, 1] cannot overflow the
scaling vectors) plus an exact 1-Wasserstein oracle used by tests and
the sampling-law validation. The oracle reduces to a min-cost
assignment when both weight vectors are small exact rationals and
otherwise falls back to a min-cost flow on integer-scaled supplies and
costs, which is guaranteed to terminate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import networkx as nx
import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist
from scipy.special import logsumexp

from .similarity import as_feature_matrix

DEFAULT_TOL = 1e-9
DEFAULT_MAX_ITER = 10_000
ORACLE_CAP = 512

# Integer scaling for the min-cost-flow fallback. Costs and masses are
# rounded at this resolution, so the value is exact for the rounded
# problem and within ~2e-9 * (cost scale) per unit mass of the true one.
_COST_SCALE = 10**9
_MASS_SCALE = 10**9

# Ceiling on the atom count of the assignment fast path (an L x L
# dense assignment problem is solved).
_ASSIGN_CAP = 2048

_MEASURE_TOL = 1e-9


class ConvergenceError(Exception):
    """A transport solve did not reach its tolerance.

    Carries the iteration count and the worst marginal residual so the
    failure can be reported precisely.
    """

    def __init__(self, message: str, iterations: int, residual: float):
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual


class OracleSizeError(ValueError):
    """Exact solve requested on more support points than the oracle cap."""


@dataclass(frozen=True)
class TransportPlan:
    """Nonnegative coupling with convergence metadata.

    marginal_residuals holds the final L-infinity deviations of (row
    sums, column sums) from the requested marginals; for a soft
    (penalized) side the deviation is informational, not an error.
    """

    values: np.ndarray
    converged: bool
    iterations: int
    marginal_residuals: tuple[float, float]

    def row_marginal(self) -> np.ndarray:
        return self.values.sum(axis=1)

    def col_marginal(self) -> np.ndarray:
        return self.values.sum(axis=0)

    def transport_cost(self, costs) -> float:
        """Linear part <C, plan> of the objective."""
        c = np.asarray(costs, dtype=np.float64)
        if c.shape != self.values.shape:
            raise ValueError(f"cost shape {c.shape} does not match plan shape {self.values.shape}")
        return float(np.sum(c * self.values))


def uniform_weights(n: int) -> np.ndarray:
    """The empirical measure over n rows: weight 1/n each."""
    if n < 1:
        raise ValueError("measure needs at least one support point")
    return np.full(n, 1.0 / n)


def _check_weights(w, n: int, name: str, probability: bool) -> np.ndarray:
    arr = np.asarray(w, dtype=np.float64)
    if arr.ndim != 1 or arr.shape[0] != n:
        raise ValueError(f"{name} must be a length-{n} weight vector")
    if np.any(arr < 0) or not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite and nonnegative")
    if float(arr.sum()) <= 0.0:
        raise ValueError(f"{name} must carry positive total mass")
    if probability and abs(float(arr.sum()) - 1.0) > _MEASURE_TOL:
        raise ValueError(f"{name} must sum to 1 within {_MEASURE_TOL}, got {float(arr.sum())!r}")
    return arr


def _check_costs(costs) -> np.ndarray:
    c = np.asarray(costs, dtype=np.float64)
    if c.ndim != 2 or c.shape[0] < 1 or c.shape[1] < 1:
        raise ValueError("cost matrix must be 2-D and non-empty")
    if not np.all(np.isfinite(c)):
        raise ValueError("cost matrix contains non-finite values")
    if np.any(c < 0):
        raise ValueError("cost matrix must be nonnegative")
    return c


def _safe_log(w: np.ndarray) -> np.ndarray:
    out = np.full(w.shape, -np.inf)
    np.log(w, out=out, where=w > 0)
    return out


def _scaling_iterations(
    costs: np.ndarray,
    mu: np.ndarray,
    nu: np.ndarray,
    epsilon: float,
    lam1: float,
    lam2: float,
    tol: float,
    max_iter: int,
) -> TransportPlan:
    """Shared log-domain loop for both solvers.

    Entropy is taken relative to the product measure mu x nu, so the
    plan is mu_i * nu_j * exp((f_i + g_j - C_ij) / epsilon) and the
    zero-cost / infinite-regularization limits are the product coupling
    with total mass preserved. lam is tau / (tau + epsilon); a hard
    marginal has lam = 1.

    Stopping: every hard side must meet the marginal tolerance, and the
    plan itself must have stabilized. Potentials are not compared
    directly because a soft-soft run leaves an (f + c, g - c) gauge
    direction that decays arbitrarily slowly while the plan, which only
    sees f + g, is long since fixed.
    """
    log_mu = _safe_log(mu)
    log_nu = _safe_log(nu)
    m, n = costs.shape
    f = np.zeros(m)
    g = np.zeros(n)
    plan = np.zeros((m, n))
    res_row = res_col = np.inf
    iterations = 0
    converged = False
    for iterations in range(1, max_iter + 1):
        f = -lam1 * epsilon * logsumexp(log_nu[None, :] + (g[None, :] - costs) / epsilon, axis=1)
        g = -lam2 * epsilon * logsumexp(log_mu[:, None] + (f[:, None] - costs) / epsilon, axis=0)
        previous = plan
        with np.errstate(invalid="ignore"):
            plan = np.exp(
                log_mu[:, None] + log_nu[None, :] + (f[:, None] + g[None, :] - costs) / epsilon
            )
        plan = np.nan_to_num(plan, nan=0.0, posinf=np.inf)
        res_row = float(np.max(np.abs(plan.sum(axis=1) - mu)))
        res_col = float(np.max(np.abs(plan.sum(axis=0) - nu)))
        hard_ok = (lam1 < 1.0 or res_row <= tol) and (lam2 < 1.0 or res_col <= tol)
        if hard_ok and float(np.max(np.abs(plan - previous))) <= tol:
            converged = True
            break
    return TransportPlan(plan, converged, iterations, (res_row, res_col))


def sinkhorn(
    costs,
    mu=None,
    nu=None,
    *,
    epsilon: float,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> TransportPlan:
    """Entropic transport between probability measures (hard marginals).

    Minimizes <C, plan> + epsilon * entropy-regularizer subject to both
    marginals. Omitted weights default to uniform. Non-convergence is
    reported through the returned plan, not an exception; the caller
    decides whether a loose plan is usable.
    """
    c = _check_costs(costs)
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    m, n = c.shape
    mu = uniform_weights(m) if mu is None else _check_weights(mu, m, "mu", probability=True)
    nu = uniform_weights(n) if nu is None else _check_weights(nu, n, "nu", probability=True)
    return _scaling_iterations(c, mu, nu, epsilon, 1.0, 1.0, tol, max_iter)


def sinkhorn_unbalanced(
    costs,
    mu=None,
    nu=None,
    *,
    epsilon: float,
    tau1: float = math.inf,
    tau2: float,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> TransportPlan:
    """Entropic transport with soft (KL-penalized) marginals.

    tau controls how strongly each side is pinned to its marginal; the
    scaling exponent on a side is tau / (tau + epsilon), so tau = inf
    recovers a hard constraint and large finite tau approaches the
    balanced solution.
    """
    c = _check_costs(costs)
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    if not (tau1 > 0 and tau2 > 0):
        raise ValueError("tau1 and tau2 must be positive (use inf for a hard marginal)")
    m, n = c.shape
    mu = uniform_weights(m) if mu is None else _check_weights(mu, m, "mu", probability=False)
    nu = uniform_weights(n) if nu is None else _check_weights(nu, n, "nu", probability=False)
    lam1 = 1.0 if math.isinf(tau1) else tau1 / (tau1 + epsilon)
    lam2 = 1.0 if math.isinf(tau2) else tau2 / (tau2 + epsilon)
    return _scaling_iterations(c, mu, nu, epsilon, lam1, lam2, tol, max_iter)


def _rational_atoms(weights: np.ndarray, max_denominator: int) -> tuple[list[int], int] | None:
    """Express weights as exact integer atom counts over a common denominator.

    Returns None when the weights are not (recognizably) rationals with
    an exactly unit sum, or when the denominator exceeds the cap.
    """
    fracs = []
    denom = 1
    for w in weights:
        fr = Fraction(float(w)).limit_denominator(max_denominator)
        if abs(fr - Fraction(float(w))) > Fraction(1, 10**12):
            return None
        fracs.append(fr)
        denom = denom * fr.denominator // math.gcd(denom, fr.denominator)
        if denom > _ASSIGN_CAP:
            return None
    if sum(fracs, start=Fraction(0)) != 1:
        return None
    counts = [int(fr.numerator * (denom // fr.denominator)) for fr in fracs]
    return counts, denom


def _assignment_value(costs: np.ndarray, wx: np.ndarray, wy: np.ndarray) -> float | None:
    """Exact transport value via unit-atom assignment, when applicable.

    With integer marginals the transportation polytope has integral
    vertices, so splitting both sides into equal-mass atoms turns the
    problem into a D x D min-cost perfect matching.
    """
    rx = _rational_atoms(wx, _ASSIGN_CAP)
    ry = _rational_atoms(wy, _ASSIGN_CAP)
    if rx is None or ry is None:
        return None
    cx, dx = rx
    cy, dy = ry
    denom = dx * dy // math.gcd(dx, dy)
    if denom > _ASSIGN_CAP:
        return None
    row_atoms = np.repeat(np.arange(len(cx)), np.asarray(cx) * (denom // dx))
    col_atoms = np.repeat(np.arange(len(cy)), np.asarray(cy) * (denom // dy))
    expanded = costs[np.ix_(row_atoms, col_atoms)]
    rows, cols = linear_sum_assignment(expanded)
    return float(expanded[rows, cols].sum()) / denom


def _integer_supplies(weights: np.ndarray, scale: int) -> np.ndarray:
    supplies = np.rint(weights * scale).astype(np.int64)
    supplies[int(np.argmax(supplies))] += scale - int(supplies.sum())
    if np.any(supplies < 0):
        raise ValueError("weight rounding produced a negative supply; weights are degenerate")
    return supplies


def _min_cost_flow_value(costs: np.ndarray, wx: np.ndarray, wy: np.ndarray) -> float:
    """Exact transport value of the integer-rounded problem via network simplex."""
    supplies = _integer_supplies(wx, _MASS_SCALE)
    demands = _integer_supplies(wy, _MASS_SCALE)
    int_costs = np.rint(costs * _COST_SCALE).astype(np.int64)
    graph = nx.DiGraph()
    for i, s in enumerate(supplies):
        graph.add_node(("src", i), demand=-int(s))
    for j, d in enumerate(demands):
        graph.add_node(("dst", j), demand=int(d))
    for i in range(len(supplies)):
        row = int_costs[i]
        for j in range(len(demands)):
            graph.add_edge(("src", i), ("dst", j), weight=int(row[j]))
    flow_cost, _ = nx.network_simplex(graph)
    return flow_cost / (_COST_SCALE * _MASS_SCALE)


def exact_w1(points_x, points_y, wx=None, wy=None, *, oracle_cap: int = ORACLE_CAP) -> float:
    """Exact 1-Wasserstein distance under the Euclidean ground metric.

    Solves the transportation LP between the two weighted point sets.
    Support sizes above oracle_cap are refused; use the entropic
    approximation (sinkhorn) for larger instances.
    """
    x = as_feature_matrix(points_x, "points_x")
    y = as_feature_matrix(points_y, "points_y")
    if x.shape[1] != y.shape[1]:
        raise ValueError(f"dimension mismatch: {x.shape[1]} vs {y.shape[1]}")
    if x.shape[0] > oracle_cap or y.shape[0] > oracle_cap:
        raise OracleSizeError(
            f"exact oracle capped at {oracle_cap} support points per side "
            f"(got {x.shape[0]} and {y.shape[0]}); use the entropic approximation instead"
        )
    wx = uniform_weights(x.shape[0]) if wx is None else _check_weights(wx, x.shape[0], "wx", True)
    wy = uniform_weights(y.shape[0]) if wy is None else _check_weights(wy, y.shape[0], "wy", True)
    keep_x = wx > 0
    keep_y = wy > 0
    x, wx = x[keep_x], wx[keep_x]
    y, wy = y[keep_y], wy[keep_y]
    if x.shape[0] == 0 or y.shape[0] == 0:
        raise ValueError("a measure with all-zero weights has no mass to transport")
    costs = cdist(x, y, metric="euclidean")
    value = _assignment_value(costs, wx, wy)
    if value is not None:
        return value
    return _min_cost_flow_value(costs, wx, wy)
