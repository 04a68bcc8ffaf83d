"""Analysis protocols over selections: distance quantiles, rank
correlation, and subset-overlap statistics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .selection import SelectionResult, select_round_robin
from .transport import exact_w1
from .similarity import as_feature_matrix


@dataclass(frozen=True)
class QuantileAssignment:
    """Contiguous blocks of a full greedy ordering, closest block first.

    Block sizes differ by at most one; earlier blocks absorb any
    remainder so the closest blocks are never the smaller ones.
    """

    blocks: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        sizes = [len(b) for b in self.blocks]
        if not sizes or min(sizes) < 1:
            raise ValueError("every quantile must hold at least one candidate")
        if max(sizes) - min(sizes) > 1:
            raise ValueError("quantile sizes may differ by at most one")
        flat = [i for b in self.blocks for i in b]
        if len(set(flat)) != len(flat):
            raise ValueError("quantiles must partition the ordering without repeats")

    @property
    def n_quantiles(self) -> int:
        return len(self.blocks)

    def ordering(self) -> tuple[int, ...]:
        """Concatenation of all blocks: the original full ordering."""
        return tuple(i for b in self.blocks for i in b)

    def take(self, count: int) -> tuple[tuple[int, ...], ...]:
        """First min(count, block size) entries of each block, in block order."""
        if count < 1:
            raise ValueError("count must be >= 1")
        return tuple(b[: min(count, len(b))] for b in self.blocks)


def _split_contiguous(ordering: tuple[int, ...], n_blocks: int) -> QuantileAssignment:
    total = len(ordering)
    if n_blocks < 1:
        raise ValueError("need at least one quantile")
    if n_blocks > total:
        raise ValueError(f"cannot form {n_blocks} quantiles from {total} candidates")
    base, rem = divmod(total, n_blocks)
    blocks = []
    start = 0
    for b in range(n_blocks):
        size = base + (1 if b < rem else 0)
        blocks.append(tuple(ordering[start : start + size]))
        start += size
    return QuantileAssignment(tuple(blocks))


def stratify_quantiles(similarities, n_quantiles: int = 10) -> QuantileAssignment:
    """Order all candidates by greedy round-robin, then cut into quantiles.

    Quantile 1 holds the earliest (closest) picks. Running the greedy
    ordering to exhaustion makes the stratification well defined for
    every candidate, not only the ones a budgeted run would touch.
    """
    s = np.asarray(similarities, dtype=np.float64)
    if s.ndim != 2:
        raise ValueError("similarity matrix must be 2-D")
    full = select_round_robin(s, s.shape[1])
    return _split_contiguous(full.indices, n_quantiles)


def sub_stratify(assignment: QuantileAssignment, which: int, n_sub: int) -> QuantileAssignment:
    """Re-split one quantile (1-based index) into n_sub finer quantiles."""
    if not 1 <= which <= assignment.n_quantiles:
        raise ValueError(f"quantile index {which} out of range 1..{assignment.n_quantiles}")
    return _split_contiguous(assignment.blocks[which - 1], n_sub)


def spearman(xs, ys) -> float:
    """Spearman rank correlation with mean ranks on ties.

    A constant sequence has no rank ordering, so the correlation is
    undefined and rejected rather than silently reported as zero.
    """
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if x.ndim != 1 or y.ndim != 1 or x.shape != y.shape:
        raise ValueError("inputs must be 1-D sequences of equal length")
    if x.shape[0] < 2:
        raise ValueError("need at least two observations")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValueError("inputs contain non-finite values")
    if np.all(x == x[0]) or np.all(y == y[0]):
        raise ValueError("rank correlation is undefined for a constant sequence")
    rx = rankdata(x, method="average")
    ry = rankdata(y, method="average")
    return float(np.corrcoef(rx, ry)[0, 1])


def jaccard(a, b) -> float:
    """|a & b| / |a | b| over index sets; two empty sets count as identical."""
    sa, sb = set(a), set(b)
    union = sa | sb
    if not union:
        return 1.0
    return len(sa & sb) / len(union)


def subset_query_w1(selection, pool, queries) -> float:
    """Exact transport distance between a selected subset and the query set.

    Both sides are uniform over their rows; selection may be a
    SelectionResult or a plain index sequence.
    """
    indices = selection.indices if isinstance(selection, SelectionResult) else tuple(selection)
    pool = as_feature_matrix(pool, "pool")
    if len(indices) < 1:
        raise ValueError("selection is empty")
    idx = np.asarray(indices, dtype=np.intp)
    if idx.min() < 0 or idx.max() >= pool.shape[0]:
        raise ValueError("selection indices fall outside the pool")
    return exact_w1(pool[idx], queries)
