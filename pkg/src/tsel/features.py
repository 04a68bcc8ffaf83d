"""Representation-construction operators.

Three ways of turning raw per-sample vectors into selection features:
position-weighted pooling of hidden states, optimizer-preconditioned
gradient updates, and sign (+-1) random projection for compressing
high-dimensional gradients while approximately preserving angles.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Only this many projection entries are held in memory at once, so the
# projection matrix is never materialized even for inputs with millions
# of coordinates.
_BLOCK_ENTRIES = 4_000_000


def position_weighted_pool(hidden) -> np.ndarray:
    """Pool a sequence of L hidden-state vectors into one vector.

    Position i (1-based) gets weight i / (L(L+1)/2), so later positions
    dominate and the weights sum to exactly 1.
    """
    h = np.asarray(hidden, dtype=np.float64)
    if h.ndim != 2 or h.shape[0] < 1:
        raise ValueError("hidden states must be a non-empty sequence of equal-length vectors")
    if not np.all(np.isfinite(h)):
        raise ValueError("hidden states contain non-finite values")
    length = h.shape[0]
    weights = np.arange(1, length + 1, dtype=np.float64) / (length * (length + 1) / 2.0)
    return weights @ h


@dataclass(frozen=True)
class AdamState:
    """First and second moment estimates after `step` optimizer steps."""

    m: np.ndarray
    v: np.ndarray
    step: int = 0

    def __post_init__(self):
        m = np.asarray(self.m, dtype=np.float64)
        v = np.asarray(self.v, dtype=np.float64)
        if m.ndim != 1 or v.ndim != 1 or m.shape != v.shape:
            raise ValueError("moments must be 1-D vectors of equal length")
        if not (np.all(np.isfinite(m)) and np.all(np.isfinite(v))):
            raise ValueError("moments contain non-finite values")
        if np.any(v < 0):
            raise ValueError("second moment must be elementwise nonnegative")
        if self.step < 0:
            raise ValueError("step must be nonnegative")
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "v", v)

    @classmethod
    def zeros(cls, dims: int, step: int = 0) -> "AdamState":
        return cls(np.zeros(dims), np.zeros(dims), step)


@dataclass(frozen=True)
class AdamHyper:
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    def __post_init__(self):
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ValueError("beta1 and beta2 must lie in [0, 1)")
        if not self.epsilon > 0.0:
            raise ValueError("epsilon must be positive")


def adam_update(gradient, state: AdamState, hyper: AdamHyper = AdamHyper()) -> np.ndarray:
    """Bias-corrected update direction m_hat / (sqrt(v_hat) + epsilon).

    m_hat = (beta1*m + (1-beta1)*g) / (1 - beta1**(t+1)) and likewise
    for v_hat with squared gradients; epsilon is added after the square
    root. With beta1 = beta2 = 0 and zero state this reduces to the
    closed form g / (|g| + epsilon).
    """
    g = np.asarray(gradient, dtype=np.float64)
    if g.ndim != 1:
        raise ValueError("gradient must be a 1-D vector")
    if g.shape != state.m.shape:
        raise ValueError(f"dimension mismatch: gradient has {g.shape[0]} dims, state {state.m.shape[0]}")
    if not np.all(np.isfinite(g)):
        raise ValueError("gradient contains non-finite values")
    t = state.step
    m_hat = (hyper.beta1 * state.m + (1.0 - hyper.beta1) * g) / (1.0 - hyper.beta1 ** (t + 1))
    v_hat = (hyper.beta2 * state.v + (1.0 - hyper.beta2) * g * g) / (1.0 - hyper.beta2 ** (t + 1))
    return m_hat / (np.sqrt(v_hat) + hyper.epsilon)


@dataclass(frozen=True)
class ProjectionSpec:
    """Deterministic +-1 projection from in_dim down to out_dim.

    The implied projection matrix has entries in {-1, +1}, generated
    from a counter-based stream keyed by (seed, entry position), so the
    same spec always describes the same matrix and any sub-block can be
    regenerated independently.
    """

    seed: int
    in_dim: int
    out_dim: int = 8192

    def __post_init__(self):
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a nonnegative 64-bit integer")
        if self.in_dim < 1 or self.out_dim < 1:
            raise ValueError("in_dim and out_dim must both be >= 1")


def _sign_block(seed: int, first_entry: int, n_entries: int) -> np.ndarray:
    """+-1 values for entries [first_entry, first_entry + n_entries).

    Entry e is bit (e mod 64) of word (e div 64) of the Philox stream
    keyed by seed. One counter step of the generator yields four 64-bit
    words (256 entries), so blocks are aligned to counter boundaries and
    any sub-range can be regenerated in O(block) work independent of
    where it sits in the matrix.
    """
    first_counter = first_entry >> 8
    last_word = (first_entry + n_entries + 63) >> 6
    gen = np.random.Philox(key=seed)
    gen.advance(int(first_counter))
    words = gen.random_raw(int(last_word - first_counter * 4))
    bits = (words[:, None] >> np.arange(64, dtype=np.uint64)) & np.uint64(1)
    start = first_entry - (first_counter << 8)
    flat = bits.reshape(-1)[start : start + n_entries]
    return 2.0 * flat.astype(np.float64) - 1.0


def projection_entries(spec: ProjectionSpec, rows: slice) -> np.ndarray:
    """Materialize projection rows [rows.start, rows.stop) as a dense block."""
    r0, r1 = rows.start, rows.stop
    if not (0 <= r0 <= r1 <= spec.in_dim):
        raise ValueError("row slice out of range")
    block = _sign_block(spec.seed, r0 * spec.out_dim, (r1 - r0) * spec.out_dim)
    return block.reshape(r1 - r0, spec.out_dim)


def project_features(matrix, spec: ProjectionSpec) -> np.ndarray:
    """Project each row of an (n, in_dim) matrix down to out_dim.

    Fully deterministic in (matrix, spec): the projection blocks are
    regenerated in a fixed order and accumulated in float64.
    """
    x = np.asarray(matrix, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError("expected a 2-D matrix of row vectors")
    if x.shape[1] != spec.in_dim:
        raise ValueError(f"dimension mismatch: input has {x.shape[1]} dims, spec expects {spec.in_dim}")
    if not np.all(np.isfinite(x)):
        raise ValueError("input contains non-finite values")
    out = np.zeros((x.shape[0], spec.out_dim), dtype=np.float64)
    step = max(1, _BLOCK_ENTRIES // spec.out_dim)
    for r0 in range(0, spec.in_dim, step):
        r1 = min(r0 + step, spec.in_dim)
        out += x[:, r0:r1] @ projection_entries(spec, slice(r0, r1))
    return out


def rademacher_project(vector, spec: ProjectionSpec) -> np.ndarray:
    """Project a single in_dim vector down to out_dim (see project_features)."""
    v = np.asarray(vector, dtype=np.float64)
    if v.ndim != 1:
        raise ValueError("expected a 1-D vector")
    return project_features(v[None, :], spec)[0]


__all__ = [
    "AdamHyper",
    "AdamState",
    "ProjectionSpec",
    "adam_update",
    "position_weighted_pool",
    "project_features",
    "projection_entries",
    "rademacher_project",
]
