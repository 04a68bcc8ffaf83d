"""Similarity and cost matrices over dense feature rows.

Inputs may be stored in float32 (the on-disk format) but every
reduction here runs in float64, so results do not depend on storage
precision. Cosine values are clamped to [-1, 1] after computation; a
violation larger than the clamp slack is treated as a caller bug
because downstream cost matrices must stay nonnegative.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial.distance import cdist

from . import io

CLAMP_SLACK = 1e-9
WEIGHT_TOL = 1e-9


def as_feature_matrix(x, name: str = "matrix") -> np.ndarray:
    """Validate a 2-D array of finite reals and return it as float64."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"{name} must have at least one row and one column, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def _unit_rows(x: np.ndarray, name: str) -> np.ndarray:
    norms = np.linalg.norm(x, axis=1)
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        raise ValueError(f"{name} row {int(zero[0])} has zero norm and no direction")
    return x / norms[:, None]


def _clamp_unit(values: np.ndarray, what: str) -> np.ndarray:
    worst = float(np.max(np.abs(values))) if values.size else 0.0
    if worst > 1.0 + CLAMP_SLACK:
        raise ValueError(f"{what} outside [-1, 1] by {worst - 1.0:.3e} (beyond {CLAMP_SLACK} slack)")
    return np.clip(values, -1.0, 1.0)


def cosine_similarity(a, b) -> float:
    """Cosine of the angle between two vectors, in [-1, 1].

    Zero-norm vectors are rejected: they have no direction, and mapping
    them to similarity 0 would silently corrupt greedy orderings.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 1 or b.ndim != 1:
        raise ValueError("cosine_similarity expects 1-D vectors")
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape[0]} vs {b.shape[0]}")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise ValueError("vectors contain non-finite values")
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        raise ValueError("zero-norm vector has no direction")
    value = float(a @ b) / (na * nb)
    return float(_clamp_unit(np.asarray(value), "cosine similarity"))


def pairwise_cosine(queries, candidates) -> np.ndarray:
    """Cosine similarity matrix, entry (j, i) = cos(query j, candidate i)."""
    q = as_feature_matrix(queries, "queries")
    c = as_feature_matrix(candidates, "candidates")
    if q.shape[1] != c.shape[1]:
        raise ValueError(f"dimension mismatch: queries have {q.shape[1]} dims, candidates {c.shape[1]}")
    sims = _unit_rows(q, "queries") @ _unit_rows(c, "candidates").T
    return _clamp_unit(sims, "pairwise cosine similarities")


def pairwise_l2(queries, candidates) -> np.ndarray:
    """Euclidean distance matrix, entry (j, i) = ||query j - candidate i||."""
    q = as_feature_matrix(queries, "queries")
    c = as_feature_matrix(candidates, "candidates")
    if q.shape[1] != c.shape[1]:
        raise ValueError(f"dimension mismatch: queries have {q.shape[1]} dims, candidates {c.shape[1]}")
    return cdist(q, c, metric="euclidean")


def similarity_to_cost(similarities, normalize_half: bool = False) -> np.ndarray:
    """Turn cosine similarities into nonnegative costs.

    Without the flag the cost is 1 - s, spanning [0, 2]. With the flag
    the cost is (1 - s) / 2, spanning [0, 1], the range transport
    solvers here expect.
    """
    s = np.asarray(similarities, dtype=np.float64)
    if not np.all(np.isfinite(s)):
        raise ValueError("similarities contain non-finite values")
    s = _clamp_unit(s, "similarities")
    cost = 1.0 - s
    if normalize_half:
        cost = cost / 2.0
    return cost


@dataclass(frozen=True)
class CheckpointFeatureStore:
    """Per-checkpoint feature matrices with normalized averaging weights.

    All checkpoints describe the same samples, so every matrix must
    share its shape; weights are nonnegative and sum to one.
    """

    checkpoints: tuple[np.ndarray, ...]
    weights: np.ndarray

    def __post_init__(self):
        if len(self.checkpoints) < 1:
            raise ValueError("a checkpoint store needs at least one checkpoint")
        mats = tuple(as_feature_matrix(m, f"checkpoint {t}") for t, m in enumerate(self.checkpoints))
        shape = mats[0].shape
        for t, m in enumerate(mats):
            if m.shape != shape:
                raise ValueError(
                    f"checkpoint {t} has shape {m.shape}, expected {shape} shared by all checkpoints"
                )
        w = np.asarray(self.weights, dtype=np.float64)
        if w.ndim != 1 or w.shape[0] != len(mats):
            raise ValueError("need exactly one weight per checkpoint")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite and nonnegative")
        if abs(float(w.sum()) - 1.0) > WEIGHT_TOL:
            raise ValueError(f"weights must sum to 1 within {WEIGHT_TOL}, got {float(w.sum())!r}")
        object.__setattr__(self, "checkpoints", mats)
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_learning_rates(cls, checkpoints, learning_rates) -> "CheckpointFeatureStore":
        """Build a store from raw per-checkpoint learning rates.

        Rates are normalized by dividing each by their sum.
        """
        lrs = np.asarray(learning_rates, dtype=np.float64)
        if lrs.ndim != 1 or lrs.shape[0] != len(checkpoints):
            raise ValueError("need exactly one learning rate per checkpoint")
        if np.any(lrs < 0) or not np.all(np.isfinite(lrs)):
            raise ValueError("learning rates must be finite and nonnegative")
        total = float(lrs.sum())
        if total <= 0.0:
            raise ValueError("learning rates must not all be zero")
        return cls(tuple(checkpoints), lrs / total)

    @property
    def n_checkpoints(self) -> int:
        return len(self.checkpoints)

    @property
    def rows(self) -> int:
        return self.checkpoints[0].shape[0]

    @property
    def dims(self) -> int:
        return self.checkpoints[0].shape[1]


def weighted_checkpoint_similarity(
    query_store: CheckpointFeatureStore, candidate_store: CheckpointFeatureStore
) -> np.ndarray:
    """Weight-averaged cosine similarity across matching checkpoints.

    Entry (j, i) is sum_t w_t * cos(query_t[j], candidate_t[i]). With a
    single checkpoint of weight 1 this equals pairwise_cosine exactly.
    """
    if query_store.n_checkpoints != candidate_store.n_checkpoints:
        raise ValueError(
            f"checkpoint count mismatch: {query_store.n_checkpoints} vs {candidate_store.n_checkpoints}"
        )
    if query_store.dims != candidate_store.dims:
        raise ValueError(f"dimension mismatch: {query_store.dims} vs {candidate_store.dims}")
    total = None
    for w, q, c in zip(query_store.weights, query_store.checkpoints, candidate_store.checkpoints):
        term = w * pairwise_cosine(q, c)
        total = term if total is None else total + term
    return total


def concat_scaled_features(store: CheckpointFeatureStore) -> np.ndarray:
    """Weight-scale each checkpoint, concatenate along dims, L2-normalize rows.

    This is the flattened single-matrix view of a checkpoint store used
    when downstream code wants plain Euclidean distances instead of the
    weighted per-checkpoint cosine.
    """
    stacked = np.concatenate([w * m for w, m in zip(store.weights, store.checkpoints)], axis=1)
    return _unit_rows(stacked, "concatenated features")


def load_checkpoint_store(manifest_path: str | Path) -> CheckpointFeatureStore:
    """Load a checkpoint store from a JSON manifest.

    Manifest schema: {"checkpoints": [{"path": "...", "lr": 0.001}, ...]}.
    Relative paths resolve against the manifest's directory; the lr
    values are normalized by their sum.
    """
    manifest_path = Path(manifest_path)
    with open(manifest_path, "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    entries = manifest.get("checkpoints")
    if not isinstance(entries, list) or not entries:
        raise ValueError(f"{manifest_path}: manifest needs a non-empty 'checkpoints' list")
    mats = []
    lrs = []
    for k, entry in enumerate(entries):
        try:
            rel = entry["path"]
            lr = float(entry["lr"])
        except (TypeError, KeyError) as exc:
            raise ValueError(f"{manifest_path}: checkpoint {k} needs 'path' and 'lr' fields") from exc
        p = Path(rel)
        if not p.is_absolute():
            p = manifest_path.parent / p
        mats.append(io.load_features(p))
        lrs.append(lr)
    return CheckpointFeatureStore.from_learning_rates(mats, lrs)
