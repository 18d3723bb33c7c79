"""Exact nearest-neighbor scoring on cosine distance.

The decision rule: a query is fake when its k-nearest fake neighbors sit
closer (on average) than its k-nearest real neighbors. score_fake is the
margin d_real_k - d_fake_k, so positive means fake and ties go to real.

No index structures; every query is compared against every bank entry.
All distance math runs in float64 on the precomputed unit vectors.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .bank import FeatureBank
from .errors import (
    DimensionMismatch,
    EmptyInput,
    EmptyLabelSide,
    KTooLarge,
    NonFiniteValue,
    ZeroNormVector,
)
from .labels import Label

# exhaustive-pass accounting: query-vs-entry pairs compared so far.
# knn_batch adds exactly n_queries * len(bank) regardless of k.
_distance_evals = 0


def distance_eval_count() -> int:
    return _distance_evals


def reset_distance_eval_count() -> None:
    global _distance_evals
    _distance_evals = 0


def cosine_distance(a, b) -> float:
    """1 - cos(a, b), clipped to the mathematical range [0, 2]."""
    x = np.asarray(a, dtype=np.float64).reshape(-1)
    y = np.asarray(b, dtype=np.float64).reshape(-1)
    if x.shape != y.shape:
        raise DimensionMismatch(f"shapes {x.shape} and {y.shape} differ")
    nx = np.linalg.norm(x)
    ny = np.linalg.norm(y)
    if nx < 1e-12 or ny < 1e-12:
        raise ZeroNormVector("cosine distance undefined for zero-norm vectors")
    d = 1.0 - float(np.dot(x, y)) / (nx * ny)
    return min(2.0, max(0.0, d))


@dataclass(frozen=True)
class ScoredPrediction:
    """kNN verdict for one query."""

    score_fake: float
    decision: Label
    d_real_k: float
    d_fake_k: float
    k: int


def _as_query_matrix(queries, dim: int) -> np.ndarray:
    q = np.asarray(queries, dtype=np.float64)
    if q.ndim == 1:
        q = q[None, :]
    if q.ndim != 2 or q.shape[1] != dim:
        raise DimensionMismatch(f"queries shaped {q.shape}, bank dim is {dim}")
    if q.shape[0] == 0:
        raise EmptyInput("no queries")
    finite_rows = np.isfinite(q).all(axis=1)
    if not finite_rows.all():
        raise NonFiniteValue(f"query {int(np.flatnonzero(~finite_rows)[0])} contains NaN or infinity")
    norms = np.linalg.norm(q, axis=1)
    bad = np.flatnonzero(norms < 1e-12)
    if bad.size:
        raise ZeroNormVector(f"query {int(bad[0])} has zero norm")
    return q / norms[:, None]


def _side_distances(q_unit: np.ndarray, side_unit: np.ndarray) -> np.ndarray:
    # (Q, N_side) cosine distances; unit vectors on both ends, so 1 - dot
    d = 1.0 - q_unit @ side_unit.T
    return np.clip(d, 0.0, 2.0)


def _k_mean(dists: np.ndarray, k: int) -> np.ndarray:
    # mean of the k smallest per row; sort the k values first so the result
    # is bit-identical under any permutation of the bank
    part = np.partition(dists, k - 1, axis=1)[:, :k]
    part.sort(axis=1)
    return part.mean(axis=1)


# cap on the number of query-entry distances materialized at once; keeps the
# distance block around 64 MB however large the bank is
_CHUNK_CELLS = 8_000_000


def _k_means_chunked(q_unit: np.ndarray, side_unit: np.ndarray, k: int) -> np.ndarray:
    rows = max(1, _CHUNK_CELLS // max(1, side_unit.shape[0]))
    parts = [
        _k_mean(_side_distances(q_unit[i:i + rows], side_unit), k)
        for i in range(0, q_unit.shape[0], rows)
    ]
    return np.concatenate(parts)


def knn_batch(queries, bank: FeatureBank, k: int = 1) -> list[ScoredPrediction]:
    """Score a (Q, dim) batch against the bank. Exact, no approximation."""
    global _distance_evals
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    q_unit = _as_query_matrix(queries, bank.dim)
    sides = {}
    for label in (Label.REAL, Label.FAKE):
        idx = bank.label_indices(label)
        if idx.size == 0:
            raise EmptyLabelSide(f"bank has no {label.name.lower()} entries")
        if k > idx.size:
            raise KTooLarge(f"k={k} but only {idx.size} {label.name.lower()} entries")
        sides[label] = bank.unit_vectors[idx].astype(np.float64)

    d_real = _k_means_chunked(q_unit, sides[Label.REAL], k)
    d_fake = _k_means_chunked(q_unit, sides[Label.FAKE], k)
    _distance_evals += q_unit.shape[0] * len(bank)

    out = []
    for dr, df in zip(d_real, d_fake):
        score = float(dr) - float(df)
        out.append(
            ScoredPrediction(
                score_fake=score,
                decision=Label.FAKE if score > 0.0 else Label.REAL,
                d_real_k=float(dr),
                d_fake_k=float(df),
                k=k,
            )
        )
    return out


def knn_score(query, bank: FeatureBank, k: int = 1) -> ScoredPrediction:
    """Single-query convenience wrapper around knn_batch."""
    return knn_batch(np.asarray(query, dtype=np.float64).reshape(1, -1), bank, k)[0]


def rank_by_distance(
    queries,
    side: Label,
    bank: FeatureBank,
    *,
    direction: str = "closest",
    top_m: int = 10,
) -> list[tuple[int, float]]:
    """Rank queries by their single nearest-neighbor distance to one bank side.

    Each query gets the min cosine distance to the entries labeled `side`;
    the top_m queries come back as (query_index, distance), ascending for
    "closest", descending for "farthest". Ties break on the lower query index.
    """
    global _distance_evals
    if direction not in ("closest", "farthest"):
        raise ValueError(f"direction must be closest|farthest, got {direction!r}")
    q_unit = _as_query_matrix(queries, bank.dim)
    n_q = q_unit.shape[0]
    if not 1 <= top_m <= n_q:
        raise ValueError(f"top_m must be in 1..{n_q}, got {top_m}")
    idx = bank.label_indices(side)
    if idx.size == 0:
        raise EmptyLabelSide(f"bank has no {side.name.lower()} entries")
    nn = _side_distances(q_unit, bank.unit_vectors[idx].astype(np.float64)).min(axis=1)
    _distance_evals += n_q * idx.size
    key = nn if direction == "closest" else -nn
    order = np.lexsort((np.arange(n_q), key))
    return [(int(i), float(nn[i])) for i in order[:top_m]]
