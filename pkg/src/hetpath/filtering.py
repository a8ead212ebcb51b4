"""Neighbor filtering for large paths: transit probability x feature similarity.

A random walk along the path visits neighbors with probability given by the
product of row-normalized relation adjacencies. Each reachable neighbor is
scored by that probability times the cosine similarity of raw input
features (plus a small epsilon so zero-similarity neighbors with positive
probability still rank above unreachable ones), and only the top-scoring T
neighbors per node are kept.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .graph import GraphError, HetGraph, MetaPath, check_metapath

DEFAULT_EPSILON = 1e-8


@dataclass(frozen=True)
class TransitMatrix:
    """Row-stochastic walk probabilities along one meta-path."""

    path: MetaPath
    probs: sp.csr_array


@dataclass(frozen=True)
class ImportanceScores:
    """Per-edge ranking key on the transit sparsity pattern."""

    path: MetaPath
    scores: sp.csr_array
    epsilon: float


@dataclass(frozen=True)
class FilteredAdjacency:
    """Reconstructed 0/1 connectivity keeping at most `budget` neighbors per row."""

    path: MetaPath
    budget: int
    adj: sp.csr_array


def relation_transit(g: HetGraph, relation: str) -> sp.csr_array:
    """Row-normalize a relation adjacency; zero-degree rows stay all-zero."""
    adj = g.relation(relation).adj
    degrees = np.asarray(adj.sum(axis=1)).ravel().astype(np.float64)
    out = sp.csr_array(adj, dtype=np.float64, copy=True)
    counts = np.diff(out.indptr)
    scale = np.ones_like(degrees)
    nonzero = degrees > 0
    scale[nonzero] = 1.0 / degrees[nonzero]
    out.data *= np.repeat(scale, counts)
    return out


def metapath_transit(g: HetGraph, path: MetaPath) -> TransitMatrix:
    """Chained product of relation transit matrices in path order."""
    check_metapath(g, path)
    probs = relation_transit(g, path.relations[0])
    for name in path.relations[1:]:
        probs = probs @ relation_transit(g, name)
    probs = sp.csr_array(probs)
    probs.sum_duplicates()
    probs.sort_indices()
    probs.eliminate_zeros()
    return TransitMatrix(path, probs)


def normalize_features(h: np.ndarray) -> np.ndarray:
    """Scale each row to unit L2 norm; all-zero rows stay all-zero."""
    h = np.asarray(h, dtype=np.float64)
    norms = np.linalg.norm(h, axis=1, keepdims=True)
    safe = np.where(norms > 0, norms, 1.0)
    return h / safe


def importance_scores(
    transit: TransitMatrix, h_norm: np.ndarray, epsilon: float = DEFAULT_EPSILON
) -> ImportanceScores:
    """Score each reachable (v, u) as prob * (cosine(h_v, h_u) + epsilon).

    Similarity is evaluated only on the transit sparsity pattern; no dense
    target x target matrix is ever formed.
    """
    if epsilon <= 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    probs = transit.probs
    n = probs.shape[0]
    if h_norm.shape[0] != n:
        raise GraphError(
            f"feature rows ({h_norm.shape[0]}) != target count ({n})"
        )
    rows = np.repeat(np.arange(n), np.diff(probs.indptr))
    cols = probs.indices
    sims = np.einsum("ij,ij->i", h_norm[rows], h_norm[cols])
    scores = probs.copy()
    scores.data = probs.data * (sims + epsilon)
    return ImportanceScores(transit.path, scores, epsilon)


def select_top(scores: ImportanceScores, budget: int) -> FilteredAdjacency:
    """Keep the `budget` best-scoring neighbors per row.

    Ordering is by descending score with ties broken by ascending column
    index; the self column, when present in the pattern, is always retained
    and counts toward the budget. Rows with no more than `budget` candidates
    are kept whole.
    """
    if budget < 1:
        raise ValueError(f"budget must be >= 1, got {budget}")
    mat = scores.scores
    n_rows, n_cols = mat.shape
    keep_rows: list[np.ndarray] = []
    keep_cols: list[np.ndarray] = []
    for v in range(n_rows):
        lo, hi = mat.indptr[v], mat.indptr[v + 1]
        cols = mat.indices[lo:hi]
        if cols.size <= budget:
            chosen = cols
        else:
            vals = mat.data[lo:hi].copy()
            vals[cols == v] = np.inf  # self-retention
            order = np.lexsort((cols, -vals))
            chosen = np.sort(cols[order[:budget]])
        keep_cols.append(chosen)
        keep_rows.append(np.full(chosen.size, v, dtype=np.int64))
    rows = np.concatenate(keep_rows) if keep_rows else np.empty(0, dtype=np.int64)
    cols = np.concatenate(keep_cols) if keep_cols else np.empty(0, dtype=np.int64)
    adj = sp.csr_array(
        (np.ones(rows.size, dtype=np.int64), (rows, cols)), shape=(n_rows, n_cols)
    )
    adj.sort_indices()
    return FilteredAdjacency(scores.path, budget, adj)


def filter_large_path(
    g: HetGraph,
    path: MetaPath,
    budget: int,
    epsilon: float = DEFAULT_EPSILON,
) -> FilteredAdjacency:
    """Full filtering pipeline for one large path."""
    transit = metapath_transit(g, path)
    h_norm = normalize_features(g.features[g.target_type])
    scores = importance_scores(transit, h_norm, epsilon)
    return select_top(scores, budget)
