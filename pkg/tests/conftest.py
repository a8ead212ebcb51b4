"""Shared graph builders and independent oracles for the test suite."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from hetpath.graph import HetGraph, LabelSet, Relation, add_reverse_relations


def adj_from_edges(edges, shape, dtype=np.int64) -> sp.csr_array:
    """Edges as (src, dst) or (src, dst, multiplicity) tuples."""
    if isinstance(edges, np.ndarray) and edges.ndim == 2 and edges.shape == shape:
        return sp.csr_array(edges.astype(dtype))
    rows, cols, vals = [], [], []
    for e in edges:
        if len(e) == 2:
            (s, d), w = e, 1
        else:
            s, d, w = e
        rows.append(s)
        cols.append(d)
        vals.append(w)
    if not rows:
        return sp.csr_array(shape, dtype=dtype)
    return sp.csr_array(
        (np.array(vals, dtype=dtype), (np.array(rows), np.array(cols))), shape=shape
    )


def build_graph(counts, rels, target, features=None, labels=None, num_classes=2):
    """Assemble a HetGraph; reverse relations are filled in automatically.

    rels: list of (name, src, dst, edges) with edges per adj_from_edges.
    labels: optional int array over target nodes (-1 = unlabeled).
    """
    relations = []
    for name, src, dst, edges in rels:
        adj = adj_from_edges(edges, (counts[src], counts[dst]))
        relations.append(Relation(name, src, dst, adj))
    label_set = None
    if labels is not None:
        labels = np.asarray(labels, dtype=np.int64)
        label_set = LabelSet(labels, labels >= 0, num_classes)
    return HetGraph(
        counts,
        add_reverse_relations(relations),
        features or {},
        target,
        label_set,
    )


def random_hin(rng, n_target=12, n_a=8, n_s=5, density=0.35, min_degree=0):
    """A random 3-type graph with relations P-A and P-S.

    With min_degree=1 every node on both sides of each relation gets at
    least one edge (a random matching backbone plus random extras).
    """
    counts = {"P": n_target, "A": n_a, "S": n_s}
    rels = []
    for name, dst, n_dst in (("P-A", "A", n_a), ("P-S", "S", n_s)):
        dense = (rng.random((n_target, n_dst)) < density).astype(np.int64)
        if min_degree:
            for i in range(n_target):
                dense[i, rng.integers(n_dst)] = 1
            for j in range(n_dst):
                dense[rng.integers(n_target), j] = 1
        rels.append((name, "P", dst, dense))
    features = {"P": rng.standard_normal((n_target, 6))}
    labels = rng.integers(0, 2, n_target)
    return build_graph(counts, rels, "P", features, labels)


def walk_neighbors(g: HetGraph, relation_chain, start) -> set[int]:
    """Brute-force meta-path neighbors by enumerating every walk."""
    frontier = {start}
    for name in relation_chain:
        adj = g.relations[name].adj
        nxt = set()
        for v in frontier:
            lo, hi = adj.indptr[v], adj.indptr[v + 1]
            nxt.update(adj.indices[lo:hi].tolist())
        frontier = nxt
        if not frontier:
            break
    return frontier


def topk_oracle(cols, scores, row_index, budget) -> list[int]:
    """Independent full-sort selection: keep the self column when present,
    then the highest scores with ties broken by ascending column."""
    pairs = list(zip(cols, scores))
    if len(pairs) <= budget:
        return sorted(c for c, _ in pairs)
    chosen = []
    rest = []
    for c, s in pairs:
        if c == row_index:
            chosen.append(c)
        else:
            rest.append((c, s))
    rest.sort(key=lambda cs: (-cs[1], cs[0]))
    chosen.extend(c for c, _ in rest[: budget - len(chosen)])
    return sorted(chosen)


def dense_sym_normalize(a: np.ndarray) -> np.ndarray:
    """Dense oracle for D^{-1/2} (A + I) D^{-1/2}."""
    a_hat = a.astype(np.float64) + np.eye(a.shape[0])
    d = a_hat.sum(axis=1)
    inv = np.diag(1.0 / np.sqrt(d))
    return inv @ a_hat @ inv


MOVIE_DIRECTOR_GROUPS = [20, 2, 1, 1, 1]  # sum of squares = 407
MOVIE_ACTOR_GROUPS = [44, 7, 3, 1]  # sum of squares = 1995


def movie_graph():
    """Movie/director/actor graph with disjoint group memberships.

    Composed boolean adjacencies are unions of cliques, so a group of size
    s contributes s^2 connections: the MAM/MDM degree-sum ratio is exactly
    1995:407 and every node's composed degree equals its group size.
    """
    md, ma = [], []
    start = 0
    for d, size in enumerate(MOVIE_DIRECTOR_GROUPS):
        md.extend((m, d) for m in range(start, start + size))
        start += size
    start = 0
    for a, size in enumerate(MOVIE_ACTOR_GROUPS):
        ma.extend((m, a) for m in range(start, start + size))
        start += size
    return build_graph(
        {"M": 55, "D": len(MOVIE_DIRECTOR_GROUPS), "A": len(MOVIE_ACTOR_GROUPS)},
        [("M-D", "M", "D", md), ("M-A", "M", "A", ma)],
        "M",
    )
