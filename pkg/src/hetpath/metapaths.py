"""Meta-path composition and large/small path discrimination.

A meta-path's adjacency is the chained sparse product of its relation
adjacencies. Discrimination works on boolean connectivity: a path's degree
sum counts distinct reachable neighbors (self-walks included), and paths are
split by the percentage excess of that sum over the minimum path's sum.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
import scipy.sparse as sp

from .graph import GraphError, HetGraph, MetaPath, check_metapath


@dataclass(frozen=True)
class MetaPathGraph:
    """Composed adjacency of one meta-path over the target type.

    count_adj holds path-instance counts, bool_adj the 0/1 connectivity,
    and degree_sum the total number of (node, neighbor) connections in
    bool_adj. Self-loops arising from round-trip walks are kept.
    """

    path: MetaPath
    count_adj: sp.csr_array
    bool_adj: sp.csr_array
    degree_sum: int


@dataclass(frozen=True)
class PathPartition:
    """The large/small split at threshold tau (a percentage)."""

    tau: float
    r_values: dict[MetaPath, float]
    large_paths: tuple[MetaPath, ...]
    small_paths: tuple[MetaPath, ...]

    def is_large(self, path: MetaPath) -> bool:
        return path in self.large_paths


def compose_metapath(g: HetGraph, path: MetaPath) -> MetaPathGraph:
    """Multiply the relation adjacencies along the path.

    Intermediate products stay sparse; rows with no neighbors are allowed.
    """
    check_metapath(g, path)
    product = g.relation(path.relations[0]).adj
    for name in path.relations[1:]:
        product = product @ g.relation(name).adj
    count = sp.csr_array(product)
    count.sum_duplicates()
    count.sort_indices()
    count.eliminate_zeros()
    bool_adj = count.copy()
    bool_adj.data = np.ones_like(bool_adj.data)
    return MetaPathGraph(path, count, bool_adj, int(bool_adj.nnz))


def degree_sums(graphs: Sequence[MetaPathGraph]) -> dict[MetaPath, int]:
    """Total boolean degree per path."""
    if not graphs:
        raise GraphError("degree_sums: empty meta-path list")
    return {mg.path: mg.degree_sum for mg in graphs}


def relative_differences(sums: Mapping) -> dict:
    """Percentage excess of each degree value over the minimum one.

    Accepts any mapping key -> degree value; the minimum entry maps to
    exactly 0.0. Raises when the minimum is zero (the excess is undefined).
    """
    if not sums:
        raise GraphError("relative_differences: no degree values")
    d_min = min(sums.values())
    if d_min == 0:
        raise GraphError("minimum-degree path has no edges")
    return {k: (d - d_min) / d_min * 100.0 for k, d in sums.items()}


def discriminate(graphs: Sequence[MetaPathGraph], tau: float) -> PathPartition:
    """Split paths into large (R >= tau) and small (R < tau).

    R depends only on boolean connectivity, never on instance counts. Ties
    at exactly tau go to the large side.
    """
    r_values = relative_differences(degree_sums(graphs))
    large = tuple(mg.path for mg in graphs if r_values[mg.path] >= tau)
    small = tuple(mg.path for mg in graphs if r_values[mg.path] < tau)
    return PathPartition(tau, r_values, large, small)
