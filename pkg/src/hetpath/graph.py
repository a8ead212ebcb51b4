"""Typed heterogeneous graph with sparse relation adjacencies.

Node identity is per-type and 0-based: a node is (type code, index) and
cross-type global ids never appear. Relations are directed and stored as
CSR matrices of integer edge multiplicities; every relation is expected to
have a reverse counterpart whose adjacency is the transpose.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp


class GraphError(ValueError):
    """Malformed graph data (bad shapes, unknown ids, broken invariants)."""


class MetaPathError(GraphError):
    """A meta-path is not type-compatible with the graph."""


def reverse_name(name: str) -> str:
    """Name of the reverse relation: 'P-A' <-> 'A-P'."""
    src, _, dst = name.partition("-")
    return f"{dst}-{src}"


def _canonical_csr(adj: sp.csr_array | sp.csr_matrix) -> sp.csr_array:
    out = sp.csr_array(adj)
    out.sum_duplicates()
    out.sort_indices()
    return out


@dataclass(frozen=True)
class Relation:
    """A directed typed edge set with an integer-multiplicity adjacency."""

    name: str
    src: str
    dst: str
    adj: sp.csr_array

    def __post_init__(self):
        object.__setattr__(self, "adj", _canonical_csr(self.adj))


@dataclass(frozen=True)
class MetaPath:
    """An ordered chain of relations starting and ending at the target type."""

    name: str
    relations: tuple[str, ...]

    def __len__(self) -> int:
        return len(self.relations)


@dataclass(frozen=True)
class LabelSet:
    """Partial class labels over target-type nodes.

    ``labels[i]`` is the class id of node i where ``mask[i]`` is True and is
    -1 elsewhere. Partial labeling supports semi-supervised splits.
    """

    labels: np.ndarray
    mask: np.ndarray
    num_classes: int

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64).copy()
        mask = np.asarray(self.mask, dtype=bool).copy()
        labels[~mask] = -1
        labels.setflags(write=False)
        mask.setflags(write=False)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "mask", mask)

    @property
    def labeled_indices(self) -> np.ndarray:
        return np.flatnonzero(self.mask)


@dataclass(frozen=True)
class HetGraph:
    """Immutable heterogeneous graph: typed nodes, features, relations, labels.

    ``node_counts`` and ``relations`` preserve insertion order; a type's or
    relation's dense index is its position in that order.
    """

    node_counts: Mapping[str, int]
    relations: Mapping[str, Relation]
    features: Mapping[str, np.ndarray]
    target_type: str
    labels: LabelSet | None = None

    def __post_init__(self):
        feats = {}
        for t, x in self.features.items():
            arr = np.asarray(x)
            if arr.dtype not in (np.float32, np.float64):
                arr = arr.astype(np.float64)
            arr = arr.copy()
            arr.setflags(write=False)
            feats[t] = arr
        object.__setattr__(self, "node_counts", dict(self.node_counts))
        object.__setattr__(self, "relations", dict(self.relations))
        object.__setattr__(self, "features", feats)

    @property
    def node_type_ids(self) -> dict[str, int]:
        return {t: i for i, t in enumerate(self.node_counts)}

    @property
    def relation_ids(self) -> dict[str, int]:
        return {r: i for i, r in enumerate(self.relations)}

    @property
    def target_count(self) -> int:
        return self.node_counts[self.target_type]

    def relation(self, name: str) -> Relation:
        try:
            return self.relations[name]
        except KeyError:
            raise GraphError(f"unknown relation {name!r}") from None


def add_reverse_relations(relations: Iterable[Relation]) -> dict[str, Relation]:
    """Fill in missing reverse relations as transposes of the given ones."""
    out: dict[str, Relation] = {r.name: r for r in relations}
    for r in list(out.values()):
        rev = reverse_name(r.name)
        if rev not in out:
            out[rev] = Relation(rev, r.dst, r.src, _canonical_csr(r.adj.T))
    return out


def validate_graph(g: HetGraph) -> list[str]:
    """Check every structural invariant; returns one message per violation.

    Violations are data, not exceptions: an empty list means the graph is
    well-formed. Idempotent and side-effect free.
    """
    violations: list[str] = []

    if g.target_type not in g.node_counts:
        violations.append(f"target type {g.target_type!r} is not a node type")

    if len(g.node_counts) + len(g.relations) <= 2:
        violations.append(
            "graph is not heterogeneous: "
            f"{len(g.node_counts)} node types + {len(g.relations)} relations <= 2"
        )

    for t, x in g.features.items():
        if t not in g.node_counts:
            violations.append(f"features given for unknown node type {t!r}")
        elif x.shape[0] != g.node_counts[t]:
            violations.append(
                f"feature matrix for {t!r} has {x.shape[0]} rows, expected "
                f"{g.node_counts[t]}"
            )

    for name, rel in g.relations.items():
        if name != rel.name:
            violations.append(f"relation {name!r} stored under mismatched key")
        for side, t in (("src", rel.src), ("dst", rel.dst)):
            if t not in g.node_counts:
                violations.append(f"relation {name!r} {side} type {t!r} unknown")
        expected = (g.node_counts.get(rel.src), g.node_counts.get(rel.dst))
        if None not in expected and rel.adj.shape != expected:
            violations.append(
                f"relation {name!r} adjacency shape {rel.adj.shape} != {expected}"
            )
        if rel.adj.nnz and not np.issubdtype(rel.adj.dtype, np.integer):
            violations.append(f"relation {name!r} adjacency is not integer-valued")
        elif rel.adj.nnz and rel.adj.data.min() < 0:
            violations.append(f"relation {name!r} has negative edge multiplicities")

        rev = reverse_name(name)
        if rev not in g.relations:
            violations.append(f"relation {name!r} has no reverse relation {rev!r}")
        else:
            rev_adj = g.relations[rev].adj
            if rev_adj.shape != rel.adj.shape[::-1] or (rev_adj - rel.adj.T).nnz != 0:
                violations.append(
                    f"relation {rev!r} is not the transpose of {name!r}"
                )

    if g.labels is not None:
        lab = g.labels
        n = g.node_counts.get(g.target_type, 0)
        if lab.labels.shape != (n,) or lab.mask.shape != (n,):
            violations.append(
                f"label arrays have shape {lab.labels.shape}, expected ({n},)"
            )
        if lab.num_classes < 2:
            violations.append(f"num_classes = {lab.num_classes}, expected >= 2")
        masked = lab.labels[lab.mask] if lab.labels.shape == lab.mask.shape else []
        if len(masked) and (masked.min() < 0 or masked.max() >= lab.num_classes):
            violations.append("labeled class ids fall outside [0, num_classes)")

    return violations


def relation_degrees(g: HetGraph, relation: str) -> np.ndarray:
    """Out-degree (row sum, counting multiplicity) per source node."""
    rel = g.relation(relation)
    return np.asarray(rel.adj.sum(axis=1)).ravel().astype(np.int64)


def parse_metapath(g: HetGraph, token: str) -> MetaPath:
    """Resolve a type-code string like 'PAP' into a relation chain.

    Each consecutive code pair must match exactly one relation; the chain
    must start and end at the graph's target type.
    """
    codes = list(token)
    if len(codes) < 2:
        raise MetaPathError(f"meta-path {token!r} is too short")
    if codes[0] != g.target_type or codes[-1] != g.target_type:
        raise MetaPathError(
            f"meta-path {token!r} must start and end at target type "
            f"{g.target_type!r}"
        )
    chain = []
    for a, b in zip(codes, codes[1:]):
        matches = [r.name for r in g.relations.values() if r.src == a and r.dst == b]
        if not matches:
            raise MetaPathError(f"meta-path {token!r}: no relation from {a!r} to {b!r}")
        if len(matches) > 1:
            raise MetaPathError(
                f"meta-path {token!r}: ambiguous step {a!r}->{b!r} "
                f"(candidates {matches})"
            )
        chain.append(matches[0])
    return MetaPath(token, tuple(chain))


def check_metapath(g: HetGraph, path: MetaPath) -> None:
    """Raise MetaPathError unless the relation chain is valid for g."""
    if not path.relations:
        raise MetaPathError(f"meta-path {path.name!r} has no relations")
    prev_dst = g.target_type
    for i, name in enumerate(path.relations):
        rel = g.relation(name)
        if rel.src != prev_dst:
            raise MetaPathError(
                f"meta-path {path.name!r}: step {i} ({name!r}) starts at "
                f"{rel.src!r} but previous step ends at {prev_dst!r}"
            )
        prev_dst = rel.dst
    if prev_dst != g.target_type:
        raise MetaPathError(
            f"meta-path {path.name!r} ends at {prev_dst!r}, expected target "
            f"type {g.target_type!r}"
        )
