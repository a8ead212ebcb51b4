"""On-disk graph bundles and the synthetic generator.

A bundle is a directory:

    schema.json          node types/counts/feature dims, relations,
                         meta-path strings, target type, class count,
                         default tau and T, format_version
    edges/<REL>.tsv      one "src<TAB>dst[<TAB>multiplicity]" line per edge
    features/<TYPE>.csv  comma-separated floats, one row per node
    labels/<TYPE>.tsv    "node_index<TAB>class_id" lines (may be partial)
    splits.json          optional frozen train/val/test indices

Text formats keep the datasets diffable; binary is reserved for
checkpoints and embeddings. The generator plants a class partition:
same-class targets share bridge-type intermediates with one probability,
cross-class with another, and designated relations get extra uniform
noise edges.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
import scipy.sparse as sp

from .graph import (
    GraphError,
    HetGraph,
    LabelSet,
    MetaPath,
    Relation,
    add_reverse_relations,
    parse_metapath,
    validate_graph,
)
from .training import Split

FORMAT_VERSION = 1


class BundleError(GraphError):
    """A bundle directory is missing, inconsistent, or unparseable."""


@dataclass(frozen=True)
class Bundle:
    """A loaded (or generated) dataset: graph, meta-paths, run defaults."""

    graph: HetGraph
    paths: tuple[MetaPath, ...]
    defaults: dict
    name: str = "bundle"
    split: Split | None = None


def load_bundle(path: str | Path) -> Bundle:
    """Load and fully validate a bundle directory."""
    root = Path(path)
    schema_file = root / "schema.json"
    if not schema_file.is_file():
        raise BundleError(f"{schema_file}: missing schema.json")
    try:
        schema = json.loads(schema_file.read_text())
    except json.JSONDecodeError as e:
        raise BundleError(f"{schema_file}: invalid JSON ({e})") from None

    version = schema.get("format_version")
    if version != FORMAT_VERSION:
        raise BundleError(
            f"{schema_file}: unsupported format_version {version!r} "
            f"(expected {FORMAT_VERSION})"
        )
    for key in ("target_type", "node_types", "relations", "metapaths", "num_classes"):
        if key not in schema:
            raise BundleError(f"{schema_file}: missing key {key!r}")

    counts: dict[str, int] = {}
    feature_dims: dict[str, int] = {}
    for entry in schema["node_types"]:
        code = entry["code"]
        if code in counts:
            raise BundleError(f"{schema_file}: duplicate node type {code!r}")
        counts[code] = int(entry["count"])
        feature_dims[code] = int(entry.get("feature_dim", 0))

    relations = []
    for entry in schema["relations"]:
        name, src, dst = entry["name"], entry["src"], entry["dst"]
        for t in (src, dst):
            if t not in counts:
                raise BundleError(f"{schema_file}: relation {name!r} uses unknown type {t!r}")
        edge_file = root / "edges" / f"{name}.tsv"
        adj = _read_edges(edge_file, counts[src], counts[dst])
        relations.append(Relation(name, src, dst, adj))

    features = {}
    for code, dim in feature_dims.items():
        if dim <= 0:
            continue
        feat_file = root / "features" / f"{code}.csv"
        features[code] = _read_features(feat_file, counts[code], dim)

    target = schema["target_type"]
    if target not in counts:
        raise BundleError(f"{schema_file}: target type {target!r} not declared")
    num_classes = int(schema["num_classes"])
    labels = None
    label_file = root / "labels" / f"{target}.tsv"
    if label_file.is_file():
        labels = _read_labels(label_file, counts[target], num_classes)

    graph = HetGraph(
        counts,
        add_reverse_relations(relations),
        features,
        target,
        labels,
    )
    violations = validate_graph(graph)
    if violations:
        raise BundleError(f"{root}: invalid graph: " + "; ".join(violations))

    try:
        paths = tuple(parse_metapath(graph, token) for token in schema["metapaths"])
    except GraphError as e:
        raise BundleError(f"{schema_file}: {e}") from None
    defaults = dict(schema.get("defaults", {}))

    split = None
    split_file = root / "splits.json"
    if split_file.is_file():
        try:
            raw = json.loads(split_file.read_text())
            split = Split(
                np.asarray(raw["train"], dtype=np.int64),
                np.asarray(raw["val"], dtype=np.int64),
                np.asarray(raw["test"], dtype=np.int64),
                seed=int(raw.get("seed", 0)),
            )
        except (json.JSONDecodeError, KeyError) as e:
            raise BundleError(f"{split_file}: invalid splits file ({e})") from None

    return Bundle(graph, paths, defaults, schema.get("name", root.name), split)


def _read_edges(path: Path, n_src: int, n_dst: int) -> sp.csr_array:
    if not path.is_file():
        raise BundleError(f"{path}: missing edge file")
    rows, cols, vals = [], [], []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) not in (2, 3):
                raise BundleError(f"{path}:{lineno}: expected 2 or 3 columns")
            try:
                s, d = int(parts[0]), int(parts[1])
                w = int(parts[2]) if len(parts) == 3 else 1
            except ValueError:
                raise BundleError(f"{path}:{lineno}: non-integer field") from None
            if not 0 <= s < n_src:
                raise BundleError(
                    f"{path}:{lineno}: source {s} out of range [0, {n_src})"
                )
            if not 0 <= d < n_dst:
                raise BundleError(
                    f"{path}:{lineno}: destination {d} out of range [0, {n_dst})"
                )
            if w < 0:
                raise BundleError(f"{path}:{lineno}: negative multiplicity {w}")
            rows.append(s)
            cols.append(d)
            vals.append(w)
    return sp.csr_array(
        (np.array(vals, dtype=np.int64), (np.array(rows), np.array(cols)))
        if rows
        else ((), ((), ())),
        shape=(n_src, n_dst),
        dtype=np.int64,
    )


def _read_features(path: Path, count: int, dim: int) -> np.ndarray:
    if not path.is_file():
        raise BundleError(f"{path}: missing feature file")
    try:
        data = np.loadtxt(path, delimiter=",", ndmin=2, dtype=np.float64)
    except ValueError as e:
        raise BundleError(f"{path}: unreadable features ({e})") from None
    if data.shape != (count, dim):
        raise BundleError(
            f"{path}: feature matrix has shape {data.shape}, expected ({count}, {dim})"
        )
    return data


def _read_labels(path: Path, count: int, num_classes: int) -> LabelSet:
    labels = np.full(count, -1, dtype=np.int64)
    mask = np.zeros(count, dtype=bool)
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise BundleError(f"{path}:{lineno}: expected 2 columns")
            try:
                idx, cls = int(parts[0]), int(parts[1])
            except ValueError:
                raise BundleError(f"{path}:{lineno}: non-integer field") from None
            if not 0 <= idx < count:
                raise BundleError(f"{path}:{lineno}: node {idx} out of range")
            if not 0 <= cls < num_classes:
                raise BundleError(
                    f"{path}:{lineno}: class {cls} out of range [0, {num_classes})"
                )
            labels[idx] = cls
            mask[idx] = True
    return LabelSet(labels, mask, num_classes)


def write_bundle(path: str | Path, bundle: Bundle) -> Path:
    """Write a bundle directory; output bytes depend only on its contents."""
    root = Path(path)
    (root / "edges").mkdir(parents=True, exist_ok=True)
    g = bundle.graph
    schema = {
        "format_version": FORMAT_VERSION,
        "name": bundle.name,
        "target_type": g.target_type,
        "num_classes": g.labels.num_classes if g.labels is not None else 0,
        "node_types": [
            {
                "code": t,
                "count": n,
                "feature_dim": int(g.features[t].shape[1]) if t in g.features else 0,
            }
            for t, n in g.node_counts.items()
        ],
        # Reverse relations are regenerated on load; store one direction.
        "relations": [
            {"name": r.name, "src": r.src, "dst": r.dst}
            for r in _forward_relations(g)
        ],
        "metapaths": [p.name for p in bundle.paths],
        "defaults": bundle.defaults,
    }
    (root / "schema.json").write_text(json.dumps(schema, indent=2, sort_keys=True) + "\n")

    for rel in _forward_relations(g):
        coo = rel.adj.tocoo()
        lines = [
            f"{s}\t{d}" if w == 1 else f"{s}\t{d}\t{w}"
            for s, d, w in sorted(zip(coo.row, coo.col, coo.data))
        ]
        (root / "edges" / f"{rel.name}.tsv").write_text(
            "\n".join(lines) + ("\n" if lines else "")
        )

    if g.features:
        (root / "features").mkdir(exist_ok=True)
        for t, x in g.features.items():
            rows = [",".join(f"{v:.9g}" for v in row) for row in x]
            (root / "features" / f"{t}.csv").write_text("\n".join(rows) + "\n")

    if g.labels is not None:
        (root / "labels").mkdir(exist_ok=True)
        lines = [
            f"{i}\t{g.labels.labels[i]}" for i in np.flatnonzero(g.labels.mask)
        ]
        (root / "labels" / f"{g.target_type}.tsv").write_text(
            "\n".join(lines) + ("\n" if lines else "")
        )

    if bundle.split is not None:
        payload = {
            "train": bundle.split.train.tolist(),
            "val": bundle.split.val.tolist(),
            "test": bundle.split.test.tolist(),
            "seed": bundle.split.seed,
        }
        (root / "splits.json").write_text(json.dumps(payload, sort_keys=True) + "\n")
    return root


def _forward_relations(g: HetGraph) -> list[Relation]:
    """One relation per reverse pair, preferring the first-seen direction."""
    out, seen = [], set()
    for rel in g.relations.values():
        key = frozenset((rel.name, f"{rel.dst}-{rel.src}"))
        if key in seen:
            continue
        seen.add(key)
        out.append(rel)
    return out


@dataclass(frozen=True)
class SynthSpec:
    """Knobs for the planted-partition generator."""

    classes: int = 2
    target_count: int = 60
    bridge_counts: Mapping[str, int] = field(
        default_factory=lambda: {"A": 30, "S": 8}
    )
    within_prob: float = 0.2
    cross_prob: float = 0.02
    feature_dim: int = 16
    feature_noise: float = 0.6
    noise_edge_rate: float = 0.0
    noisy_relations: tuple[str, ...] = ()
    relation_probs: Mapping[str, tuple[float, float]] | None = None
    metapaths: tuple[str, ...] = ("PAP", "PSP")
    target_code: str = "P"
    tau: float = 100.0
    neighbor_budget: int = 500
    seed: int = 0
    name: str = "synthetic"

    def __post_init__(self):
        probs = [self.within_prob, self.cross_prob, self.noise_edge_rate]
        if self.relation_probs:
            for pair in self.relation_probs.values():
                probs.extend(pair)
        if any(not 0.0 <= p <= 1.0 for p in probs[:2] + probs[3:]):
            raise ValueError("probabilities must lie in [0, 1]")
        if self.noise_edge_rate < 0:
            raise ValueError("noise_edge_rate must be nonnegative")
        if self.target_count < self.classes:
            raise ValueError("target_count must be >= classes")
        if any(n < self.classes for n in self.bridge_counts.values()):
            raise ValueError("every bridge count must be >= classes")
        if self.feature_dim < self.classes:
            raise ValueError("feature_dim must be >= classes")


def synth_generate(spec: SynthSpec) -> Bundle:
    """Generate a planted-class HIN; deterministic per spec.seed."""
    rng = np.random.default_rng(spec.seed)
    n = spec.target_count
    target_classes = np.arange(n) % spec.classes

    mu = np.zeros((spec.classes, spec.feature_dim))
    mu[np.arange(spec.classes), np.arange(spec.classes)] = 1.0
    feats = mu[target_classes] + spec.feature_noise * rng.standard_normal(
        (n, spec.feature_dim)
    )

    relations = []
    for code, n_b in spec.bridge_counts.items():
        rel_name = f"{spec.target_code}-{code}"
        p_in, p_out = spec.within_prob, spec.cross_prob
        if spec.relation_probs and rel_name in spec.relation_probs:
            p_in, p_out = spec.relation_probs[rel_name]
        if p_in < p_out:
            warnings.warn(
                f"relation {rel_name}: within-class probability {p_in} below "
                f"cross-class probability {p_out}; planted classes will be inverted"
            )
        bridge_classes = np.arange(n_b) % spec.classes
        prob = np.where(
            target_classes[:, None] == bridge_classes[None, :], p_in, p_out
        )
        dense = (rng.random((n, n_b)) < prob).astype(np.int64)
        adj = sp.csr_array(dense)
        if rel_name in spec.noisy_relations and spec.noise_edge_rate > 0:
            extra = int(np.floor(spec.noise_edge_rate * adj.nnz))
            noise = sp.csr_array(
                (
                    np.ones(extra, dtype=np.int64),
                    (rng.integers(0, n, extra), rng.integers(0, n_b, extra)),
                ),
                shape=(n, n_b),
            )
            adj = sp.csr_array(adj + noise)
        relations.append(Relation(rel_name, spec.target_code, code, adj))

    counts = {spec.target_code: n, **{c: nb for c, nb in spec.bridge_counts.items()}}
    labels = LabelSet(target_classes, np.ones(n, dtype=bool), spec.classes)
    graph = HetGraph(
        counts,
        add_reverse_relations(relations),
        {spec.target_code: feats},
        spec.target_code,
        labels,
    )
    paths = tuple(parse_metapath(graph, token) for token in spec.metapaths)
    defaults = {"tau": spec.tau, "T": spec.neighbor_budget, "seed": spec.seed}
    return Bundle(graph, paths, defaults, spec.name)


def noise_benchmark_spec(seed: int = 0, noise_edge_rate: float = 0.3) -> SynthSpec:
    """The denoising benchmark: a clean sparse path plus a dense path whose
    relation carries uniform noise edges; filtering should recover the
    planted structure that unfiltered aggregation blurs.
    """
    return SynthSpec(
        classes=2,
        target_count=120,
        bridge_counts={"A": 90, "S": 12},
        relation_probs={"P-A": (0.06, 0.005), "P-S": (0.6, 0.02)},
        feature_dim=16,
        feature_noise=1.4,
        noise_edge_rate=noise_edge_rate,
        noisy_relations=("P-S",),
        metapaths=("PAP", "PSP"),
        tau=200.0,
        neighbor_budget=10,
        seed=seed,
        name="noise-benchmark",
    )
