"""End-to-end training and the experiment runners.

The pipeline: compose meta-path adjacencies, split paths into large and
small at threshold tau, filter large-path neighbors down to a budget,
convolve each path's subgraph, fuse with attention, and optimize cross
entropy with Adam. Experiment runners (ablation, grid sweep, robustness
deletion, degree statistics) share one split per comparison group so
differences are attributable to the variant under test.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .filtering import filter_large_path
from .graph import GraphError, HetGraph, LabelSet, MetaPath, Relation, validate_graph
from .metapaths import MetaPathGraph, compose_metapath, discriminate
from .metrics import LinearSVM, accuracy, ari, f1_scores, kmeans, nmi
from .nn import Adam, Model, NormalizedAdjacency, conv_stack, cross_entropy, subgraph_attention, sym_normalize

VARIANTS = ("full", "no_large", "no_small")


@dataclass(frozen=True)
class Split:
    """Disjoint train/val/test index sets over labeled target nodes."""

    train: np.ndarray
    val: np.ndarray
    test: np.ndarray
    seed: int

    def __post_init__(self):
        for name in ("train", "val", "test"):
            arr = np.sort(np.asarray(getattr(self, name), dtype=np.int64))
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)


@dataclass
class TrainConfig:
    hidden_dim: int = 64
    lr: float = 0.005
    weight_decay: float = 6.0e-4
    feat_drop: float = 0.5
    max_iters: int = 1000
    tau: float = 100.0
    neighbor_budget: int = 500
    budget_overrides: dict = field(default_factory=dict)  # per-path budgets
    num_layers: int = 2
    patience: float = 30
    seed: int = 0
    activation: str = "relu"
    epsilon: float = 1e-8
    ratios: tuple[float, float, float] = (0.1, 0.1, 0.8)
    eval_ratios: tuple[float, ...] = (0.2, 0.4, 0.6, 0.8)
    eval_repeats: int = 10
    variant: str = "full"

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")
        if not 0.0 <= self.feat_drop < 1.0:
            raise ValueError("feat_drop must be in [0, 1)")
        for name in ("hidden_dim", "lr", "max_iters", "neighbor_budget",
                     "num_layers", "patience"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass
class MetricsReport:
    macro_f1: dict[float, float]
    micro_f1: dict[float, float]
    nmi: float
    ari: float
    loss_curve: list[tuple[float, float]]
    betas: dict[str, float]
    wall_clock_sec: float
    train_accuracy: float
    iterations: int
    variant: str
    tau: float
    neighbor_budget: int
    seed: int
    partition: dict[str, str]
    r_values: dict[str, float] = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        return {
            "macro_f1": {str(k): v for k, v in self.macro_f1.items()},
            "micro_f1": {str(k): v for k, v in self.micro_f1.items()},
            "nmi": self.nmi,
            "ari": self.ari,
            "loss_curve": [list(pair) for pair in self.loss_curve],
            "betas": self.betas,
            "wall_clock_sec": self.wall_clock_sec,
            "train_accuracy": self.train_accuracy,
            "iterations": self.iterations,
            "variant": self.variant,
            "tau": self.tau,
            "neighbor_budget": self.neighbor_budget,
            "seed": self.seed,
            "partition": self.partition,
            "r_values": self.r_values,
        }

    def to_csv_row(self) -> dict[str, object]:
        row: dict[str, object] = {
            "variant": self.variant,
            "tau": self.tau,
            "neighbor_budget": self.neighbor_budget,
            "seed": self.seed,
            "train_accuracy": self.train_accuracy,
            "iterations": self.iterations,
            "nmi": self.nmi,
            "ari": self.ari,
            "wall_clock_sec": self.wall_clock_sec,
        }
        for ratio in sorted(self.macro_f1):
            row[f"macro_f1_{ratio}"] = self.macro_f1[ratio]
            row[f"micro_f1_{ratio}"] = self.micro_f1[ratio]
        return row


def make_split(
    labels: LabelSet, ratios: Sequence[float] = (0.1, 0.1, 0.8), seed: int = 0
) -> Split:
    """Stratified seeded split of the labeled nodes into train/val/test.

    Within each class the shuffled indices are partitioned by largest-
    remainder apportionment so bucket sizes track the ratios exactly up to
    rounding.
    """
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3:
        raise ValueError("ratios must be (train, val, test)")
    if any(r < 0 for r in ratios) or sum(ratios) > 1.0 + 1e-9:
        raise ValueError(f"ratios must be nonnegative and sum to <= 1, got {ratios}")
    rng = np.random.default_rng(seed)
    buckets: list[list[np.ndarray]] = [[], [], []]
    labeled = labels.labeled_indices
    for c in range(labels.num_classes):
        members = labeled[labels.labels[labeled] == c]
        if members.size == 0:
            continue
        if members.size < 3:
            raise GraphError(
                f"class {c} has only {members.size} labeled nodes; "
                "cannot stratify into train/val/test"
            )
        members = rng.permutation(members)
        sizes = _apportion(members.size, ratios)
        start = 0
        for b, size in enumerate(sizes):
            buckets[b].append(members[start : start + size])
            start += size
    parts = [
        np.concatenate(b) if b else np.empty(0, dtype=np.int64) for b in buckets
    ]
    return Split(parts[0], parts[1], parts[2], seed)


def _apportion(n: int, ratios: tuple[float, ...]) -> list[int]:
    """Largest-remainder allocation of n items; a slack bucket absorbs 1-sum."""
    quotas = [r * n for r in ratios] + [max(0.0, 1.0 - sum(ratios)) * n]
    base = [int(np.floor(q)) for q in quotas]
    leftover = n - sum(base)
    remainders = sorted(
        range(len(quotas)), key=lambda i: (quotas[i] - base[i], -i), reverse=True
    )
    for i in remainders[:leftover]:
        base[i] += 1
    return base[: len(ratios)]


def prepare_adjacencies(
    g: HetGraph, paths: Sequence[MetaPath], config: TrainConfig
) -> tuple[dict[str, NormalizedAdjacency], dict[str, str], dict[str, float]]:
    """Compose, partition, filter, and normalize the per-path adjacencies.

    Returns normalized adjacencies keyed by path name, the large/small
    assignment, and (in the full variant) the relative-difference values.
    """
    graphs = [compose_metapath(g, p) for p in paths]
    r_values: dict[str, float] = {}
    if config.variant == "full":
        partition = discriminate(graphs, config.tau)
        large = set(partition.large_paths)
        r_values = {p.name: r for p, r in partition.r_values.items()}
    elif config.variant == "no_large":
        large = set()
    else:  # no_small: every path goes through the filtered branch
        large = {p for p in paths}

    norms: dict[str, NormalizedAdjacency] = {}
    assignment: dict[str, str] = {}
    for mg in graphs:
        if mg.path in large:
            if g.target_type not in g.features:
                raise GraphError(
                    f"target type {g.target_type!r} has no features; "
                    "cannot score neighbors for filtering"
                )
            budget = int(config.budget_overrides.get(mg.path.name, config.neighbor_budget))
            filtered = filter_large_path(g, mg.path, budget, config.epsilon)
            adj = filtered.adj
            assignment[mg.path.name] = "large"
        else:
            adj = mg.bool_adj
            assignment[mg.path.name] = "small"
        norms[mg.path.name] = sym_normalize(adj, mg.path)
    return norms, assignment, r_values


def _forward(
    model: Model,
    g: HetGraph,
    norms: Mapping[str, NormalizedAdjacency],
    paths: Sequence[MetaPath],
    feat_drop: float = 0.0,
    drop_rng: np.random.Generator | None = None,
):
    x = ad.matmul(Tensor(g.features[g.target_type]), model.proj[g.target_type])
    if feat_drop > 0.0 and drop_rng is not None:
        x = ad.dropout(x, feat_drop, drop_rng)
    embeddings = [
        conv_stack(norms[p.name], x, model.conv[p.name], model.activation)
        for p in paths
    ]
    fused, betas = subgraph_attention(embeddings, model)
    logits = ad.matmul(fused, model.classifier)
    return fused, betas, logits


def train(
    g: HetGraph,
    paths: Sequence[MetaPath],
    config: TrainConfig,
    split: Split | None = None,
    run_probes: bool = True,
) -> tuple[Model, np.ndarray, MetricsReport]:
    """Full training loop; returns the best-validation model, its embeddings,
    and a metrics report.

    Deterministic per config.seed: initialization, dropout masks, the split,
    and the downstream probes all derive from it.
    """
    started = time.perf_counter()
    violations = validate_graph(g)
    if violations:
        raise GraphError("invalid graph: " + "; ".join(violations))
    if not paths:
        raise GraphError("no meta-paths supplied")
    if g.labels is None:
        raise GraphError("graph has no labels")

    norms, assignment, r_values = prepare_adjacencies(g, paths, config)
    labels = g.labels
    if split is None:
        split = make_split(labels, config.ratios, config.seed)

    seeds = np.random.SeedSequence(config.seed).spawn(2)
    model = Model(
        feature_dims={g.target_type: g.features[g.target_type].shape[1]},
        path_names=[p.name for p in paths],
        num_classes=labels.num_classes,
        hidden_dim=config.hidden_dim,
        num_layers=config.num_layers,
        activation=config.activation,
        seed=seeds[0].generate_state(1)[0],
    )
    drop_rng = np.random.default_rng(seeds[1])
    optimizer = Adam(
        model.parameters(), lr=config.lr, weight_decay=config.weight_decay
    )

    best_val = np.inf
    best_state = model.state_dict()
    checks_without_improvement = 0
    loss_curve: list[tuple[float, float]] = []
    train_acc = 0.0
    iterations = 0
    for it in range(config.max_iters):
        iterations = it + 1
        model.zero_grad()
        _, _, logits = _forward(
            model, g, norms, paths, feat_drop=config.feat_drop, drop_rng=drop_rng
        )
        loss = cross_entropy(logits, labels, split.train)
        train_loss = float(loss.values)
        if not np.isfinite(train_loss):
            raise FloatingPointError(
                f"training diverged at iteration {it}: loss={train_loss}"
            )
        loss.backward()
        optimizer.step()

        _, _, eval_logits = _forward(model, g, norms, paths)
        val_loss = float(cross_entropy(eval_logits, labels, split.val).values)
        if not np.isfinite(val_loss):
            raise FloatingPointError(
                f"training diverged at iteration {it}: val loss={val_loss}"
            )
        loss_curve.append((train_loss, val_loss))
        pred = eval_logits.values[split.train].argmax(axis=1)
        train_acc = max(train_acc, accuracy(labels.labels[split.train], pred))
        if val_loss < best_val:
            best_val = val_loss
            best_state = model.state_dict()
            checks_without_improvement = 0
        else:
            checks_without_improvement += 1
            if checks_without_improvement >= config.patience:
                break

    model.load_state_dict(best_state)
    embeddings, betas, _ = _forward(model, g, norms, paths)
    z = embeddings.values.copy()

    macro: dict[float, float] = {}
    micro: dict[float, float] = {}
    nmi_val = ari_val = float("nan")
    if run_probes:
        test_idx = split.test
        cls = eval_classification(
            z[test_idx],
            labels.labels[test_idx],
            labels.num_classes,
            ratios=config.eval_ratios,
            seed=config.seed,
            repeats=config.eval_repeats,
        )
        macro = {r: pair[0] for r, pair in cls.items()}
        micro = {r: pair[1] for r, pair in cls.items()}
        labeled = labels.labeled_indices
        nmi_val, ari_val = eval_clustering(
            z[labeled], labels.labels[labeled], labels.num_classes, seed=config.seed
        )

    report = MetricsReport(
        macro_f1=macro,
        micro_f1=micro,
        nmi=nmi_val,
        ari=ari_val,
        loss_curve=loss_curve,
        betas={p.name: float(b) for p, b in zip(paths, betas.values)},
        wall_clock_sec=time.perf_counter() - started,
        train_accuracy=train_acc,
        iterations=iterations,
        variant=config.variant,
        tau=config.tau,
        neighbor_budget=config.neighbor_budget,
        seed=config.seed,
        partition=assignment,
        r_values=r_values,
    )
    return model, z, report


def eval_classification(
    z: np.ndarray,
    y: np.ndarray,
    num_classes: int,
    ratios: Sequence[float] = (0.2, 0.4, 0.6, 0.8),
    seed: int = 0,
    repeats: int = 10,
) -> dict[float, tuple[float, float]]:
    """Linear-SVM probe: per training ratio, mean (macro, micro) F1 over
    seeded repeats. Folds whose training side is single-class are skipped
    with a warning.
    """
    z = np.asarray(z, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    n = z.shape[0]
    out: dict[float, tuple[float, float]] = {}
    children = np.random.SeedSequence(seed).spawn(repeats)
    for ratio in ratios:
        scores = []
        for rep in range(repeats):
            rng = np.random.default_rng(children[rep])
            perm = rng.permutation(n)
            n_train = int(round(ratio * n))
            n_train = min(max(n_train, 1), n - 1)
            fold_train, fold_test = perm[:n_train], perm[n_train:]
            if np.unique(y[fold_train]).size < 2:
                warnings.warn(
                    f"ratio {ratio}: training fold has a single class; skipped"
                )
                continue
            svm = LinearSVM(num_classes, seed=rep).fit(z[fold_train], y[fold_train])
            pred = svm.predict(z[fold_test])
            scores.append(f1_scores(y[fold_test], pred, num_classes))
        if scores:
            arr = np.array(scores)
            out[float(ratio)] = (float(arr[:, 0].mean()), float(arr[:, 1].mean()))
        else:
            warnings.warn(f"ratio {ratio}: all folds degenerate")
            out[float(ratio)] = (float("nan"), float("nan"))
    return out


def eval_clustering(
    z: np.ndarray, y: np.ndarray, k: int, seed: int = 0
) -> tuple[float, float]:
    """k-means the embeddings and compare clusters to true labels."""
    pred, _ = kmeans(np.asarray(z, dtype=np.float64), k, seed=seed, restarts=10)
    return nmi(y, pred), ari(y, pred)


def run_ablation(
    g: HetGraph, paths: Sequence[MetaPath], config: TrainConfig
) -> dict[str, MetricsReport]:
    """Train the full model and both single-branch variants on one split."""
    split = make_split(g.labels, config.ratios, config.seed)
    reports = {}
    for variant in VARIANTS:
        cfg = replace(config, variant=variant)
        _, _, reports[variant] = train(g, paths, cfg, split=split)
    return reports


def sweep(
    g: HetGraph,
    paths: Sequence[MetaPath],
    config: TrainConfig,
    tau_grid: Sequence[float],
    budget_grid: Sequence[int],
) -> list[MetricsReport]:
    """Cross-product runs over tau and neighbor-budget grids on one split."""
    if not tau_grid or not budget_grid:
        raise ValueError("sweep grids must be nonempty")
    split = make_split(g.labels, config.ratios, config.seed)
    reports = []
    for tau in tau_grid:
        for budget in budget_grid:
            cfg = replace(config, tau=float(tau), neighbor_budget=int(budget))
            _, _, report = train(g, paths, cfg, split=split)
            reports.append(report)
    return reports


def perturb_graph(
    g: HetGraph,
    fraction: float,
    seed: int = 0,
    types: Sequence[str] | None = None,
) -> HetGraph:
    """Delete floor(fraction * n) uniformly sampled nodes of the given types
    (default: the target type) with all incident edges, reindexing densely.
    """
    if not 0.0 < fraction < 1.0:
        raise ValueError(f"fraction must be in (0, 1), got {fraction}")
    types = tuple(types) if types is not None else (g.target_type,)
    rng = np.random.default_rng(seed)
    keep: dict[str, np.ndarray] = {}
    for t in types:
        if t not in g.node_counts:
            raise GraphError(f"unknown node type {t!r}")
        n = g.node_counts[t]
        removed = rng.choice(n, size=int(np.floor(fraction * n)), replace=False)
        mask = np.ones(n, dtype=bool)
        mask[removed] = False
        keep[t] = mask

    node_counts = {
        t: int(keep[t].sum()) if t in keep else n for t, n in g.node_counts.items()
    }
    relations = {}
    for name, rel in g.relations.items():
        adj = rel.adj
        if rel.src in keep:
            adj = adj[keep[rel.src], :]
        if rel.dst in keep:
            adj = adj[:, keep[rel.dst]]
        relations[name] = Relation(name, rel.src, rel.dst, adj)
    features = {
        t: (x[keep[t]] if t in keep else x) for t, x in g.features.items()
    }
    labels = g.labels
    if labels is not None and g.target_type in keep:
        mask = keep[g.target_type]
        new_labels = labels.labels[mask]
        new_mask = labels.mask[mask]
        before = np.unique(labels.labels[labels.mask])
        after = np.unique(new_labels[new_mask])
        lost = set(before.tolist()) - set(after.tolist())
        if lost:
            raise GraphError(f"deletion would empty labeled class(es) {sorted(lost)}")
        labels = LabelSet(new_labels, new_mask, labels.num_classes)
    return HetGraph(node_counts, relations, features, g.target_type, labels)


@dataclass(frozen=True)
class DegreeStats:
    """Pooled per-node boolean degree statistics of the large paths."""

    d_max: int
    d_min: int
    d_avg: float
    d_med: float

    def budget_candidates(self) -> dict[str, int]:
        """The four statistics as candidate neighbor budgets (avg/med rounded)."""
        return {
            "max": int(self.d_max),
            "min": int(self.d_min),
            "avg": int(round(self.d_avg)),
            "med": int(round(self.d_med)),
        }


def degree_statistics(
    g: HetGraph, large_paths: Sequence[MetaPath | MetaPathGraph]
) -> DegreeStats:
    """Max/min/mean/median of row degrees pooled over the given large paths."""
    if not large_paths:
        raise GraphError("degree_statistics: no large paths")
    pools = []
    for p in large_paths:
        mg = p if isinstance(p, MetaPathGraph) else compose_metapath(g, p)
        pools.append(np.asarray(mg.bool_adj.sum(axis=1)).ravel())
    pool = np.concatenate(pools)
    if pool.size == 0:
        raise GraphError("degree_statistics: empty degree pool")
    return DegreeStats(
        d_max=int(pool.max()),
        d_min=int(pool.min()),
        d_avg=float(pool.mean()),
        d_med=float(np.median(pool)),
    )
