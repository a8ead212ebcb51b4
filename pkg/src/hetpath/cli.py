"""Command-line surface tying the pipeline together.

Subcommands: stats, filter, train, eval, ablate, sweep, perturb, synth,
gradcheck. Exit codes: 0 success, 1 data error, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from .bundle import Bundle, BundleError, SynthSpec, load_bundle, synth_generate, write_bundle
from .filtering import filter_large_path
from .graph import GraphError
from .metapaths import compose_metapath, discriminate
from .nn import Model, cross_entropy, gradient_check
from .serialize import FormatError, load_embeddings, save_embeddings, save_model, embeddings_to_tsv
from .training import (
    TrainConfig,
    eval_classification,
    eval_clustering,
    prepare_adjacencies,
    run_ablation,
    sweep,
    perturb_graph,
    train,
    _forward,
)

_CONFIG_ALIASES = {"T": "neighbor_budget", "layers": "num_layers"}
_CONFIG_FIELDS = {f.name for f in dataclasses.fields(TrainConfig)}


def _build_config(args, defaults: dict | None = None) -> TrainConfig:
    """Precedence: library defaults < bundle defaults < --config file < flags."""
    values: dict = {}
    defaults = defaults or {}
    if "tau" in defaults:
        values["tau"] = float(defaults["tau"])
    if "T" in defaults:
        values["neighbor_budget"] = int(defaults["T"])
    if getattr(args, "config", None):
        try:
            loaded = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise GraphError(f"config file {args.config}: {e}") from None
        for key, value in loaded.items():
            key = _CONFIG_ALIASES.get(key, key)
            if key not in _CONFIG_FIELDS:
                raise GraphError(f"config file {args.config}: unknown field {key!r}")
            values[key] = value
    for flag, dest in (
        ("tau", "tau"),
        ("T", "neighbor_budget"),
        ("seed", "seed"),
        ("layers", "num_layers"),
    ):
        flag_value = getattr(args, flag, None)
        if flag_value is not None:
            values[dest] = flag_value
    if "ratios" in values:
        values["ratios"] = tuple(values["ratios"])
    if "eval_ratios" in values:
        values["eval_ratios"] = tuple(values["eval_ratios"])
    return TrainConfig(**values)


def _add_common(p: argparse.ArgumentParser, with_train_flags: bool = True):
    p.add_argument("--seed", type=int, default=None, help="random seed")
    p.add_argument("--out", type=Path, default=None, help="output file or directory")
    if with_train_flags:
        p.add_argument("--tau", type=float, default=None, help="large/small threshold (percent)")
        p.add_argument("--T", type=int, default=None, help="retained-neighbor budget for large paths")
        p.add_argument("--layers", type=int, default=None, help="convolution layers per path")
        p.add_argument("--config", type=Path, default=None, help="JSON file with training settings")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hetpath",
        description="Heterogeneous graph learning with size-aware meta-path "
        "discrimination and neighbor filtering.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("stats", help="per-path degree sums, averages, and partition")
    p.add_argument("bundle", type=Path)
    _add_common(p)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("filter", help="emit filtered large-path edge lists")
    p.add_argument("bundle", type=Path)
    _add_common(p)
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("train", help="train and export embeddings + metrics")
    p.add_argument("bundle", type=Path)
    _add_common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="probe stored embeddings against bundle labels")
    p.add_argument("bundle", type=Path)
    p.add_argument("--embeddings", type=Path, required=True)
    _add_common(p, with_train_flags=False)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="train full model and both single-branch variants")
    p.add_argument("bundle", type=Path)
    _add_common(p)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("sweep", help="grid over tau and T")
    p.add_argument("bundle", type=Path)
    p.add_argument("--tau", type=str, default=None,
                   help="comma-separated tau grid, e.g. 30,100")
    p.add_argument("--T", type=str, default=None,
                   help="comma-separated budget grid, e.g. 100,300,500,700,1000")
    p.add_argument("--layers", type=int, default=None)
    p.add_argument("--config", type=Path, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", type=Path, default=None)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("perturb", help="delete a fraction of nodes and rewrite the bundle")
    p.add_argument("bundle", type=Path)
    p.add_argument("--fraction", type=float, required=True)
    p.add_argument("--types", type=str, default=None,
                   help="comma-separated node types to delete from (default: target)")
    _add_common(p, with_train_flags=False)
    p.set_defaults(func=cmd_perturb)

    p = sub.add_parser("synth", help="generate a planted-class synthetic bundle")
    p.add_argument("--config", type=Path, default=None, help="JSON file with generator settings")
    p.add_argument("--noise-rate", type=float, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("gradcheck", help="finite-difference check of the full backward pass")
    p.add_argument("bundle", type=Path, nargs="?", default=None)
    p.add_argument("--threshold", type=float, default=1e-4)
    _add_common(p)
    p.set_defaults(func=cmd_gradcheck)

    return parser


def cmd_stats(args) -> int:
    b = load_bundle(args.bundle)
    config = _build_config(args, b.defaults)
    graphs = [compose_metapath(b.graph, p) for p in b.paths]
    partition = discriminate(graphs, config.tau)
    n = b.graph.target_count
    rows = []
    for mg in graphs:
        r = partition.r_values[mg.path]
        rows.append(
            {
                "path": mg.path.name,
                "degree_sum": mg.degree_sum,
                "avg_degree": mg.degree_sum / n,
                "R": r,
                "side": "large" if partition.is_large(mg.path) else "small",
            }
        )
    header = f"{'path':<10}{'degree_sum':>12}{'avg_degree':>12}{'R':>12}  side"
    print(f"bundle: {b.name}  target nodes: {n}  tau: {config.tau}")
    print(header)
    for row in rows:
        print(
            f"{row['path']:<10}{row['degree_sum']:>12}"
            f"{row['avg_degree']:>12.2f}{row['R']:>12.3f}  {row['side']}"
        )
    if args.out:
        args.out.write_text(json.dumps({"tau": config.tau, "paths": rows}, indent=2) + "\n")
    return 0


def cmd_filter(args) -> int:
    b = load_bundle(args.bundle)
    config = _build_config(args, b.defaults)
    graphs = [compose_metapath(b.graph, p) for p in b.paths]
    partition = discriminate(graphs, config.tau)
    out_dir = args.out or Path("filtered")
    out_dir.mkdir(parents=True, exist_ok=True)
    summary = {"tau": config.tau, "T": config.neighbor_budget, "paths": {}}
    for path in partition.large_paths:
        filtered = filter_large_path(b.graph, path, config.neighbor_budget, config.epsilon)
        coo = filtered.adj.tocoo()
        lines = [f"{s}\t{d}" for s, d in sorted(zip(coo.row, coo.col))]
        (out_dir / f"{path.name}.tsv").write_text("\n".join(lines) + ("\n" if lines else ""))
        original = next(mg for mg in graphs if mg.path == path)
        orig_deg = np.diff(original.bool_adj.indptr)
        kept_deg = np.diff(filtered.adj.indptr)
        summary["paths"][path.name] = {
            "rows_truncated": int((kept_deg < orig_deg).sum()),
            "avg_retained_degree": float(kept_deg.mean()),
            "edges": int(filtered.adj.nnz),
        }
    (out_dir / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    print(f"filtered {len(partition.large_paths)} large path(s) -> {out_dir}")
    return 0


def cmd_train(args) -> int:
    b = load_bundle(args.bundle)
    config = _build_config(args, b.defaults)
    model, z, report = train(b.graph, b.paths, config, split=b.split)
    out_dir = args.out or Path("run")
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "metrics.json").write_text(json.dumps(report.to_json_dict(), indent=2) + "\n")
    _write_csv(out_dir / "metrics.csv", [report.to_csv_row()])
    save_embeddings(out_dir / "embeddings.bin", z)
    embeddings_to_tsv(out_dir / "embeddings.tsv", z)
    save_model(out_dir / "model.bin", model)
    print(
        f"trained {report.iterations} iters; "
        f"train acc {report.train_accuracy:.3f}; outputs in {out_dir}"
    )
    return 0


def cmd_eval(args) -> int:
    b = load_bundle(args.bundle)
    if b.graph.labels is None:
        raise GraphError("bundle has no labels to evaluate against")
    z = load_embeddings(args.embeddings)
    labels = b.graph.labels
    if z.shape[0] != labels.labels.shape[0]:
        raise GraphError(
            f"embeddings have {z.shape[0]} rows but target type has "
            f"{labels.labels.shape[0]} nodes"
        )
    seed = args.seed if args.seed is not None else 0
    labeled = labels.labeled_indices
    cls = eval_classification(
        z[labeled], labels.labels[labeled], labels.num_classes, seed=seed
    )
    nmi_val, ari_val = eval_clustering(
        z[labeled], labels.labels[labeled], labels.num_classes, seed=seed
    )
    payload = {
        "macro_f1": {str(r): v[0] for r, v in cls.items()},
        "micro_f1": {str(r): v[1] for r, v in cls.items()},
        "nmi": nmi_val,
        "ari": ari_val,
    }
    text = json.dumps(payload, indent=2)
    print(text)
    if args.out:
        args.out.write_text(text + "\n")
    return 0


def cmd_ablate(args) -> int:
    b = load_bundle(args.bundle)
    config = _build_config(args, b.defaults)
    reports = run_ablation(b.graph, b.paths, config)
    out_dir = args.out or Path("ablation")
    out_dir.mkdir(parents=True, exist_ok=True)
    payload = {name: r.to_json_dict() for name, r in reports.items()}
    (out_dir / "ablation.json").write_text(json.dumps(payload, indent=2) + "\n")
    _write_csv(out_dir / "ablation.csv", [r.to_csv_row() for r in reports.values()])
    for name, r in reports.items():
        mean_macro = float(np.mean(list(r.macro_f1.values()))) if r.macro_f1 else float("nan")
        print(f"{name:>10}: mean macro-F1 {mean_macro:.4f}  nmi {r.nmi:.4f}  ari {r.ari:.4f}")
    return 0


def cmd_sweep(args) -> int:
    b = load_bundle(args.bundle)
    tau_raw, budget_raw = args.tau, args.T
    args.tau = args.T = None  # grids are handled here, not by the base config
    base = _build_config(args, b.defaults)
    tau_grid = _grid(tau_raw, base.tau)
    budget_grid = [int(v) for v in _grid(budget_raw, base.neighbor_budget)]
    reports = sweep(b.graph, b.paths, base, tau_grid, budget_grid)
    out = args.out or Path("sweep.csv")
    _write_csv(out, [r.to_csv_row() for r in reports])
    print(f"{len(reports)} runs -> {out}")
    return 0


def cmd_perturb(args) -> int:
    b = load_bundle(args.bundle)
    types = args.types.split(",") if args.types else None
    seed = args.seed if args.seed is not None else 0
    g = perturb_graph(b.graph, args.fraction, seed=seed, types=types)
    out_dir = args.out or Path(f"{Path(args.bundle).name}_perturbed")
    write_bundle(out_dir, Bundle(g, b.paths, b.defaults, name=f"{b.name}-perturbed"))
    counts = ", ".join(f"{t}:{n}" for t, n in g.node_counts.items())
    print(f"wrote perturbed bundle ({counts}) -> {out_dir}")
    return 0


def cmd_synth(args) -> int:
    values: dict = {}
    if args.config:
        try:
            values = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise GraphError(f"config file {args.config}: {e}") from None
        if "bridge_counts" in values:
            values["bridge_counts"] = dict(values["bridge_counts"])
        for key in ("noisy_relations", "metapaths"):
            if key in values:
                values[key] = tuple(values[key])
        if "relation_probs" in values and values["relation_probs"] is not None:
            values["relation_probs"] = {
                k: tuple(v) for k, v in values["relation_probs"].items()
            }
    if args.noise_rate is not None:
        values["noise_edge_rate"] = args.noise_rate
    if args.seed is not None:
        values["seed"] = args.seed
    try:
        spec = SynthSpec(**values)
    except TypeError as e:
        raise GraphError(f"invalid generator settings: {e}") from None
    bundle = synth_generate(spec)
    write_bundle(args.out, bundle)
    print(f"wrote synthetic bundle ({bundle.graph.node_counts}) -> {args.out}")
    return 0


def cmd_gradcheck(args) -> int:
    if args.bundle is not None:
        b = load_bundle(args.bundle)
        graph, paths = b.graph, b.paths
        config = _build_config(args, b.defaults)
    else:
        from .bundle import SynthSpec as _Spec

        spec = _Spec(
            classes=2,
            target_count=12,
            bridge_counts={"A": 6, "S": 4},
            within_prob=0.6,
            cross_prob=0.15,
            feature_dim=5,
            feature_noise=0.4,
            seed=args.seed if args.seed is not None else 0,
        )
        b = synth_generate(spec)
        graph, paths = b.graph, b.paths
        config = _build_config(args, b.defaults)
    config = dataclasses.replace(
        config, hidden_dim=8, feat_drop=0.0, variant="no_small"
    )
    norms, _, _ = prepare_adjacencies(graph, paths, config)
    model = Model(
        feature_dims={graph.target_type: graph.features[graph.target_type].shape[1]},
        path_names=[p.name for p in paths],
        num_classes=graph.labels.num_classes,
        hidden_dim=config.hidden_dim,
        num_layers=config.num_layers,
        activation=config.activation,
        seed=config.seed,
    )
    idx = graph.labels.labeled_indices

    def loss_fn():
        _, _, logits = _forward(model, graph, norms, paths)
        return cross_entropy(logits, graph.labels, idx)

    err = gradient_check(model, loss_fn, seed=config.seed)
    print(f"max relative gradient error: {err:.3e} (threshold {args.threshold:.1e})")
    return 0 if err < args.threshold else 1


def _grid(raw: str | None, fallback) -> list[float]:
    if raw is None:
        return [fallback]
    return [float(v) for v in raw.split(",")]


def _write_csv(path: Path, rows: list[dict]) -> None:
    if not rows:
        return
    keys: list[str] = []
    for row in rows:
        keys.extend(k for k in row if k not in keys)
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=keys)
        writer.writeheader()
        writer.writerows(rows)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (GraphError, FormatError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
