import csv
import json
from pathlib import Path

import numpy as np
import pytest

from hetpath.bundle import Bundle, SynthSpec, synth_generate, write_bundle
from hetpath.cli import main
from hetpath.graph import parse_metapath

from conftest import build_graph


@pytest.fixture()
def synth_dir(tmp_path):
    bundle = synth_generate(SynthSpec(seed=21, target_count=40, tau=100.0, neighbor_budget=6))
    return write_bundle(tmp_path / "synth", bundle)


@pytest.fixture()
def movie_dir(tmp_path):
    """Bundle whose composed degree sums have the exact ratio 1995:407,
    making the dense path's relative difference 390.172."""
    from conftest import movie_graph

    g = movie_graph()
    paths = (parse_metapath(g, "MAM"), parse_metapath(g, "MDM"))
    return write_bundle(
        tmp_path / "movies", Bundle(g, paths, {"tau": 200.0, "T": 10}, "movies")
    )


def test_stats_reproduces_published_relative_difference(movie_dir, capsys):
    assert main(["stats", str(movie_dir)]) == 0
    out = capsys.readouterr().out
    mam_line = next(line for line in out.splitlines() if line.startswith("MAM"))
    assert "390.172" in mam_line
    assert "large" in mam_line
    mdm_line = next(line for line in out.splitlines() if line.startswith("MDM"))
    assert "0.000" in mdm_line and "small" in mdm_line


def test_stats_json_output(movie_dir, tmp_path):
    out_file = tmp_path / "stats.json"
    assert main(["stats", str(movie_dir), "--out", str(out_file)]) == 0
    payload = json.loads(out_file.read_text())
    by_path = {row["path"]: row for row in payload["paths"]}
    assert by_path["MAM"]["degree_sum"] == 1995
    assert by_path["MDM"]["degree_sum"] == 407
    assert round(by_path["MAM"]["R"], 3) == 390.172


def test_filter_emits_edge_lists(synth_dir, tmp_path):
    out_dir = tmp_path / "filtered"
    assert main(["filter", str(synth_dir), "--T", "3", "--tau", "50", "--out", str(out_dir)]) == 0
    summary = json.loads((out_dir / "summary.json").read_text())
    assert summary["T"] == 3
    assert summary["paths"]
    for name, info in summary["paths"].items():
        lines = (out_dir / f"{name}.tsv").read_text().strip().splitlines()
        assert len(lines) == info["edges"]
        assert info["avg_retained_degree"] <= 3.0 + 1e-9
        src, dst = lines[0].split("\t")
        int(src), int(dst)


def test_train_deterministic_outputs(synth_dir, tmp_path):
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    for out in (out_a, out_b):
        code = main([
            "train", str(synth_dir), "--seed", "7", "--out", str(out),
            "--config", str(_quick_config(tmp_path)),
        ])
        assert code == 0
    metrics_a = json.loads((out_a / "metrics.json").read_text())
    metrics_b = json.loads((out_b / "metrics.json").read_text())
    metrics_a.pop("wall_clock_sec")
    metrics_b.pop("wall_clock_sec")
    assert metrics_a == metrics_b
    assert (out_a / "embeddings.bin").read_bytes() == (out_b / "embeddings.bin").read_bytes()
    assert (out_a / "model.bin").exists() and (out_a / "metrics.csv").exists()
    assert (out_a / "embeddings.tsv").exists()


def _quick_config(tmp_path):
    cfg = tmp_path / "quick.json"
    if not cfg.exists():
        cfg.write_text(json.dumps({"max_iters": 12, "eval_repeats": 2, "patience": 1000}))
    return cfg


def test_eval_on_saved_embeddings(synth_dir, tmp_path):
    run_dir = tmp_path / "run"
    assert main([
        "train", str(synth_dir), "--seed", "3", "--out", str(run_dir),
        "--config", str(_quick_config(tmp_path)),
    ]) == 0
    out_file = tmp_path / "eval.json"
    code = main([
        "eval", str(synth_dir), "--embeddings", str(run_dir / "embeddings.bin"),
        "--out", str(out_file), "--seed", "3",
    ])
    assert code == 0
    payload = json.loads(out_file.read_text())
    assert set(payload) == {"macro_f1", "micro_f1", "nmi", "ari"}
    assert 0.0 <= payload["nmi"] <= 1.0


def test_sweep_grid_csv(synth_dir, tmp_path):
    out_file = tmp_path / "sweep.csv"
    code = main([
        "sweep", str(synth_dir), "--T", "2,3,4,5,6", "--out", str(out_file),
        "--config", str(_quick_config(tmp_path)),
    ])
    assert code == 0
    with open(out_file) as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 5
    assert [int(r["neighbor_budget"]) for r in rows] == [2, 3, 4, 5, 6]


def test_ablate_writes_three_reports(synth_dir, tmp_path):
    out_dir = tmp_path / "ablation"
    code = main([
        "ablate", str(synth_dir), "--out", str(out_dir),
        "--config", str(_quick_config(tmp_path)),
    ])
    assert code == 0
    payload = json.loads((out_dir / "ablation.json").read_text())
    assert set(payload) == {"full", "no_large", "no_small"}


def test_perturb_writes_reduced_bundle(synth_dir, tmp_path, capsys):
    out_dir = tmp_path / "reduced"
    code = main([
        "perturb", str(synth_dir), "--fraction", "0.2", "--seed", "1",
        "--out", str(out_dir),
    ])
    assert code == 0
    schema = json.loads((out_dir / "schema.json").read_text())
    counts = {t["code"]: t["count"] for t in schema["node_types"]}
    assert counts["P"] == 32  # 40 - floor(0.2 * 40)


def test_synth_command(tmp_path):
    out_dir = tmp_path / "generated"
    spec_file = tmp_path / "spec.json"
    spec_file.write_text(json.dumps({"target_count": 24, "seed": 5, "bridge_counts": {"A": 10, "S": 4}}))
    assert main(["synth", "--config", str(spec_file), "--out", str(out_dir)]) == 0
    schema = json.loads((out_dir / "schema.json").read_text())
    assert {t["code"] for t in schema["node_types"]} == {"P", "A", "S"}


def test_gradcheck_command(capsys):
    assert main(["gradcheck", "--seed", "0"]) == 0
    out = capsys.readouterr().out
    assert "max relative gradient error" in out


def test_missing_bundle_is_data_error(tmp_path, capsys):
    assert main(["stats", str(tmp_path / "nope")]) == 1
    assert "error:" in capsys.readouterr().err


def test_unknown_subcommand_is_usage_error():
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2


def test_unknown_flag_is_usage_error():
    with pytest.raises(SystemExit) as exc:
        main(["stats", "somewhere", "--bogus"])
    assert exc.value.code == 2


def test_bad_config_field_is_data_error(synth_dir, tmp_path, capsys):
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps({"not_a_field": 1}))
    assert main(["train", str(synth_dir), "--config", str(cfg)]) == 1
    assert "unknown field" in capsys.readouterr().err
