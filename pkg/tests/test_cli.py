"""End-to-end command-line pipeline tests."""

import json
import os

import numpy as np
import pytest

from bankdistress import cli, corpus, fusion, pvdm


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    """Run synth -> ingest -> embed -> fuse once and share the artifacts."""
    d = str(tmp_path_factory.mktemp("pipeline"))
    paths = {
        "data": os.path.join(d, "data"),
        "sentences": os.path.join(d, "sentences.jsonl"),
        "model": os.path.join(d, "model.npz"),
        "vectors": os.path.join(d, "vectors.jsonl"),
        "fused": os.path.join(d, "fused.jsonl"),
        "stats": os.path.join(d, "stats.json"),
        "config": os.path.join(d, "config.json"),
        "dir": d,
    }
    assert cli.main(["synth", "--out", paths["data"], "--banks", "12",
                     "--min-sentences", "2", "--max-sentences", "6",
                     "--seed", "4"]) == 0
    assert cli.main(["ingest",
                     "--articles", os.path.join(paths["data"], "articles.jsonl"),
                     "--registry", os.path.join(paths["data"], "registry.json"),
                     "--out", paths["sentences"]]) == 0
    assert cli.main(["embed", "--sentences", paths["sentences"],
                     "--out", paths["model"], "--vectors", paths["vectors"],
                     "--dim", "16", "--window", "2", "--epochs", "2",
                     "--seed", "1"]) == 0
    assert cli.main(["fuse", "--sentences", paths["sentences"],
                     "--vectors", paths["vectors"],
                     "--indicators", os.path.join(paths["data"], "indicators.csv"),
                     "--events", os.path.join(paths["data"], "events.csv"),
                     "--out", paths["fused"], "--stats", paths["stats"]]) == 0
    with open(paths["config"], "w", encoding="utf-8") as fh:
        json.dump({"mlp": {"epochs": 3, "hidden_layers": [6]}}, fh)
    return paths


def test_synth_outputs(pipeline):
    data = pipeline["data"]
    registry = corpus.compile_registry(os.path.join(data, "registry.json"))
    assert len(registry) == 12
    events = fusion.read_events(os.path.join(data, "events.csv"))
    assert events
    manifest = json.load(open(os.path.join(data, "manifest.json"), encoding="utf-8"))
    assert manifest["seed"] == 4


def test_ingest_output(pipeline):
    sentences = corpus.read_sentences(pipeline["sentences"])
    assert sentences
    assert all(s.bank_id.startswith("bank") for s in sentences)


def test_embed_output(pipeline):
    model = pvdm.load_model(pipeline["model"])
    assert model.config.vector_dim == 16
    vectors = pvdm.read_vectors(pipeline["vectors"])
    assert set(vectors) == set(model.sentence_index)
    assert all(v.shape == (16,) for v in vectors.values())


def test_fuse_output(pipeline):
    table = fusion.read_sample_table(pipeline["fused"])
    assert table.semantic_dim == 16
    assert table.numeric_raw.shape[1] == fusion.NUMERIC_DIM
    assert set(np.unique(table.labels)) <= {0, 1}
    stats = json.load(open(pipeline["stats"], encoding="utf-8"))
    assert len(stats["mean"]) == fusion.NUMERIC_DIM
    assert stats["indicators"] == list(fusion.INDICATOR_NAMES)


def test_train_command(pipeline):
    out = os.path.join(pipeline["dir"], "report.json")
    rc = cli.main(["train", "--fused", pipeline["fused"],
                   "--events", os.path.join(pipeline["data"], "events.csv"),
                   "--config", pipeline["config"], "--seed", "2", "--out", out])
    assert rc == 0
    report = json.load(open(out, encoding="utf-8"))
    assert report["arm"] == "combined"
    assert report["mu"] == 0.9
    assert set(report["test"]) >= {"relative_usefulness", "confusion", "threshold"}


def test_experiment_command_and_report(pipeline, capsys):
    out = os.path.join(pipeline["dir"], "results")
    rc = cli.main(["experiment", "--fused", pipeline["fused"],
                   "--events", os.path.join(pipeline["data"], "events.csv"),
                   "--config", pipeline["config"], "--seed", "2", "--runs", "2",
                   "--arm", "all", "--out", out])
    assert rc == 0
    runs = open(os.path.join(out, "runs.csv"), encoding="utf-8").read().splitlines()
    assert len(runs) == 1 + 3 * 2  # header + three arms x two runs
    summary = json.load(open(os.path.join(out, "summary.json"), encoding="utf-8"))
    assert sorted(summary["arms"]) == ["combined", "numeric_only", "text_only"]

    capsys.readouterr()
    assert cli.main(["report", "--results", out]) == 0
    printed = capsys.readouterr().out
    assert "combined" in printed and "mean U_r" in printed


def test_single_arm_experiment(pipeline):
    out = os.path.join(pipeline["dir"], "results_text")
    rc = cli.main(["experiment", "--fused", pipeline["fused"],
                   "--events", os.path.join(pipeline["data"], "events.csv"),
                   "--config", pipeline["config"], "--seed", "2", "--runs", "1",
                   "--arm", "text_only", "--out", out])
    assert rc == 0
    summary = json.load(open(os.path.join(out, "summary.json"), encoding="utf-8"))
    assert list(summary["arms"]) == ["text_only"]


def test_sweep_command(pipeline):
    out = os.path.join(pipeline["dir"], "sweepdir")
    rc = cli.main(["sweep", "--fused", pipeline["fused"],
                   "--events", os.path.join(pipeline["data"], "events.csv"),
                   "--config", pipeline["config"], "--seed", "2",
                   "--parameter", "l1", "--grid", "0.0,1e-5", "--runs", "1",
                   "--out", out])
    assert rc == 0
    lines = open(os.path.join(out, "sweep_l1.csv"), encoding="utf-8").read().splitlines()
    assert lines[0] == "parameter,value,mean_ur,std_ur,runs"
    assert len(lines) == 3


def test_sweep_embedding_parameter_needs_inputs(pipeline, capsys):
    rc = cli.main(["sweep", "--fused", pipeline["fused"],
                   "--events", os.path.join(pipeline["data"], "events.csv"),
                   "--parameter", "window_n", "--grid", "2,3",
                   "--out", os.path.join(pipeline["dir"], "x")])
    assert rc == 1
    assert "retrains embeddings" in capsys.readouterr().err


def test_exit_codes(pipeline, capsys, tmp_path):
    # unknown arguments are a usage error
    assert cli.main(["experiment", "--bogus"]) == 1
    # missing input files are i/o errors
    assert cli.main(["ingest", "--articles", str(tmp_path / "none.jsonl"),
                     "--registry", os.path.join(pipeline["data"], "registry.json"),
                     "--out", str(tmp_path / "out.jsonl")]) == 2
    # malformed registry is a validation error
    bad = tmp_path / "bad.json"
    bad.write_text("{not json", encoding="utf-8")
    assert cli.main(["ingest",
                     "--articles", os.path.join(pipeline["data"], "articles.jsonl"),
                     "--registry", str(bad),
                     "--out", str(tmp_path / "out.jsonl")]) == 1
    capsys.readouterr()


def test_embedding_scope_train_folds(pipeline, capsys, tmp_path):
    events = os.path.join(pipeline["data"], "events.csv")
    # the per-run retraining mode needs the raw sentences
    rc = cli.main(["train", "--fused", pipeline["fused"], "--events", events,
                   "--embedding-scope", "train_folds",
                   "--out", str(tmp_path / "r.json")])
    assert rc == 1
    assert "--sentences" in capsys.readouterr().err

    cfg_path = str(tmp_path / "cfg.json")
    with open(cfg_path, "w", encoding="utf-8") as fh:
        json.dump({"mlp": {"epochs": 2, "hidden_layers": [6]},
                   "pvdm": {"vector_dim": 8, "window_n": 2, "epochs": 1,
                            "min_count": 1}}, fh)
    out = str(tmp_path / "report.json")
    rc = cli.main(["train", "--fused", pipeline["fused"], "--events", events,
                   "--config", cfg_path, "--seed", "2",
                   "--embedding-scope", "train_folds",
                   "--sentences", pipeline["sentences"], "--out", out])
    assert rc == 0
    report = json.load(open(out, encoding="utf-8"))
    assert "relative_usefulness" in report["test"]


def test_mu_flag_propagates(pipeline):
    out = os.path.join(pipeline["dir"], "report_mu.json")
    rc = cli.main(["train", "--fused", pipeline["fused"],
                   "--events", os.path.join(pipeline["data"], "events.csv"),
                   "--config", pipeline["config"], "--seed", "2",
                   "--mu", "0.8", "--out", out])
    assert rc == 0
    report = json.load(open(out, encoding="utf-8"))
    assert report["mu"] == 0.8
    assert report["test"]["mu"] == 0.8
