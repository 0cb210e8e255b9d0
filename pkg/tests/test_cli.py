import csv
import json
import subprocess
import sys

import jsonschema
import numpy as np
import pytest

from dfgnn.checkpoint import load_checkpoint
from dfgnn.cli import main
from dfgnn.ingest import load_split
from dfgnn.trainer import InteractionIndex, build_ranking_queries, evaluate_model

FAST = ["--set", "train.max_epochs=3", "--set", "model.embed_dim=8"]

REPORT_SCHEMA = {
    "type": "object",
    "required": ["task", "split", "metrics", "seed", "variant", "config_digest", "config"],
    "properties": {
        "task": {"enum": ["ranking", "feedback_type"]},
        "split": {"enum": ["train", "valid", "test"]},
        "metrics": {"type": "object", "additionalProperties": {"type": "number",
                                                               "minimum": 0, "maximum": 1}},
        "seed": {"type": "integer"},
        "variant": {"enum": ["Basic", "Basic+LGF", "Basic+DGF", "DFGNN"]},
        "config_digest": {"type": "string", "pattern": "^[0-9a-f]{16}$"},
        "config": {"type": "object"},
    },
}


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


@pytest.fixture(scope="module")
def data_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    ratings = root / "ratings.csv"
    assert main(["synth", "--out", str(ratings), "--users", "60", "--items", "60",
                 "--per-user", "15", "--seed", "3"]) == 0
    out = root / "data"
    assert main(["ingest", "--input", str(ratings), "--out-dir", str(out)]) == 0
    return out


@pytest.fixture(scope="module")
def trained(data_dir, tmp_path_factory):
    out = tmp_path_factory.mktemp("train")
    assert main(["train", "--data", str(data_dir), "--out-dir", str(out), "--no-timing",
                 "--task", "feedback_type", *FAST]) == 0
    return out


def test_ingest_outputs(data_dir):
    for name in ("train.tsv", "valid.tsv", "test.tsv", "user_map.tsv", "item_map.tsv",
                 "ratings.tsv", "stats.json", "config.json"):
        assert (data_dir / name).is_file()
    split = load_split(data_dir)
    assert split.num_users == 60 and split.ratings is not None


def test_spectrum(data_dir, tmp_path):
    assert main(["spectrum", "--data", str(data_dir), "--out-dir", str(tmp_path)]) == 0
    hist = read_csv(tmp_path / "frequency_histogram.csv")
    assert len(hist) == 11
    for col in (2, 3):
        assert abs(sum(float(r[col]) for r in hist[1:]) - 1) < 1e-9
    summary = json.loads((tmp_path / "spectrum.json").read_text())
    assert summary["positive"]["mean_frequency"] < summary["negative"]["mean_frequency"]
    assert len(read_csv(tmp_path / "signal.csv")) > 1
    assert len(read_csv(tmp_path / "kernel_response.csv")) > 10


def test_spectrum_without_negatives(tmp_path):
    rows = [f"u{u},i{i},5" for u in range(5) for i in range(5)]
    src = tmp_path / "r.csv"
    src.write_text("\n".join(rows) + "\n")
    data = tmp_path / "d"
    assert main(["ingest", "--input", str(src), "--out-dir", str(data)]) == 0
    assert main(["spectrum", "--data", str(data), "--out-dir", str(tmp_path / "s")]) == 0
    summary = json.loads((tmp_path / "s" / "spectrum.json").read_text())
    assert summary["negative"]["empty"] is True
    assert summary["negative"]["mean_frequency"] is None
    hist = read_csv(tmp_path / "s" / "frequency_histogram.csv")
    assert all(float(r[3]) == 0.0 for r in hist[1:])


def test_train_outputs(trained):
    lines = (trained / "history.jsonl").read_text().splitlines()
    assert len(lines) == 3 and all(json.loads(x)["elapsed_ms"] == 0 for x in lines)
    report = json.loads((trained / "report_valid.json").read_text())
    jsonschema.validate(report, REPORT_SCHEMA)
    assert set(report["metrics"]) == {"AUC", "F1-Macro"}


def test_train_idempotent(data_dir, trained, tmp_path):
    assert main(["train", "--data", str(data_dir), "--out-dir", str(tmp_path), "--no-timing",
                 "--task", "feedback_type", *FAST]) == 0
    for name in ("checkpoint.dfgn", "history.jsonl", "report_valid.json"):
        assert (tmp_path / name).read_bytes() == (trained / name).read_bytes()


def test_evaluate_and_diagnose(data_dir, trained, tmp_path):
    ck = str(trained / "checkpoint.dfgn")
    assert main(["evaluate", "--data", str(data_dir), "--checkpoint", ck,
                 "--out-dir", str(tmp_path / "e")]) == 0
    report = json.loads((tmp_path / "e" / "report.json").read_text())
    jsonschema.validate(report, REPORT_SCHEMA)
    assert report["split"] == "test" and report["num_examples"] > 0
    assert main(["diagnose", "--data", str(data_dir), "--checkpoint", ck, "--compare", ck,
                 "--out-dir", str(tmp_path / "g")]) == 0
    diag = json.loads((tmp_path / "g" / "diagnostics.json").read_text())
    res = diag["results"]
    assert res["a"]["uniformity"] == res["b"]["uniformity"] > 0
    spec = read_csv(tmp_path / "g" / "singular_spectrum_a.csv")
    assert float(spec[1][1]) == 1.0
    proj = read_csv(tmp_path / "g" / "projection_a.csv")
    assert {r[3] for r in proj[1:]} == {"user", "item"}


def test_train_ranking_with_grad_check(data_dir, tmp_path):
    assert main(["train", "--data", str(data_dir), "--out-dir", str(tmp_path), "--grad-check",
                 "--task", "ranking", "--variant", "Basic", *FAST]) == 0
    report = json.loads((tmp_path / "report_valid.json").read_text())
    jsonschema.validate(report, REPORT_SCHEMA)
    assert {"MRR", "HIT@10", "NDCG@10", "HIT@50", "NDCG@50"} == set(report["metrics"])
    ck = load_checkpoint(tmp_path / "checkpoint.dfgn")
    assert not any(k.startswith(("W_neg", "W_f", "b_f")) for k in ck.model.params)


def test_ablate(data_dir, tmp_path):
    assert main(["ablate", "--data", str(data_dir), "--out-dir", str(tmp_path), "--seeds", "1",
                 "--task", "feedback_type", "--set", "train.max_epochs=2",
                 "--set", "model.embed_dim=8"]) == 0
    rows = read_csv(tmp_path / "ablation.csv")
    assert [r[0] for r in rows[1:]] == ["Basic", "Basic+LGF", "Basic+DGF", "DFGNN"]
    out = json.loads((tmp_path / "ablation.json").read_text())
    assert len(out["runs"]) == 4


def test_random_parameters_score_near_chance(data_dir, tmp_path):
    assert main(["train", "--data", str(data_dir), "--out-dir", str(tmp_path), "--task",
                 "feedback_type", "--set", "train.lr=0", "--set", "train.max_epochs=1",
                 "--set", "eval.split=valid"]) == 0
    auc = json.loads((tmp_path / "report_valid.json").read_text())["metrics"]["AUC"]
    assert abs(auc - 0.5) < 0.1


def test_oracle_scores_rank_first(data_dir):
    split = load_split(data_dir)
    nu, ni = split.num_users, split.num_items
    h = np.zeros((nu + ni, ni))
    h[nu:] = np.eye(ni)
    test = np.asarray(split.test)
    pos = test[test[:, 2] > 0]
    h[pos[:, 0], pos[:, 1]] = 1.0
    known = InteractionIndex(split.all_edges(), ni)
    q = build_ranking_queries(split.test, known, ni, 99, 0)
    assert evaluate_model(h, nu, "ranking", queries=q)["MRR"] == 1.0


def test_exit_codes(data_dir, tmp_path, capsys):
    assert main(["train", "--data", str(data_dir), "--bogus"]) == 1
    assert main(["train", "--data", str(data_dir), "--out-dir", str(tmp_path),
                 "--set", "train.nope=1"]) == 1
    assert main(["ingest", "--input", str(tmp_path / "missing.csv"),
                 "--out-dir", str(tmp_path)]) == 1
    sparse = tmp_path / "sparse.csv"
    sparse.write_text("".join(f"u{k},i{k},5\n" for k in range(30)))
    assert main(["ingest", "--input", str(sparse), "--out-dir", str(tmp_path / "x")]) == 2
    assert main(["evaluate", "--data", str(data_dir), "--checkpoint", str(sparse),
                 "--out-dir", str(tmp_path)]) == 1
    err = capsys.readouterr().err
    assert "train.nope" in err and "missing.csv" in err


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "dfgnn.cli", "--version"], capture_output=True,
                         text=True)
    assert res.returncode == 0 and res.stdout.strip()
    res = subprocess.run([sys.executable, "-m", "dfgnn.cli", "train"], capture_output=True,
                         text=True)
    assert res.returncode == 1
