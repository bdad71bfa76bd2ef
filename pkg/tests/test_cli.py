import json
import subprocess
import sys

import numpy as np
import pytest

from graphrep import cli, training
from graphrep.cli import Report, SeedResult, aggregate, main
from graphrep.errors import SchemaError

BLOBS = {"generator": "blobs", "n_per_class": 20, "c": 2, "d": 3, "informative_dims": 2,
         "separation": 10.0, "noise_sd": 0.1}


def write_config(tmp_path, doc, name="cfg.json"):
    doc = {"out": str(tmp_path / "out"), **doc}
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return path


def test_generate_writes_csv_and_sidecar(tmp_path):
    cfg = write_config(tmp_path, {"dataset": {"generator": "two_moons", "n": 40,
                                              "noise_sd": 0.1}, "seeds": [3]})
    assert main(["generate", str(cfg)]) == 0
    csv = tmp_path / "out" / "data_seed3.csv"
    lines = csv.read_text().splitlines()
    assert len(lines) == 41
    assert lines[0] == "f0,f1,label"
    assert json.loads(csv.with_suffix(".json").read_text())["seed"] == 3
    first = csv.read_bytes()
    assert main(["generate", str(cfg)]) == 0
    assert csv.read_bytes() == first


def test_generate_pinned_seed_is_recorded(tmp_path):
    cfg = write_config(tmp_path, {"dataset": {"generator": "two_moons", "n": 10, "seed": 77},
                                  "seeds": [1, 2]})
    assert main(["generate", str(cfg)]) == 0
    a = (tmp_path / "out" / "data_seed1.csv").read_bytes()
    assert a == (tmp_path / "out" / "data_seed2.csv").read_bytes()
    assert json.loads((tmp_path / "out" / "data_seed1.json").read_text())["seed"] == 77


def test_baseline_separated_blobs_is_perfect(tmp_path):
    cfg = write_config(tmp_path, {"dataset": BLOBS, "split": {"labeled_per_class": 4},
                                  "graph": {"k": 5}, "seeds": [0, 1]})
    assert main(["baseline", str(cfg), "--dump-graph"]) == 0
    report = Report.from_json((tmp_path / "out" / "report.json").read_text())
    assert [r.baseline_accuracy for r in report.rows] == [1.0, 1.0]
    assert report.aggregate["learned"] is None
    edges = (tmp_path / "out" / "edges_baseline_seed0.txt").read_text().splitlines()
    assert all(len(line.split()) == 3 for line in edges)


def test_k_too_large_exits_with_validation_code(tmp_path, capsys):
    blobs = {**BLOBS, "n_per_class": 5}
    cfg = write_config(tmp_path, {"dataset": blobs, "split": {"labeled_per_class": 2},
                                  "graph": {"k": 10}})
    assert main(["baseline", str(cfg)]) == 1
    assert "k=10" in capsys.readouterr().err


@pytest.mark.parametrize("doc,field", [
    ({"dataset": BLOBS, "grpah": {}}, "grpah"),
    ({"dataset": {**BLOBS, "sep": 1.0}}, "sep"),
    ({"dataset": {"generator": "spiral"}}, "dataset.generator"),
    ({"dataset": BLOBS, "seeds": []}, "seeds"),
])
def test_schema_errors(tmp_path, doc, field):
    with pytest.raises(SchemaError) as info:
        cli.load_config(write_config(tmp_path, doc))
    assert info.value.field == field
    assert main(["baseline", str(write_config(tmp_path, doc))]) == 1


def test_invalid_train_block_exits_1(tmp_path):
    cfg = write_config(tmp_path, {"dataset": BLOBS, "train": {"lr": -1.0}})
    assert main(["train", str(cfg)]) == 1


def test_train_with_zero_lr_matches_baseline(tmp_path):
    cfg = write_config(tmp_path, {
        "dataset": {"generator": "two_moons", "n": 60, "noise_sd": 0.1, "nuisance_dims": 2},
        "split": {"labeled_per_class": 4}, "graph": {"k": 5},
        "train": {"epochs": 3, "lr": 0.0, "init": "identity", "d_prime": 4},
        "seeds": [1, 2]})
    assert main(["train", str(cfg)]) == 0
    out = tmp_path / "out"
    report = Report.from_json((out / "report.json").read_text())
    for row in report.rows:
        assert row.learned_accuracy == row.baseline_accuracy
        assert row.epochs_run == 3 and row.best_epoch == 0
    assert report.aggregate["improvement"]["wins"] == 0
    model = json.loads((out / "model_seed1.json").read_text())
    assert model["w_out"] == np.eye(4).tolist()
    assert len((out / "history_seed2.jsonl").read_text().splitlines()) == 3


def test_seeds_override(tmp_path):
    cfg = write_config(tmp_path, {"dataset": BLOBS, "split": {"labeled_per_class": 4},
                                  "graph": {"k": 5}, "seeds": [0]})
    alt = tmp_path / "alt"
    assert main(["baseline", str(cfg), "--seeds", "5,2,5", "--out", str(alt)]) == 0
    assert [r.seed for r in Report.from_json((alt / "report.json").read_text()).rows] == [2, 5]
    assert main(["baseline", str(cfg), "--seeds", "x"]) == 1


def test_csv_dataset_config(tmp_path):
    gen = write_config(tmp_path, {"dataset": BLOBS, "seeds": [4]}, "gen.json")
    assert main(["generate", str(gen)]) == 0
    (tmp_path / "sub").mkdir()
    (tmp_path / "sub" / "data.csv").write_bytes((tmp_path / "out" / "data_seed4.csv").read_bytes())
    cfg = write_config(tmp_path / "sub", {"dataset": {"csv": "data.csv"},
                                          "split": {"labeled_per_class": 4}, "graph": {"k": 5}})
    assert main(["baseline", str(cfg)]) == 0
    assert main(["generate", str(cfg)]) == 1


def test_report_aggregate_and_round_trip():
    rows = [SeedResult(1, 0.5, 0.7, 0, 10, 3), SeedResult(0, 0.6, 0.5, 2, 10, 0),
            SeedResult(2, 0.5, 0.6, 1, 10, 9)]
    report = Report.build("train", rows)
    assert [r.seed for r in report.rows] == [0, 1, 2]
    imp = report.aggregate["improvement"]
    diffs = [r.learned_accuracy - r.baseline_accuracy for r in rows]
    assert imp["median"] == pytest.approx(np.median(diffs))
    assert imp["mean"] == pytest.approx(np.mean(diffs))
    assert imp["wins"] == 2 and imp["min"] == pytest.approx(-0.1)
    assert report.aggregate["baseline"]["median"] == 0.5
    back = Report.from_json(report.to_json())
    assert back == report
    assert aggregate(report.rows) == report.aggregate


def test_report_rejects_unknown_fields():
    doc = json.loads(Report.build("baseline", [SeedResult(0, 1.0, None, 0, 0, None)]).to_json())
    doc["rows"][0]["extra"] = 1
    with pytest.raises(SchemaError):
        Report.from_json(json.dumps(doc))
    doc["rows"][0].pop("extra")
    doc["rows"][0].pop("seed")
    with pytest.raises(SchemaError, match="seed"):
        Report.from_json(json.dumps(doc))


GRADCHECK_SMALL = {"gradcheck": {"instances": 3, "mlp_instances": 2, "losses": ["sq", "share"]}}


def test_gradcheck_passes(tmp_path, capsys):
    assert main(["gradcheck", str(write_config(tmp_path, GRADCHECK_SMALL))]) == 0
    out = capsys.readouterr().out
    # per loss: one linear block, three mlp blocks
    assert "FAIL" not in out and out.count("PASS") == 2 * (1 + 3)


def test_gradcheck_catches_sign_flip(tmp_path, monkeypatch, capsys):
    original = training.dist_grad_from_weight_grad
    monkeypatch.setattr(training, "dist_grad_from_weight_grad",
                        lambda dw, w, s2: -original(dw, w, s2))
    assert main(["gradcheck", str(write_config(tmp_path, GRADCHECK_SMALL))]) == 2
    assert "FAIL" in capsys.readouterr().out


def test_step_size_sweep_has_interior_minimum(tmp_path):
    _, sweep, ok = cli.cmd_gradcheck(cli.load_config(write_config(tmp_path, GRADCHECK_SMALL)))
    errs = [sweep[h] for h in (1e-4, 1e-5, 1e-6)]
    assert ok
    assert errs[1] < errs[0] and errs[1] < errs[2]


def test_module_entry_point(tmp_path):
    cfg = write_config(tmp_path, {"dataset": BLOBS, "split": {"labeled_per_class": 4},
                                  "graph": {"k": 5}})
    proc = subprocess.run([sys.executable, "-m", "graphrep", "baseline", str(cfg)],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["baseline"]["median"] == 1.0
