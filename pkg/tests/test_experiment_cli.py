import json

import pytest

from ccral.cli import EXIT_DATA, EXIT_OK, EXIT_TRAINING, EXIT_USAGE, main
from ccral.data import load_schema
from ccral.exceptions import MalformedReport
from ccral.experiment import (
    ExperimentConfig,
    aggregates_for,
    check_report,
    dumps_report,
    load_report,
    render_report,
    run_experiment,
)
from ccral.trainer import make_margin_grid


@pytest.fixture(scope="module")
def synth_files(tmp_path_factory):
    d = tmp_path_factory.mktemp("synth")
    assert main(["gen-synth", "--n", "400", "--dims", "3", "--effect", "2.0",
                 "--noise", "0.1", "--seed", "4", "--out", str(d / "s.csv")]) == EXIT_OK
    return d / "s.csv", d / "s.schema.json"


@pytest.fixture(scope="module")
def full_report(synth_files):
    data, schema = synth_files
    return run_experiment(ExperimentConfig(str(data), str(schema), K=4, repeats=3, master_seed=5))


def test_gen_synth_files(tmp_path):
    out = tmp_path / "a.csv"
    assert main(["gen-synth", "--n", "100", "--dims", "2", "--seed", "3", "--out", str(out)]) == 0
    assert len(out.read_text().splitlines()) == 101
    first = out.read_bytes()
    assert main(["gen-synth", "--n", "100", "--dims", "2", "--seed", "3", "--out", str(out)]) == 0
    assert out.read_bytes() == first


def test_gen_synth_effect_zero_keeps_treatment(tmp_path):
    out = tmp_path / "z.csv"
    assert main(["gen-synth", "--n", "50", "--effect", "0", "--out", str(out)]) == 0
    assert load_schema(tmp_path / "z.schema.json").treatment == "T"


def test_single_repeat_single_method(synth_files):
    data, schema = synth_files
    rep = run_experiment(ExperimentConfig(str(data), str(schema), methods=("standard",), repeats=1))
    block = rep["methods"]["standard"]
    assert len(block["entries"]) == 1
    assert block["aggregates"]["test_accuracy"]["std"] == 0.0
    assert set(rep["methods"]) == {"standard"}


def test_report_invariants(full_report):
    grid = make_margin_grid(4).alphas
    for method, block in full_report["methods"].items():
        assert len(block["entries"]) == 3
        assert [e["repeat"] for e in block["entries"]] == [0, 1, 2]
        assert block["aggregates"] == aggregates_for(block["entries"])
    for e in full_report["methods"]["ccral"]["entries"]:
        assert e["selected_alpha"] in grid
        best = max(p["val_accuracy"] for p in e["trace"])
        chosen = next(p for p in e["trace"] if p["alpha"] == e["selected_alpha"])
        assert chosen["val_accuracy"] == best
    assert full_report["dataset"]["N"] == 400
    assert full_report["dataset"]["M"] == 4
    assert full_report["errors"] == {}


def test_methods_share_partitions(synth_files, full_report):
    data, schema = synth_files
    alone = run_experiment(ExperimentConfig(str(data), str(schema), methods=("standard",),
                                            K=4, repeats=3, master_seed=5))
    assert alone["methods"]["standard"]["entries"] == full_report["methods"]["standard"]["entries"]


def test_run_is_byte_deterministic(synth_files, tmp_path):
    data, schema = synth_files
    args = ["run", "--data", str(data), "--schema", str(schema), "--k", "3", "--repeats", "2",
            "--seed", "11"]
    assert main(args + ["--out", str(tmp_path / "a.json")]) == EXIT_OK
    assert main(args + ["--out", str(tmp_path / "b.json")]) == EXIT_OK
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()


def test_config_file_with_flag_override(synth_files, tmp_path):
    data, schema = synth_files
    cfg = {"data_path": str(data), "schema_path": str(schema), "methods": ["standard", "ccral"],
           "K": 2, "repeats": 1, "classifier": {"loss_kind": "hinge"}}
    (tmp_path / "cfg.json").write_text(json.dumps(cfg))
    out = tmp_path / "r.json"
    assert main(["run", "--config", str(tmp_path / "cfg.json"), "--repeats", "2",
                 "--out", str(out)]) == EXIT_OK
    rep = load_report(out)
    assert rep["config"]["repeats"] == 2
    assert rep["config"]["classifier"]["loss_kind"] == "hinge"
    assert set(rep["methods"]) == {"standard", "ccral"}


def test_render_rows(full_report, capsys, tmp_path):
    text = render_report(full_report)
    rows = [l for l in text.splitlines() if l.split() and l.split()[0] in
            ("standard", "counterfactual", "ccral")]
    assert [r.split()[0] for r in rows] == ["standard", "counterfactual", "ccral"]

    partial = json.loads(dumps_report(full_report))
    del partial["methods"]["ccral"]
    text = render_report(partial)
    assert "ccral" not in text and "standard" in text

    (tmp_path / "r.json").write_text(dumps_report(full_report))
    assert main(["report", "--in", str(tmp_path / "r.json")]) == EXIT_OK
    assert "counterfactual" in capsys.readouterr().out


def test_tampered_aggregates_rejected(full_report, tmp_path):
    doc = json.loads(dumps_report(full_report))
    doc["methods"]["standard"]["aggregates"]["test_accuracy"]["mean"] += 1e-9
    with pytest.raises(MalformedReport):
        check_report(doc)
    (tmp_path / "bad.json").write_text(json.dumps(doc))
    assert main(["report", "--in", str(tmp_path / "bad.json")]) == EXIT_DATA
    (tmp_path / "junk.json").write_text("{not json")
    assert main(["report", "--in", str(tmp_path / "junk.json")]) == EXIT_DATA


def test_exit_codes(synth_files, tmp_path, capsys):
    data, schema = synth_files
    with pytest.raises(SystemExit) as info:
        main(["run", "--bogus"])
    assert info.value.code == EXIT_USAGE
    assert main(["run", "--data", str(data)]) == EXIT_USAGE
    assert main(["run", "--data", str(tmp_path / "missing.csv"), "--schema", str(schema)]) == EXIT_DATA
    (tmp_path / "bad.csv").write_text("x_1,T\n1,0\n")
    assert main(["run", "--data", str(tmp_path / "bad.csv"), "--schema", str(schema)]) == EXIT_DATA


def test_training_failures_are_recorded_per_repeat(synth_files, tmp_path):
    data, schema = synth_files
    cfg = {"data_path": str(data), "schema_path": str(schema), "methods": ["standard"],
           "repeats": 3, "classifier": {"learning_rate": 1e300}}
    (tmp_path / "cfg.json").write_text(json.dumps(cfg))
    out = tmp_path / "r.json"
    assert main(["run", "--config", str(tmp_path / "cfg.json"), "--out", str(out)]) == EXIT_TRAINING
    rep = json.loads(out.read_text())
    assert sorted(rep["errors"]) == ["0", "1", "2"]
    assert all(e["type"] == "DivergedLoss" for e in rep["errors"].values())


def test_builtin_schema_name_resolves(tmp_path):
    assert main(["run", "--data", str(tmp_path / "none.csv"), "--schema", "german"]) == EXIT_DATA
