import json

import numpy as np
import pandas as pd
import pytest

from ensemble_reduction.cli import LOCK_NAME, run_experiment
from ensemble_reduction.regress import load_model

SMALL = {
    "seed": 42,
    "n_bins_reference": 8,
    "train_size": 40,
    "sweep_repeats": 2,
    "oilfield": {"n_alleles": 6},
    "gb": {"n_stages": 5},
    "sofm": {"width": 3, "height": 3, "epochs": 1},
    "dbscan": {"eps": 0.6, "min_samples": 3},
}


@pytest.fixture
def config(tmp_path):
    path = tmp_path / "small.json"
    path.write_text(json.dumps(SMALL), encoding="utf-8")
    return str(path)


def _run(capsys, *argv):
    code = run_experiment(list(argv))
    out = capsys.readouterr().out
    return code, (json.loads(out) if code == 0 else None)


def test_generate_writes_tables(tmp_path, config, capsys):
    out = tmp_path / "out"
    code, doc = _run(capsys, "generate", "--config", config, "--out", str(out))
    assert code == 0
    assert doc["command"] == "generate"
    assert doc["result"]["n_models"] == 216
    assert len(pd.read_csv(out / "genomes.csv")) == 216
    assert len(pd.read_csv(out / "labels.csv")) == 216
    assert len(pd.read_csv(out / "genes.csv")) == 18
    assert (out / "plotdata" / "allele_space.csv").exists()
    assert not (out / LOCK_NAME).exists()


def test_evaluate_selected_ids(tmp_path, config, capsys):
    out = tmp_path / "out"
    code, doc = _run(capsys, "evaluate", "--config", config, "--out", str(out), "--ids", "0", "5", "215")
    assert code == 0
    labels = pd.read_csv(out / "labels.csv")
    assert list(labels["id"]) == [0, 5, 215]
    assert doc["result"]["n_evaluated"] == 3


def test_evaluate_out_of_range_id_is_a_domain_error(tmp_path, config, capsys):
    code, _ = _run(capsys, "evaluate", "--config", config, "--out", str(tmp_path), "--ids", "216")
    assert code == 1


def test_cluster_histogram(tmp_path, config, capsys):
    out = tmp_path / "out"
    code, doc = _run(capsys, "cluster-histogram", "--config", config, "--out", str(out), "--bins", "4")
    assert code == 0
    clusters = pd.read_csv(out / "clusters.csv")
    assert len(clusters) == 216
    assert clusters["bin"].between(0, 3).all()
    assert doc["result"]["n_bins"] == 4


def test_cluster_dbscan_with_property_weights(tmp_path, config, capsys):
    out = tmp_path / "out"
    code, doc = _run(
        capsys, "cluster-dbscan", "--config", config, "--out", str(out), "--property-weights", "sw=1,ntg=0,phi=0"
    )
    assert code == 0
    assert doc["result"]["property_weights"] == {"sw": 1.0, "ntg": 0.0, "phi": 0.0}
    assert len(pd.read_csv(out / "clusters.csv")) == 216


def test_bad_property_weights(tmp_path, config, capsys):
    code, _ = _run(capsys, "cluster-dbscan", "--config", config, "--out", str(tmp_path), "--property-weights", "sw")
    assert code == 1


def test_fit_sofm(tmp_path, config, capsys):
    out = tmp_path / "out"
    code, doc = _run(capsys, "fit-sofm", "--config", config, "--out", str(out))
    assert code == 0
    assert doc["result"]["grid"] == [3, 3]
    assert 1 <= doc["result"]["occupied_neurons"] <= 9
    assert (out / "grid.csv").exists()


def test_fit_sofm_neuron_table_is_model_prediction(tmp_path, config, capsys):
    trained, mapped = tmp_path / "trained", tmp_path / "mapped"
    assert _run(capsys, "train", "--config", config, "--out", str(trained))[0] == 0
    model_path = trained / "model_gb.json"
    code, doc = _run(capsys, "fit-sofm", "--config", config, "--out", str(mapped), "--model", str(model_path))
    assert code == 0
    assert doc["result"]["neuron_model"] == str(model_path)

    grid = pd.read_csv(mapped / "grid.csv", float_precision="round_trip").sort_values(["row", "col"])
    weights = grid[[c for c in grid.columns if c.startswith("w")]].to_numpy()
    table = pd.read_csv(mapped / "plotdata" / "neuron_oip.csv", float_precision="round_trip")
    expected = load_model(model_path).predict(weights)
    assert np.allclose(table["oip"].to_numpy(), expected, rtol=1e-12, atol=0.0)


def test_fit_sofm_defaults_to_gb_on_the_sample(tmp_path, config, capsys):
    code, doc = _run(capsys, "fit-sofm", "--config", config, "--out", str(tmp_path / "out"))
    assert code == 0
    assert doc["result"]["neuron_model"] == "gb_on_sample"
    assert doc["result"]["map_smoothness"] >= 0.0


def test_cluster_commands_read_generated_tables(tmp_path, config, capsys):
    gen, given, fresh = tmp_path / "gen", tmp_path / "given", tmp_path / "fresh"
    assert _run(capsys, "generate", "--config", config, "--out", str(gen))[0] == 0
    inputs = ["--genomes", str(gen / "genomes.csv"), "--labels", str(gen / "labels.csv")]
    for cmd in ("cluster-histogram", "cluster-dbscan"):
        assert _run(capsys, cmd, "--config", config, "--out", str(given / cmd), *inputs)[0] == 0
        assert _run(capsys, cmd, "--config", config, "--out", str(fresh / cmd))[0] == 0
        assert (given / cmd / "clusters.csv").read_bytes() == (fresh / cmd / "clusters.csv").read_bytes()


def test_labels_missing_models_is_a_domain_error(tmp_path, config, capsys):
    part = tmp_path / "part"
    assert _run(capsys, "evaluate", "--config", config, "--out", str(part), "--ids", "0", "5")[0] == 0
    labels = str(part / "labels.csv")
    code, _ = _run(capsys, "cluster-histogram", "--config", config, "--out", str(tmp_path / "out"), "--labels", labels)
    assert code == 1


def test_train_and_reload(tmp_path, config, capsys):
    out = tmp_path / "out"
    code, doc = _run(capsys, "train", "--config", config, "--out", str(out))
    assert code == 0
    res = doc["result"]
    assert res["n_train"] == 40 and res["n_test"] == 176
    assert (out / "model_gb.json").exists()
    assert (out / "plotdata" / "predicted_vs_true.csv").exists()


@pytest.mark.parametrize("fraction", ["0", "1.5"])
def test_bad_train_fraction(tmp_path, config, capsys, fraction):
    code, _ = _run(capsys, "train", "--config", config, "--out", str(tmp_path), "--train-fraction", fraction)
    assert code == 1


def test_sweep_rows(tmp_path, config, capsys):
    out = tmp_path / "out"
    code, doc = _run(capsys, "sweep", "--config", config, "--out", str(out), "--fractions", "0.2", "0.5")
    assert code == 0
    sweep = pd.read_csv(out / "sweep.csv")
    assert len(sweep) == 2 * 2
    assert [r["fraction"] for r in doc["result"]["rows"]] == [0.2, 0.5]


def test_reduce_is_byte_deterministic(tmp_path, config, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    assert _run(capsys, "reduce", "--config", config, "--out", str(a))[0] == 0
    assert _run(capsys, "reduce", "--config", config, "--out", str(b))[0] == 0
    assert (a / "report.json").read_bytes() == (b / "report.json").read_bytes()
    reps = pd.read_csv(a / "representatives.csv")
    assert 1 <= len(reps) <= 9

    code, doc = _run(capsys, "report", "--out", str(a))
    assert code == 0
    assert doc["result"]["n_representatives"] == len(reps)
    assert doc["result"]["n_models"] == 216


def test_malformed_config(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text("{not json", encoding="utf-8")
    code, _ = _run(capsys, "generate", "--config", str(path), "--out", str(tmp_path / "out"))
    assert code == 2


def test_unknown_config_key(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"sofm": {"width": 3, "colour": "red"}}), encoding="utf-8")
    code, _ = _run(capsys, "generate", "--config", str(path), "--out", str(tmp_path / "out"))
    assert code == 2


def test_config_with_bom_is_accepted(tmp_path, capsys):
    path = tmp_path / "bom.json"
    path.write_bytes(b"\xef\xbb\xbf" + json.dumps(SMALL).encode("utf-8"))
    code, _ = _run(capsys, "generate", "--config", str(path), "--out", str(tmp_path / "out"))
    assert code == 0


def test_unknown_subcommand(capsys):
    assert run_experiment(["shuffle"]) == 2


def test_held_lock_is_an_io_error(tmp_path, config, capsys):
    out = tmp_path / "out"
    out.mkdir()
    (out / LOCK_NAME).write_text("123", encoding="utf-8")
    code, _ = _run(capsys, "generate", "--config", config, "--out", str(out))
    assert code == 3
    assert not (out / "genomes.csv").exists()


def test_missing_report_is_an_io_error(tmp_path, capsys):
    code, _ = _run(capsys, "report", "--out", str(tmp_path / "nowhere"))
    assert code == 3


@pytest.mark.slow
def test_full_default_sweep(tmp_path, capsys):
    out = tmp_path / "out"
    code, _ = _run(capsys, "sweep", "--out", str(out), "--n-jobs", "-1")
    assert code == 0
    assert len(pd.read_csv(out / "sweep.csv")) == 16 * 5
