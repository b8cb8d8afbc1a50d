import json

import numpy as np
import pandas as pd
import pytest

from ensemble_reduction import io
from ensemble_reduction.clustering import Labeling
from ensemble_reduction.contingency import NOISE
from ensemble_reduction.genome import enumerate_ensemble
from ensemble_reduction.oilfield_synth import OilfieldConfig, evaluate_ensemble, generate_gene_library
from ensemble_reduction.sofm import SofmGrid


@pytest.fixture
def small():
    cfg = OilfieldConfig(n_alleles=4)
    lib = generate_gene_library(cfg)
    return lib, enumerate_ensemble(lib), evaluate_ensemble(lib, cfg)


def test_genomes_and_labels_read_back(tmp_path, small):
    _, ens, oip = small
    io.write_genomes(tmp_path / "genomes.csv", ens)
    io.write_labels(tmp_path / "labels.csv", oip)
    ids, genomes = io.read_genomes(tmp_path / "genomes.csv")
    assert np.array_equal(ids, ens.ids)
    assert np.array_equal(genomes, ens.genomes)
    assert io.read_labels(tmp_path / "labels.csv").equals(oip)


def test_csv_uses_unix_newlines(tmp_path, small):
    _, _, oip = small
    io.write_labels(tmp_path / "sub" / "labels.csv", oip)
    raw = (tmp_path / "sub" / "labels.csv").read_bytes()
    assert b"\r\n" not in raw
    assert raw.startswith(b"id,oip\n")


def test_clusters_keep_written_order_and_extra_columns(tmp_path):
    lab = Labeling(np.array([1, 0, NOISE, 1]))
    io.write_clusters(tmp_path / "c.csv", [3, 2, 1, 0], lab, extra={"neuron": [7, 2, 5, 7]})
    df = pd.read_csv(tmp_path / "c.csv")
    assert list(df.columns) == ["id", "cluster", "neuron"]
    assert list(df["id"]) == [3, 2, 1, 0]
    assert list(df["cluster"]) == [1, 0, NOISE, 1]


def test_grid_rows_are_row_major(tmp_path):
    grid = SofmGrid(np.random.default_rng(0).normal(size=(2, 3, 5)))
    io.write_grid(tmp_path / "grid.csv", grid)
    df = io.read_table(tmp_path / "grid.csv")
    assert list(df.columns) == ["row", "col", "w0", "w1", "w2", "w3", "w4"]
    assert list(df["row"]) == [0, 0, 0, 1, 1, 1]
    assert list(df["col"]) == [0, 1, 2, 0, 1, 2]
    assert np.array_equal(df[[f"w{i}" for i in range(5)]].to_numpy(), grid.neurons())


def test_missing_column_is_a_key_error(tmp_path):
    pd.DataFrame({"id": [0]}).to_csv(tmp_path / "labels.csv", index=False)
    with pytest.raises(KeyError):
        io.read_labels(tmp_path / "labels.csv")


def test_dumps_json_is_sorted_and_nan_safe():
    text = io.dumps_json({"b": np.float64("nan"), "a": np.int64(3), "c": np.arange(2)})
    assert json.loads(text) == {"a": 3, "b": None, "c": [0, 1]}
    assert text.index('"a"') < text.index('"b"')


def test_plot_tables(tmp_path, small):
    _, ens, oip = small
    path = io.write_plot_table(tmp_path, "allele_space", io.allele_space_table(ens.alleles, oip.to_numpy()))
    df = pd.read_csv(path)
    assert list(df.columns) == ["sw", "ntg", "phi", "oip"]
    assert len(df) == 64
    table = io.neuron_table(np.arange(6.0).reshape(2, 3))
    assert list(table.loc[4]) == [1, 1, 4.0]
