# ensemble_reduction/io.py
from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Any, Iterable, Optional, Sequence, Union

import numpy as np
import pandas as pd

from .clustering import HistogramClustering, Labeling
from .genome import GENE_LENGTH, PROPERTIES, Ensemble, GeneLibrary
from .regress import SweepResult
from .sofm import SofmGrid

PathLike = Union[str, Path]


def read_table(path: PathLike) -> pd.DataFrame:
    p = Path(path)
    suf = p.suffix.lower()
    if suf in [".csv"]:
        return pd.read_csv(p, float_precision="round_trip")
    raise ValueError(f"Unsupported file type: {suf}. Expected .csv")


def _require(df: pd.DataFrame, cols: Iterable[str], path: PathLike) -> None:
    missing = [c for c in cols if c not in df.columns]
    if missing:
        raise KeyError(f"Column(s) not found in {path}: {missing}")


def write_csv(df: pd.DataFrame, path: PathLike) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    df.to_csv(path, index=False, float_format="%.17g", lineterminator="\n")


def _vector_columns(prefix: str, n: int) -> list[str]:
    return [f"{prefix}{i}" for i in range(n)]


# ---- genomes / labels ---------------------------------------------------


def write_genomes(path: PathLike, ens: Ensemble) -> None:
    """id,k0..k131 ordered by id."""
    df = pd.DataFrame(ens.genomes, columns=_vector_columns("k", ens.genomes.shape[1]))
    df.insert(0, "id", ens.ids)
    write_csv(df, path)


def read_genomes(path: PathLike) -> tuple[np.ndarray, np.ndarray]:
    df = read_table(path)
    _require(df, ["id", "k0"], path)
    cols = [c for c in df.columns if c.startswith("k")]
    return df["id"].to_numpy(dtype=np.int64), df[cols].to_numpy(dtype=float)


def write_genes(path: PathLike, lib: GeneLibrary) -> None:
    rows = [
        {"property": g.property, "allele": g.allele, **dict(zip(_vector_columns("k", GENE_LENGTH), g.knots))}
        for g in lib.genes()
    ]
    write_csv(pd.DataFrame(rows), path)


def write_labels(path: PathLike, oip: pd.Series) -> None:
    """id,oip"""
    write_csv(oip.rename("oip").rename_axis("id").reset_index(), path)


def read_labels(path: PathLike) -> pd.Series:
    df = read_table(path)
    _require(df, ["id", "oip"], path)
    return pd.Series(
        df["oip"].to_numpy(dtype=float),
        index=pd.Index(df["id"].to_numpy(dtype=np.int64), name="id"),
        name="oip",
    )


# ---- clusters / grid ----------------------------------------------------


def write_clusters(
    path: PathLike,
    ids: Sequence[int],
    labeling: Labeling,
    *,
    extra: Optional[dict[str, Sequence[Any]]] = None,
) -> None:
    """id,cluster[,extra...]; noise is -1."""
    df = pd.DataFrame({"id": np.asarray(ids, dtype=np.int64), "cluster": labeling.assignments})
    for name, values in (extra or {}).items():
        df[name] = np.asarray(values)
    write_csv(df, path)


def write_grid(path: PathLike, grid: SofmGrid) -> None:
    """row,col,w0..w{dim-1} in row-major neuron order."""
    coords = grid.coords().astype(np.int64)
    df = pd.DataFrame(grid.neurons(), columns=_vector_columns("w", grid.dim))
    df.insert(0, "col", coords[:, 1])
    df.insert(0, "row", coords[:, 0])
    write_csv(df, path)


def write_sweep(path: PathLike, result: SweepResult) -> None:
    """fraction,repeat,rmse"""
    write_csv(result.to_frame(), path)


# ---- JSON ---------------------------------------------------------------


def _json_safe(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _json_safe(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return None if not math.isfinite(float(obj)) else float(obj)
    return obj


def dumps_json(obj: Any) -> str:
    """Deterministic JSON: sorted keys, NaN/inf as null."""
    return json.dumps(_json_safe(obj), indent=2, sort_keys=True, allow_nan=False)


def write_json(path: PathLike, obj: Any) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(dumps_json(obj) + "\n")


# ---- plot data ----------------------------------------------------------


def oip_histogram_table(hist: HistogramClustering) -> pd.DataFrame:
    counts = hist.counts()
    return pd.DataFrame(
        {
            "bin": np.arange(hist.n_bins),
            "lower": hist.edges[:-1],
            "upper": hist.edges[1:],
            "count": counts,
        }
    )


def id_oip_table(ids: Sequence[int], oip: Sequence[float], labeling: Labeling) -> pd.DataFrame:
    """id-vs-OIP scatter with the cluster as colour index."""
    return pd.DataFrame({"id": np.asarray(ids), "oip": np.asarray(oip, dtype=float), "cluster": labeling.assignments})


def neuron_table(values: np.ndarray, name: str = "oip") -> pd.DataFrame:
    v = np.asarray(values, dtype=float)
    rows, cols = np.divmod(np.arange(v.size), v.shape[1])
    return pd.DataFrame({"row": rows, "col": cols, name: v.ravel()})


def predicted_vs_true_table(
    ids: Sequence[int], y_true: Sequence[float], y_pred: Sequence[float], in_sample: Sequence[bool]
) -> pd.DataFrame:
    return pd.DataFrame(
        {
            "id": np.asarray(ids),
            "true_oip": np.asarray(y_true, dtype=float),
            "predicted_oip": np.asarray(y_pred, dtype=float),
            "in_sample": np.asarray(in_sample, dtype=bool),
        }
    )


def allele_space_table(alleles: np.ndarray, oip: Sequence[float]) -> pd.DataFrame:
    df = pd.DataFrame(np.asarray(alleles, dtype=np.int64), columns=list(PROPERTIES))
    df["oip"] = np.asarray(oip, dtype=float)
    return df


def write_plot_table(out_dir: PathLike, name: str, df: pd.DataFrame) -> Path:
    path = Path(out_dir) / "plotdata" / f"{name}.csv"
    write_csv(df, path)
    return path
