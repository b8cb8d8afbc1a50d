# ensemble_reduction/cli.py
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from contextlib import contextmanager
from pathlib import Path
from typing import Any, Callable, Dict, Iterator, Optional, Sequence

import numpy as np
import pandas as pd

from . import io, sofm
from .calibration import prediction_bias
from .clustering import (
    DbscanParams,
    Labeling,
    cluster_oip_spread,
    compare_labelings,
    dbscan,
    equi_width_histogram,
)
from .config import ConfigError, load_config
from .genome import GENOME_LENGTH, enumerate_ensemble
from .metric import WeightedEuclidean
from .metrics import error_metrics
from .oilfield_synth import OipOracle, evaluate_ensemble, generate_gene_library
from .pipeline import ReductionConfig, draw_sample_ids, semi_supervised_reduce, train_test_split_ids
from .regress import (
    DEFAULT_FRACTIONS,
    REGRESSORS,
    load_model,
    sample_size_sweep,
    save_model,
    train_gb,
    train_regressor,
)

logger = logging.getLogger(__name__)

LOCK_NAME = ".lock"


@contextmanager
def output_lock(out_dir: Path) -> Iterator[Path]:
    """One process per output directory; an existing lock is an I/O error."""
    out_dir.mkdir(parents=True, exist_ok=True)
    lock = out_dir / LOCK_NAME
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError as e:
        raise OSError(f"Output directory {out_dir} is locked by another run ({lock})") from e
    try:
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)
        yield out_dir
    finally:
        lock.unlink(missing_ok=True)


def _parse_property_weights(s: Optional[str]) -> Optional[Dict[str, float]]:
    """'sw=2,ntg=1,phi=0.5' -> {"sw": 2.0, "ntg": 1.0, "phi": 0.5}"""
    if not s:
        return None
    out: Dict[str, float] = {}
    for part in s.split(","):
        key, sep, val = part.partition("=")
        if not sep:
            raise ValueError(f"Bad property weight {part!r}; expected name=value")
        try:
            out[key.strip()] = float(val)
        except ValueError as e:
            raise ValueError(f"Property weight for {key.strip()!r} is not a number: {val!r}") from e
    return out


def _ensemble_and_truth(cfg: ReductionConfig):
    lib = generate_gene_library(cfg.oilfield)
    ens = enumerate_ensemble(lib)
    oip = evaluate_ensemble(lib, cfg.oilfield)
    return lib, ens, oip


def _spread(labeling: Labeling, oip: np.ndarray) -> Dict[str, Any]:
    s = cluster_oip_spread(labeling, oip)
    return {"mean_range": s.mean_range, "n_clusters": int(len(s.table))}


def _cmd_generate(args: argparse.Namespace, cfg: ReductionConfig, out: Path) -> Dict[str, Any]:
    lib, ens, oip = _ensemble_and_truth(cfg)
    io.write_genomes(out / "genomes.csv", ens)
    io.write_labels(out / "labels.csv", oip)
    io.write_genes(out / "genes.csv", lib)
    io.write_plot_table(out, "allele_space", io.allele_space_table(ens.alleles, oip.to_numpy()))
    return {
        "n_models": len(ens),
        "n_genes": len(lib),
        "genome_length": GENOME_LENGTH,
        "oip_min": float(oip.min()),
        "oip_max": float(oip.max()),
    }


def _cmd_evaluate(args: argparse.Namespace, cfg: ReductionConfig, out: Path) -> Dict[str, Any]:
    lib = generate_gene_library(cfg.oilfield)
    oracle = OipOracle(lib, cfg.oilfield)
    if args.ids:
        ids = np.asarray(args.ids, dtype=np.int64)
        oip = pd.Series(oracle.evaluate_ids(ids), index=pd.Index(ids, name="id"), name="oip")
    else:
        oip = evaluate_ensemble(lib, cfg.oilfield, oracle=oracle)
    io.write_labels(out / "labels.csv", oip)
    return {"n_evaluated": int(len(oip)), "oip_min": float(oip.min()), "oip_max": float(oip.max())}


def _load_inputs(args: argparse.Namespace, cfg: ReductionConfig) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """ids, genomes and true OIP, from `generate` artifacts when given, otherwise regenerated."""
    genomes_path = getattr(args, "genomes", None)
    labels_path = getattr(args, "labels", None)
    if genomes_path and labels_path:
        ids, genomes = io.read_genomes(genomes_path)
        oip = io.read_labels(labels_path)
    else:
        _, ens, oip = _ensemble_and_truth(cfg)
        ids, genomes = ens.ids, ens.genomes
        if genomes_path:
            ids, genomes = io.read_genomes(genomes_path)
        if labels_path:
            oip = io.read_labels(labels_path)
    missing = np.setdiff1d(ids, oip.index.to_numpy())
    if missing.size:
        raise KeyError(f"No OIP for {missing.size} model id(s), first {int(missing[0])}")
    return ids, genomes, oip.reindex(ids).to_numpy()


def _cmd_cluster_histogram(args: argparse.Namespace, cfg: ReductionConfig, out: Path) -> Dict[str, Any]:
    ids, _, oip = _load_inputs(args, cfg)
    n_bins = args.bins or cfg.n_bins_reference
    hist = equi_width_histogram(oip, n_bins)
    io.write_clusters(out / "clusters.csv", ids, hist.labeling, extra={"bin": hist.bins})
    io.write_plot_table(out, "oip_histogram", io.oip_histogram_table(hist))
    io.write_plot_table(out, "id_oip", io.id_oip_table(ids, oip, hist.labeling))
    return {
        "n_bins": n_bins,
        "bin_width": hist.width,
        "occupied_bins": hist.labeling.n_clusters,
        "spread": _spread(hist.labeling, oip),
    }


def _cmd_cluster_dbscan(args: argparse.Namespace, cfg: ReductionConfig, out: Path) -> Dict[str, Any]:
    ids, X, oip = _load_inputs(args, cfg)
    params = DbscanParams(
        eps=args.eps if args.eps is not None else cfg.dbscan.eps,
        min_samples=args.min_samples if args.min_samples is not None else cfg.dbscan.min_samples,
    )
    weights = _parse_property_weights(args.property_weights)
    metric = WeightedEuclidean.from_property_weights(weights) if weights else None
    labeling = dbscan(X, params, metric)
    gold = equi_width_histogram(oip, cfg.n_bins_reference)
    io.write_clusters(out / "clusters.csv", ids, labeling)
    io.write_plot_table(out, "id_oip", io.id_oip_table(ids, oip, labeling))
    res: Dict[str, Any] = {
        "eps": params.eps,
        "min_samples": params.min_samples,
        "property_weights": weights,
        "n_clusters": labeling.n_clusters,
        "n_noise": labeling.n_noise,
        "rand_vs_gold": compare_labelings(labeling, gold.labeling),
    }
    if labeling.n_clusters:
        res["spread"] = _spread(labeling, oip)
    return res


def _cmd_fit_sofm(args: argparse.Namespace, cfg: ReductionConfig, out: Path) -> Dict[str, Any]:
    ids, X, oip = _load_inputs(args, cfg)
    grid = sofm.fit(X, cfg.sofm)
    neuron_of = sofm.bmu_indices(grid, X)
    labeling = Labeling.from_codes(neuron_of)
    gold = equi_width_histogram(oip, cfg.n_bins_reference)

    # neuron OIP is the regressor's prediction at each neuron's weight vector
    if args.model:
        model = load_model(args.model)
    else:
        sample = draw_sample_ids(len(ids), cfg.sample_fraction, cfg.seed)
        model = train_gb(X[sample], oip[sample], cfg.gb)
    table = sofm.neuron_oip(grid, model.predict)

    io.write_grid(out / "grid.csv", grid)
    io.write_clusters(out / "clusters.csv", ids, labeling, extra={"neuron": neuron_of})
    io.write_plot_table(out, "neuron_oip", io.neuron_table(table))
    io.write_plot_table(out, "id_oip", io.id_oip_table(ids, oip, labeling))
    return {
        "grid": [grid.height, grid.width],
        "occupied_neurons": labeling.n_clusters,
        "neuron_model": args.model or "gb_on_sample",
        "map_smoothness": sofm.map_smoothness(table),
        "rand_vs_gold": compare_labelings(labeling, gold.labeling),
        "spread": _spread(labeling, oip),
    }


def _cmd_train(args: argparse.Namespace, cfg: ReductionConfig, out: Path) -> Dict[str, Any]:
    _, ens, oip = _ensemble_and_truth(cfg)
    n = len(ens)
    if args.train_fraction is not None:
        if not 0 < args.train_fraction < 1:
            raise ValueError(f"--train-fraction must lie in (0, 1), got {args.train_fraction}")
        train_size = int(args.train_fraction * n)
    else:
        train_size = args.train_size or cfg.train_size
    train_ids, test_ids = train_test_split_ids(n, train_size, cfg.seed)

    y = oip.to_numpy()
    model = train_regressor(args.regressor, ens.genomes[train_ids], y[train_ids], cfg.gb)
    pred = np.asarray(model.predict(ens.genomes), dtype=float)
    errors = error_metrics(y[test_ids], pred[test_ids])
    oip_range = float(y[test_ids].max() - y[test_ids].min())

    save_model(model, out / f"model_{args.regressor}.json")
    in_sample = np.zeros(n, dtype=bool)
    in_sample[train_ids] = True
    io.write_plot_table(out, "predicted_vs_true", io.predicted_vs_true_table(ens.ids, y, pred, in_sample))
    res: Dict[str, Any] = {
        "regressor": args.regressor,
        "n_train": int(train_ids.size),
        "n_test": int(test_ids.size),
        "test_errors": errors.to_dict(),
        "test_oip_range": oip_range,
        "mae_fraction_of_range": errors.mae / oip_range if oip_range else float("nan"),
    }
    if test_ids.size >= 3:
        res["calibration"] = prediction_bias(y[test_ids], pred[test_ids])
    if hasattr(model, "train_loss"):
        res["final_train_loss"] = model.train_loss[-1]
    return res


def _cmd_sweep(args: argparse.Namespace, cfg: ReductionConfig, out: Path) -> Dict[str, Any]:
    _, ens, oip = _ensemble_and_truth(cfg)
    result = sample_size_sweep(
        ens.genomes,
        oip.to_numpy(),
        fractions=args.fractions or DEFAULT_FRACTIONS,
        repeats=args.repeats or cfg.sweep_repeats,
        regressor=args.regressor,
        params=cfg.gb,
        seed=cfg.seed,
        n_jobs=args.n_jobs,
    )
    io.write_sweep(out / "sweep.csv", result)
    summary = result.summary_frame()
    io.write_plot_table(out, "sweep_curve", summary)
    return {"regressor": result.regressor, "rows": summary.to_dict(orient="records")}


def _cmd_reduce(args: argparse.Namespace, cfg: ReductionConfig, out: Path) -> Dict[str, Any]:
    report = semi_supervised_reduce(cfg)
    io.write_json(out / "report.json", report.to_json_dict())
    ids = np.arange(len(report.labeling))
    io.write_clusters(out / "clusters.csv", ids, report.labeling, extra={"neuron": report.neuron_of})
    io.write_grid(out / "grid.csv", report.grid)
    io.write_csv(report.representative_table(), out / "representatives.csv")

    in_sample = np.zeros(len(ids), dtype=bool)
    in_sample[report.sample_ids] = True
    io.write_plot_table(out, "neuron_oip", io.neuron_table(report.neuron_predicted_oip))
    if report.true_oip is not None and report.gold is not None:
        io.write_plot_table(out, "oip_histogram", io.oip_histogram_table(report.gold))
        io.write_plot_table(out, "id_oip", io.id_oip_table(ids, report.true_oip, report.labeling))
        io.write_plot_table(
            out,
            "predicted_vs_true",
            io.predicted_vs_true_table(ids, report.true_oip, report.predicted_oip, in_sample),
        )
    return _report_summary(report.to_json_dict())


def _report_summary(d: Dict[str, Any]) -> Dict[str, Any]:
    keys = [
        "n_models",
        "sample_size",
        "n_clusters",
        "n_representatives",
        "rand_vs_gold",
        "rand_vs_euclidean_sofm",
        "euclidean_sofm_rand_vs_gold",
        "pred_histogram_rand_vs_gold",
        "holdout_errors",
        "map_smoothness",
    ]
    res = {k: d[k] for k in keys if k in d}
    spread = d.get("spread", {})
    res["mean_true_spread"] = {k: v["mean_range"] for k, v in spread.items()}
    if "calibration" in d:
        res["calibration_slope"] = next(
            (r for r in d["calibration"]["results"] if r["term"] == "true_oip"), None
        )
    return res


def _cmd_report(args: argparse.Namespace, cfg: ReductionConfig, out: Path) -> Dict[str, Any]:
    path = Path(args.report) if args.report else out / "report.json"
    with open(path, "r", encoding="utf-8-sig") as f:
        d = json.load(f)
    return _report_summary(d)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser("ensemble-reduction")
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name: str, fn: Callable[..., Dict[str, Any]], help: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help)
        p.add_argument("--config", default=None, help="Experiment JSON (default: built-in defaults).")
        p.add_argument("--out", default="out", help="Output directory; nothing is written elsewhere.")
        p.add_argument(
            "--log-level",
            default="WARNING",
            choices=["DEBUG", "INFO", "WARNING", "ERROR"],
            help="Log level for stderr diagnostics.",
        )
        p.set_defaults(func=fn)
        return p

    def inputs(p: argparse.ArgumentParser) -> None:
        p.add_argument("--genomes", default=None, help="genomes.csv from `generate` (default: regenerate).")
        p.add_argument("--labels", default=None, help="labels.csv from `generate` (default: evaluate all models).")

    add("generate", _cmd_generate, "Write genomes.csv, labels.csv and genes.csv for the whole ensemble.")
    p = add("evaluate", _cmd_evaluate, "Evaluate OIP for all models (or --ids) into labels.csv.")
    p.add_argument("--ids", nargs="*", type=int, default=None)
    p = add("cluster-histogram", _cmd_cluster_histogram, "Equi-width OIP histogram clustering.")
    inputs(p)
    p.add_argument("--bins", type=int, default=None, help="Number of bins (default: n_bins_reference).")
    p = add("cluster-dbscan", _cmd_cluster_dbscan, "DBSCAN on genomes.")
    inputs(p)
    p.add_argument("--eps", type=float, default=None)
    p.add_argument("--min-samples", type=int, default=None)
    p.add_argument("--property-weights", default=None, help="Weighted metric, e.g. sw=2,ntg=1,phi=1.")
    p = add("fit-sofm", _cmd_fit_sofm, "Unsupervised SOFM on genomes (Euclidean metric).")
    inputs(p)
    p.add_argument(
        "--model", default=None, help="Saved regressor for the neuron OIP table (default: GB trained on the sample)."
    )
    p = add("train", _cmd_train, "Train a regressor and score it on the remaining models.")
    p.add_argument("--regressor", choices=REGRESSORS, default="gb")
    p.add_argument("--train-size", type=int, default=None, help="Training models (default: config train_size).")
    p.add_argument("--train-fraction", type=float, default=None, help="Alternative to --train-size.")
    p = add("sweep", _cmd_sweep, "Training-fraction sweep into sweep.csv.")
    p.add_argument("--regressor", choices=REGRESSORS, default="gb")
    p.add_argument("--fractions", nargs="*", type=float, default=None)
    p.add_argument("--repeats", type=int, default=None)
    p.add_argument("--n-jobs", type=int, default=1, help="Parallel sweep cells (joblib).")
    add("reduce", _cmd_reduce, "Semi-supervised SOFM reduction into report.json.")
    p = add("report", _cmd_report, "Summarize an existing report.json.")
    p.add_argument("--report", default=None, help="Path to report.json (default: <out>/report.json).")
    return ap


def run_experiment(argv: Optional[Sequence[str]] = None) -> int:
    """Exit status: 0 ok, 1 domain error, 2 bad configuration, 3 I/O failure."""
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    logging.basicConfig(
        level=getattr(logging, args.log_level),
        stream=sys.stderr,
        format="%(asctime)s %(levelname)s %(name)s %(message)s",
    )
    try:
        cfg = load_config(args.config)
        out = Path(args.out)
        if args.command == "report":
            result = args.func(args, cfg, out)
        else:
            with output_lock(out):
                result = args.func(args, cfg, out)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 3
    except json.JSONDecodeError as e:
        print(f"error: malformed JSON: {e}", file=sys.stderr)
        return 2
    except (ValueError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1

    print(io.dumps_json({"command": args.command, "config": args.config, "result": result}))
    return 0


def main() -> None:
    raise SystemExit(run_experiment())


if __name__ == "__main__":
    main()
