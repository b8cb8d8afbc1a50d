# ensemble_reduction/pipeline.py
from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Any, Callable, Dict, Optional

import numpy as np
import pandas as pd

from . import sofm
from .calibration import prediction_bias
from .clustering import (
    DbscanParams,
    HistogramClustering,
    Labeling,
    cluster_oip_spread,
    compare_labelings,
    equi_width_histogram,
)
from .genome import PROPERTIES, GeneLibrary, enumerate_ensemble
from .metric import PredictedOipMetric
from .metrics import error_metrics
from .oilfield_synth import OilfieldConfig, OipOracle, generate_gene_library
from .regress import GbModel, TrainParams, train_gb
from .sofm import SofmGrid, SofmParams

logger = logging.getLogger(__name__)

_SAMPLE_STREAM = 1

OracleFactory = Callable[[GeneLibrary, OilfieldConfig], Any]


@dataclass(frozen=True)
class ReductionConfig:
    sample_fraction: float = 0.15
    oilfield: OilfieldConfig = field(default_factory=OilfieldConfig)
    gb: TrainParams = field(default_factory=TrainParams)
    sofm: SofmParams = field(default_factory=SofmParams)
    dbscan: DbscanParams = field(default_factory=DbscanParams)
    n_bins_reference: int = 64
    seed: int = 42
    train_size: int = 2000
    sweep_repeats: int = 5

    def __post_init__(self) -> None:
        if not 0 < self.sample_fraction < 1:
            raise ValueError(f"sample_fraction must lie in (0, 1), got {self.sample_fraction}")
        if self.n_bins_reference < 1:
            raise ValueError(f"n_bins_reference must be >= 1, got {self.n_bins_reference}")
        if self.train_size < 1:
            raise ValueError(f"train_size must be >= 1, got {self.train_size}")
        if self.sweep_repeats < 1:
            raise ValueError(f"sweep_repeats must be >= 1, got {self.sweep_repeats}")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError(f"seed must be a non-negative 64-bit integer, got {self.seed}")

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def sample_size(n_models: int, fraction: float) -> int:
    return int(math.floor(fraction * n_models))


def _draw_ids(n_models: int, k: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), _SAMPLE_STREAM]))
    return np.sort(rng.choice(n_models, size=k, replace=False)).astype(np.int64)


def draw_sample_ids(n_models: int, fraction: float, seed: int) -> np.ndarray:
    """Seeded sample of model ids without replacement, ascending."""
    k = sample_size(n_models, fraction)
    if k < 2:
        raise ValueError(f"sample_fraction={fraction} gives {k} of {n_models} models; at least 2 are needed")
    return _draw_ids(n_models, k, seed)


def select_representatives(labeling: Labeling, predicted: np.ndarray) -> pd.DataFrame:
    """
    One model per occupied cluster: the member whose prediction is closest
    to the cluster's median prediction, lowest id on ties.
    """
    pred = np.asarray(predicted, dtype=float)
    rows = []
    for c in range(labeling.n_clusters):
        members = labeling.members(c)
        if members.size == 0:
            continue
        p = pred[members]
        gap = np.abs(p - np.median(p))
        pick = members[np.flatnonzero(gap == gap.min())[0]]
        rows.append({"id": int(pick), "cluster": c, "predicted_oip": float(pred[pick])})
    return pd.DataFrame(rows, columns=["id", "cluster", "predicted_oip"])


def _spread_records(labeling: Labeling | np.ndarray, values: np.ndarray) -> Dict[str, Any]:
    s = cluster_oip_spread(labeling, values)
    return {"mean_range": s.mean_range, "clusters": s.table.to_dict(orient="records")}


@dataclass(eq=False)
class ReductionReport:
    """
    Result of one reduction run. Fields filled from true OIP (`true_oip`,
    the comparisons and calibration) are None when the run was blind.
    """

    config: ReductionConfig
    sample_ids: np.ndarray
    labeling: Labeling
    neuron_of: np.ndarray
    representatives: pd.DataFrame
    predicted_oip: np.ndarray
    predicted_spread: Dict[str, Any]
    grid: SofmGrid
    model: GbModel
    alleles: np.ndarray
    neuron_predicted_oip: np.ndarray
    true_oip: Optional[np.ndarray] = None
    gold: Optional[HistogramClustering] = None
    euclidean_labeling: Optional[Labeling] = None
    euclidean_grid: Optional[SofmGrid] = None
    comparisons: Dict[str, Any] = field(default_factory=dict)

    @property
    def n_representatives(self) -> int:
        return len(self.representatives)

    def representative_table(self) -> pd.DataFrame:
        """Representatives with their alleles: id, cluster, predicted_oip, sw, ntg, phi."""
        out = self.representatives.copy()
        ids = out["id"].to_numpy(dtype=np.int64)
        for i, p in enumerate(PROPERTIES):
            out[p] = self.alleles[ids, i]
        return out

    def to_json_dict(self) -> Dict[str, Any]:
        d: Dict[str, Any] = {
            "config": self.config.to_dict(),
            "n_models": int(len(self.labeling)),
            "sample_size": int(self.sample_ids.size),
            "sample_ids": self.sample_ids.tolist(),
            "n_clusters": self.labeling.n_clusters,
            "n_representatives": self.n_representatives,
            "representatives": self.representative_table().to_dict(orient="records"),
            "predicted_spread": self.predicted_spread,
        }
        d.update(self.comparisons)
        return d


def euclidean_sofm_baseline(genomes: np.ndarray, params: SofmParams) -> tuple[SofmGrid, Labeling]:
    """Unsupervised SOFM on raw genomes (Euclidean metric)."""
    grid = sofm.fit(genomes, params)
    return grid, sofm.assign_clusters(grid, genomes)


def _compare_to_truth(
    report: ReductionReport,
    cfg: ReductionConfig,
    genomes: np.ndarray,
    true_oip: np.ndarray,
) -> None:
    pred = report.predicted_oip
    gold = equi_width_histogram(true_oip, cfg.n_bins_reference)
    pred_hist = equi_width_histogram(pred, cfg.n_bins_reference)
    e_grid, e_labels = euclidean_sofm_baseline(genomes, cfg.sofm)

    holdout = np.ones(len(true_oip), dtype=bool)
    holdout[report.sample_ids] = False
    errors = error_metrics(true_oip[holdout], pred[holdout])
    oip_range = float(true_oip[holdout].max() - true_oip[holdout].min())

    report.true_oip = true_oip
    report.gold = gold
    report.euclidean_grid = e_grid
    report.euclidean_labeling = e_labels
    report.comparisons = {
        "rand_vs_gold": compare_labelings(report.labeling, gold.labeling),
        "rand_vs_euclidean_sofm": compare_labelings(report.labeling, e_labels),
        "euclidean_sofm_rand_vs_gold": compare_labelings(e_labels, gold.labeling),
        "pred_histogram_rand_vs_gold": compare_labelings(pred_hist.labeling, gold.labeling),
        "spread": {
            "semi_supervised": _spread_records(report.labeling, true_oip),
            "euclidean_sofm": _spread_records(e_labels, true_oip),
            "gold_histogram": _spread_records(gold.labeling, true_oip),
            "pred_histogram": _spread_records(pred_hist.labeling, true_oip),
        },
        "holdout_errors": {**errors.to_dict(), "oip_range": oip_range, "n": int(holdout.sum())},
        "calibration": prediction_bias(true_oip[holdout], pred[holdout]),
        "map_smoothness": {
            "semi_supervised": sofm.map_smoothness(report.neuron_predicted_oip),
            "euclidean_sofm": sofm.map_smoothness(sofm.neuron_oip(e_grid, report.model.predict)),
        },
    }


def semi_supervised_reduce(
    cfg: ReductionConfig = ReductionConfig(),
    *,
    oracle_factory: OracleFactory = OipOracle,
    evaluate_truth: bool = True,
) -> ReductionReport:
    """
    Reduce the ensemble to at most one representative per SOFM neuron.

    A GB regressor trained on a random sample stands in for the OIP oracle;
    the SOFM then clusters all genomes under |g(x) - g(y)|. The oracle sees
    only the sample until clustering is done. With `evaluate_truth` the whole
    ensemble is evaluated afterwards for the report comparisons.
    """
    lib = generate_gene_library(cfg.oilfield)
    ens = enumerate_ensemble(lib)
    X = ens.genomes
    n = len(ens)

    sample_ids = draw_sample_ids(n, cfg.sample_fraction, cfg.seed)
    oracle = oracle_factory(lib, cfg.oilfield)
    y_sample = np.asarray(oracle.evaluate_ids(sample_ids), dtype=float)
    logger.info("reduce_sample n_models=%d sample=%d", n, sample_ids.size)

    model = train_gb(X[sample_ids], y_sample, cfg.gb)
    predicted = np.asarray(model.predict(X), dtype=float)

    metric = PredictedOipMetric(model.predict)
    grid = sofm.fit(X, cfg.sofm, metric)
    neuron_of = sofm.bmu_indices(grid, X, metric)
    labeling = Labeling.from_codes(neuron_of)
    reps = select_representatives(labeling, predicted)
    logger.info("reduce_cluster clusters=%d representatives=%d", labeling.n_clusters, len(reps))

    report = ReductionReport(
        config=cfg,
        sample_ids=sample_ids,
        labeling=labeling,
        neuron_of=neuron_of,
        representatives=reps,
        predicted_oip=predicted,
        predicted_spread=_spread_records(labeling, predicted),
        grid=grid,
        model=model,
        alleles=ens.alleles,
        neuron_predicted_oip=sofm.neuron_oip(grid, model.predict),
    )
    if evaluate_truth:
        true_oip = np.asarray(oracle.evaluate_ids(ens.ids), dtype=float)
        _compare_to_truth(report, cfg, X, true_oip)
        logger.info(
            "reduce_report rand_vs_gold=%.6f euclidean_rand_vs_gold=%.6f",
            report.comparisons["rand_vs_gold"],
            report.comparisons["euclidean_sofm_rand_vs_gold"],
        )
    return report


def train_test_split_ids(n_models: int, train_size: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """
    Seeded split into `train_size` training ids and the remaining test ids,
    both ascending. The training ids are drawn exactly as the reduction
    sample, so a split of the same size yields the same ids.
    """
    if not 1 <= train_size < n_models:
        raise ValueError(f"train_size must lie in [1, {n_models - 1}], got {train_size}")
    train = _draw_ids(n_models, train_size, seed)
    return train, np.setdiff1d(np.arange(n_models, dtype=np.int64), train)


