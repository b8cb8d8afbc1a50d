# ensemble_reduction/__init__.py

from .genome import (
    Alleles,
    Ensemble,
    Gene,
    GeneLibrary,
    alleles_to_id,
    assemble_genome,
    enumerate_ensemble,
    id_to_alleles,
)
from .oilfield_synth import (
    OilfieldConfig,
    OipOracle,
    evaluate_ensemble,
    generate_gene_library,
    oip_oracle,
)
from .clustering import (
    DbscanParams,
    Labeling,
    cluster_oip_spread,
    compare_labelings,
    dbscan,
    equi_width_histogram,
)
from .sofm import SofmGrid, SofmParams, assign_clusters, best_matching_unit, fit
from .regress import (
    GbModel,
    MlpModel,
    SweepResult,
    TrainParams,
    huber_loss,
    predict_gb,
    predict_mlp,
    sample_size_sweep,
    train_gb,
    train_mlp,
)
from .metrics import error_metrics
from .calibration import prediction_bias
from .pipeline import ReductionConfig, ReductionReport, semi_supervised_reduce
from .config import ConfigError, load_config

__all__ = [
    "Alleles",
    "Ensemble",
    "Gene",
    "GeneLibrary",
    "alleles_to_id",
    "assemble_genome",
    "enumerate_ensemble",
    "id_to_alleles",
    "OilfieldConfig",
    "OipOracle",
    "evaluate_ensemble",
    "generate_gene_library",
    "oip_oracle",
    "DbscanParams",
    "Labeling",
    "cluster_oip_spread",
    "compare_labelings",
    "dbscan",
    "equi_width_histogram",
    "SofmGrid",
    "SofmParams",
    "assign_clusters",
    "best_matching_unit",
    "fit",
    "GbModel",
    "MlpModel",
    "SweepResult",
    "TrainParams",
    "huber_loss",
    "predict_gb",
    "predict_mlp",
    "sample_size_sweep",
    "train_gb",
    "train_mlp",
    "error_metrics",
    "prediction_bias",
    "ReductionConfig",
    "ReductionReport",
    "semi_supervised_reduce",
    "ConfigError",
    "load_config",
]
