# ensemble_reduction/oilfield_synth.py
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, Iterable, Mapping

import numpy as np
import pandas as pd

from .genome import (
    GENE_LENGTH,
    PROPERTIES,
    Alleles,
    Gene,
    GeneLibrary,
    alleles_to_id,
    check_alleles,
    ensemble_size,
)

logger = logging.getLogger(__name__)

EFFECTIVE_MIN = 0.01
EFFECTIVE_MAX = 0.99


def _default_bases() -> Dict[str, float]:
    return {"sw": 0.30, "ntg": 0.60, "phi": 0.20}


@dataclass(frozen=True)
class OilfieldConfig:
    seed: int = 42
    n_properties: int = 3
    n_alleles: int = 24
    knot_step_sigma: float = 0.05
    volume_constant: float = 1.9e9  # barrels
    property_bases: Mapping[str, float] = field(default_factory=_default_bases)
    base_jitter_sigma: float = 0.08

    def __post_init__(self) -> None:
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError(f"seed must be a non-negative 64-bit integer, got {self.seed}")
        if self.n_properties != len(PROPERTIES):
            raise ValueError(
                f"n_properties={self.n_properties} unsupported; the oracle is defined "
                f"over {len(PROPERTIES)} properties {PROPERTIES}"
            )
        if self.n_alleles < 1:
            raise ValueError(f"n_alleles must be >= 1, got {self.n_alleles}")
        if not self.knot_step_sigma > 0:
            raise ValueError(f"knot_step_sigma must be > 0, got {self.knot_step_sigma}")
        if self.base_jitter_sigma < 0:
            raise ValueError(f"base_jitter_sigma must be >= 0, got {self.base_jitter_sigma}")
        if not self.volume_constant > 0:
            raise ValueError(f"volume_constant must be > 0, got {self.volume_constant}")
        bases = dict(self.property_bases)
        if set(bases) != set(PROPERTIES):
            raise ValueError(f"property_bases must have exactly the keys {PROPERTIES}, got {sorted(bases)}")
        for k, v in bases.items():
            if not 0 < float(v) < 1:
                raise ValueError(f"property_bases[{k!r}]={v} must lie in (0, 1)")
        object.__setattr__(self, "property_bases", {p: float(bases[p]) for p in PROPERTIES})


@dataclass(frozen=True)
class EffectiveProperties:
    sw_eff: float
    ntg_eff: float
    phi_eff: float


@dataclass(frozen=True)
class OipLabel:
    id: int
    oip: float  # barrels


def gene_stream(seed: int, property_index: int, allele: int) -> np.random.Generator:
    """Counter-based stream owned by one (property, allele) gene."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, property_index, allele])))


def generate_gene_library(cfg: OilfieldConfig) -> GeneLibrary:
    """
    Every gene is a random walk over its knots: knot 0 is a per-gene base offset
    ~ N(0, base_jitter_sigma), each following knot adds N(0, knot_step_sigma).
    Draw j of the gene's own stream feeds knot j, so genes are independent of
    generation order.
    """
    knots = np.empty((len(PROPERTIES), cfg.n_alleles, GENE_LENGTH))
    for p in range(len(PROPERTIES)):
        for a in range(cfg.n_alleles):
            z = gene_stream(cfg.seed, p, a).standard_normal(GENE_LENGTH)
            walk = np.empty(GENE_LENGTH)
            walk[0] = cfg.base_jitter_sigma * z[0]
            walk[1:] = cfg.knot_step_sigma * z[1:]
            knots[p, a] = np.cumsum(walk)
    logger.debug("gene_library seed=%d n_alleles=%d", cfg.seed, cfg.n_alleles)
    return GeneLibrary(knots)


def effective_property(g: Gene, cfg: OilfieldConfig) -> float:
    v = cfg.property_bases[g.property] + float(np.mean(g.knots))
    return min(max(v, EFFECTIVE_MIN), EFFECTIVE_MAX)


def effective_properties(a: Alleles, lib: GeneLibrary, cfg: OilfieldConfig) -> EffectiveProperties:
    sw, ntg, phi = check_alleles(a, lib.n_alleles)
    return EffectiveProperties(
        sw_eff=effective_property(lib.gene("sw", sw), cfg),
        ntg_eff=effective_property(lib.gene("ntg", ntg), cfg),
        phi_eff=effective_property(lib.gene("phi", phi), cfg),
    )


def _volumetric(volume_constant, sw_eff, ntg_eff, phi_eff):
    # GRV/Bo folded into volume_constant
    return volume_constant * ntg_eff * phi_eff * (1.0 - sw_eff)


def oip_oracle(a: Alleles, lib: GeneLibrary, cfg: OilfieldConfig) -> OipLabel:
    eff = effective_properties(a, lib, cfg)
    oip = _volumetric(cfg.volume_constant, eff.sw_eff, eff.ntg_eff, eff.phi_eff)
    return OipLabel(id=alleles_to_id(a, lib.n_alleles), oip=float(oip))


class OipOracle:
    """
    Full evaluation of models by id. The effective property of each of the
    library's genes is computed once; every evaluation goes through
    `evaluate_ids`, so wrappers can observe exactly which models were read.
    """

    def __init__(self, lib: GeneLibrary, cfg: OilfieldConfig) -> None:
        self.lib = lib
        self.cfg = cfg
        self._effective = np.array(
            [[effective_property(lib.gene(p, a), cfg) for a in range(lib.n_alleles)] for p in PROPERTIES]
        )

    @property
    def n_models(self) -> int:
        return ensemble_size(self.lib.n_alleles)

    def evaluate_ids(self, ids: Iterable[int]) -> np.ndarray:
        ids = np.asarray(list(ids) if not isinstance(ids, np.ndarray) else ids, dtype=np.int64)
        if ids.size and (ids.min() < 0 or ids.max() >= self.n_models):
            raise ValueError(f"Model ids must lie in [0, {self.n_models - 1}]")
        n = self.lib.n_alleles
        sw, ntg, phi = np.unravel_index(ids, (n, n, n))
        return _volumetric(
            self.cfg.volume_constant,
            self._effective[0, sw],
            self._effective[1, ntg],
            self._effective[2, phi],
        )

    def __call__(self, a: Alleles) -> OipLabel:
        model_id = alleles_to_id(a, self.lib.n_alleles)
        return OipLabel(id=model_id, oip=float(self.evaluate_ids([model_id])[0]))


def evaluate_ensemble(
    lib: GeneLibrary,
    cfg: OilfieldConfig,
    *,
    oracle: OipOracle | None = None,
) -> pd.Series:
    """OIP of every model as a Series indexed by model id (ascending)."""
    oracle = oracle or OipOracle(lib, cfg)
    ids = np.arange(oracle.n_models, dtype=np.int64)
    oip = oracle.evaluate_ids(ids)
    logger.info("evaluate_ensemble n_models=%d oip_min=%.6g oip_max=%.6g", len(ids), oip.min(), oip.max())
    return pd.Series(oip, index=pd.Index(ids, name="id"), name="oip")
