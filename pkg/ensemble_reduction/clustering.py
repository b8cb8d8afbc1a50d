# ensemble_reduction/clustering.py
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Sequence, Union

import numpy as np
import pandas as pd

from .contingency import NOISE, build_contingency
from .metric import Metric, as_metric

logger = logging.getLogger(__name__)

_UNASSIGNED = -2
_BLOCK = 512


@dataclass(frozen=True, eq=False)
class Labeling:
    """
    Cluster id per model (aligned with model ids). Non-noise ids form the
    contiguous range 0..n_clusters-1; NOISE is -1.
    """

    assignments: np.ndarray

    def __post_init__(self) -> None:
        a = np.array(self.assignments, dtype=np.int64, copy=True)
        if a.ndim != 1:
            raise ValueError(f"Labeling must be 1-D, got shape {a.shape}")
        if a.size and a.min() < NOISE:
            raise ValueError(f"Cluster ids must be >= 0 or NOISE ({NOISE})")
        used = np.unique(a[a != NOISE])
        if used.size and not np.array_equal(used, np.arange(used.size)):
            raise ValueError("Non-noise cluster ids must form a contiguous range starting at 0")
        a.setflags(write=False)
        object.__setattr__(self, "assignments", a)

    @classmethod
    def from_codes(cls, codes: Sequence[int]) -> Labeling:
        """Relabel arbitrary non-negative codes by ascending code value; NOISE kept."""
        codes = np.asarray(codes, dtype=np.int64)
        out = np.full(codes.shape, NOISE, dtype=np.int64)
        keep = codes != NOISE
        _, dense = np.unique(codes[keep], return_inverse=True)
        out[keep] = dense
        return cls(out)

    def __len__(self) -> int:
        return int(self.assignments.size)

    @property
    def n_clusters(self) -> int:
        a = self.assignments
        return int(a.max() + 1) if (a != NOISE).any() else 0

    @property
    def n_noise(self) -> int:
        return int((self.assignments == NOISE).sum())

    def cluster_sizes(self) -> np.ndarray:
        a = self.assignments
        return np.bincount(a[a != NOISE], minlength=self.n_clusters)

    def members(self, cluster: int) -> np.ndarray:
        return np.flatnonzero(self.assignments == cluster)

    def equals(self, other: Labeling) -> bool:
        return np.array_equal(self.assignments, other.assignments)


LabelsLike = Union[Labeling, Sequence[int], np.ndarray]


def _assignments(x: LabelsLike) -> np.ndarray:
    return x.assignments if isinstance(x, Labeling) else np.asarray(x, dtype=np.int64)


@dataclass(frozen=True)
class DbscanParams:
    eps: float = 0.6
    min_samples: int = 10

    def __post_init__(self) -> None:
        if not self.eps > 0:
            raise ValueError(f"eps must be > 0, got {self.eps}")
        if self.min_samples < 1:
            raise ValueError(f"min_samples must be >= 1, got {self.min_samples}")


@dataclass(frozen=True, eq=False)
class HistogramClustering:
    """
    `bins` is the raw bin index of every value; `labeling` renumbers the
    occupied bins contiguously in ascending bin order.
    """

    n_bins: int
    edges: np.ndarray
    bins: np.ndarray
    labeling: Labeling

    @property
    def width(self) -> float:
        return float((self.edges[-1] - self.edges[0]) / self.n_bins)

    def counts(self) -> np.ndarray:
        return np.bincount(self.bins, minlength=self.n_bins)


def equi_width_histogram(values: Sequence[float], n_bins: int = 64) -> HistogramClustering:
    v = np.asarray(values, dtype=float)
    if v.ndim != 1 or v.size == 0:
        raise ValueError("Histogram needs a non-empty 1-D sequence of values.")
    if n_bins < 1:
        raise ValueError(f"n_bins must be >= 1, got {n_bins}")
    lo, hi = float(v.min()), float(v.max())
    if hi == lo and n_bins > 1:
        raise ValueError(f"All values equal ({lo}); cannot build {n_bins} bins of positive width.")

    edges = np.linspace(lo, hi, n_bins + 1)
    # top value joins the last bin
    bins = np.clip(np.searchsorted(edges, v, side="right") - 1, 0, n_bins - 1)
    return HistogramClustering(
        n_bins=n_bins,
        edges=edges,
        bins=bins,
        labeling=Labeling.from_codes(bins),
    )


def neighbour_counts(points: np.ndarray, eps: float, metric: Metric) -> np.ndarray:
    """Size of every point's eps-neighbourhood (self included), block by block."""
    counts = np.empty(len(points), dtype=np.int64)
    for start in range(0, len(points), _BLOCK):
        d = metric.pairwise(points[start : start + _BLOCK], points)
        counts[start : start + _BLOCK] = (d <= eps).sum(axis=1)
    return counts


def dbscan(
    points: Sequence[Sequence[float]],
    params: DbscanParams = DbscanParams(),
    metric: Metric | Callable[[np.ndarray, np.ndarray], float] | None = None,
) -> Labeling:
    """
    Classic DBSCAN. Clusters are numbered by their first core point in input
    order; a border point joins the first cluster that reaches it.

    Only per-point counts and core flags are stored; neighbourhoods are
    recomputed for each block of the expansion frontier.
    """
    X = np.asarray(points, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if len(X) == 0:
        raise ValueError("dbscan needs at least one point.")
    m = as_metric(metric)

    core = neighbour_counts(X, params.eps, m) >= params.min_samples

    labels = np.full(len(X), _UNASSIGNED, dtype=np.int64)
    cluster = 0
    for i in np.flatnonzero(core):
        if labels[i] != _UNASSIGNED:
            continue
        labels[i] = cluster
        frontier = np.array([i], dtype=np.int64)
        while frontier.size:
            batch, frontier = frontier[:_BLOCK], frontier[_BLOCK:]
            reached = (m.pairwise(X[batch], X) <= params.eps).any(axis=0)
            new = reached & (labels == _UNASSIGNED)
            labels[new] = cluster
            frontier = np.concatenate([frontier, np.flatnonzero(new & core)])
        cluster += 1

    labels[labels == _UNASSIGNED] = NOISE
    out = Labeling(labels)
    logger.info(
        "dbscan n=%d eps=%g min_samples=%d clusters=%d noise=%d",
        len(X), params.eps, params.min_samples, out.n_clusters, out.n_noise,
    )
    return out


@dataclass(frozen=True)
class ClusterSpread:
    table: pd.DataFrame  # cluster, size, min, max, range
    mean_range: float  # size-weighted, noise excluded


def cluster_oip_spread(labeling: LabelsLike, oip: Sequence[float]) -> ClusterSpread:
    a = _assignments(labeling)
    y = np.asarray(oip, dtype=float)
    if a.shape != y.shape:
        raise ValueError(f"Labeling ({a.size}) and OIP ({y.size}) lengths differ")
    df = pd.DataFrame({"cluster": a, "oip": y})
    df = df[df["cluster"] != NOISE]
    if df.empty:
        raise ValueError("Labeling has no non-noise clusters.")

    table = df.groupby("cluster")["oip"].agg(size="size", min="min", max="max").reset_index()
    table["range"] = table["max"] - table["min"]
    mean_range = float((table["range"] * table["size"]).sum() / table["size"].sum())
    return ClusterSpread(table=table, mean_range=mean_range)


def compare_labelings(a: LabelsLike, b: LabelsLike) -> float:
    """Rand index; NOISE points count as singleton clusters."""
    ct = build_contingency(_assignments(a), _assignments(b))
    pc = ct.pair_counts()
    if pc.total == 0:
        return 1.0
    return pc.agreeing / pc.total
