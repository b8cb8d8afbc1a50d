# ensemble_reduction/sofm.py
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .clustering import Labeling
from .metric import Metric, as_metric

logger = logging.getLogger(__name__)

# Stream keys: init sampling and presentation order draw from separate streams.
_INIT_STREAM = 0
_ORDER_STREAM = 1


@dataclass(frozen=True)
class SofmParams:
    width: int = 8
    height: int = 8
    epochs: int = 3
    alpha_start: float = 0.5
    alpha_end: float = 0.01
    radius_start: Optional[float] = None  # None -> max(width, height) / 2
    radius_end: float = 0.5
    seed: int = 42

    def __post_init__(self) -> None:
        if self.width < 1 or self.height < 1:
            raise ValueError(f"Grid must be at least 1x1, got {self.width}x{self.height}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if not 1 >= self.alpha_start >= self.alpha_end > 0:
            raise ValueError(
                f"Need 1 >= alpha_start >= alpha_end > 0, got {self.alpha_start}, {self.alpha_end}"
            )
        if not self.start_radius >= self.radius_end > 0:
            raise ValueError(
                f"Need radius_start >= radius_end > 0, got {self.start_radius}, {self.radius_end}"
            )
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError(f"seed must be a non-negative 64-bit integer, got {self.seed}")

    @property
    def start_radius(self) -> float:
        if self.radius_start is None:
            return max(self.width, self.height) / 2.0
        return float(self.radius_start)


@dataclass(frozen=True, eq=False)
class SofmGrid:
    """weights[row, col] is the weight vector (pseudo-model) of one neuron."""

    weights: np.ndarray

    def __post_init__(self) -> None:
        w = np.array(self.weights, dtype=float, copy=True)
        if w.ndim != 3:
            raise ValueError(f"Grid weights must be (height, width, dim), got shape {w.shape}")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def height(self) -> int:
        return int(self.weights.shape[0])

    @property
    def width(self) -> int:
        return int(self.weights.shape[1])

    @property
    def dim(self) -> int:
        return int(self.weights.shape[2])

    @property
    def n_neurons(self) -> int:
        return self.height * self.width

    def neurons(self) -> np.ndarray:
        """Weights in row-major neuron order, shape (n_neurons, dim)."""
        return self.weights.reshape(self.n_neurons, self.dim)

    def coords(self) -> np.ndarray:
        rows, cols = np.divmod(np.arange(self.n_neurons), self.width)
        return np.stack([rows, cols], axis=1).astype(float)

    def equals(self, other: SofmGrid) -> bool:
        return np.array_equal(self.weights, other.weights)


def _stream(seed: int, key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), key]))


def init_grid(genomes: np.ndarray, width: int, height: int, seed: int) -> SofmGrid:
    """Neurons start as a seeded sample of the inputs, drawn without replacement."""
    X = np.asarray(genomes, dtype=float)
    n_neurons = width * height
    if X.ndim != 2 or len(X) < n_neurons:
        raise ValueError(f"Need at least {n_neurons} input vectors for a {height}x{width} grid, got {len(X)}")
    idx = _stream(seed, _INIT_STREAM).choice(len(X), size=n_neurons, replace=False)
    return SofmGrid(X[idx].reshape(height, width, X.shape[1]))


def best_matching_unit(
    grid: SofmGrid,
    x: np.ndarray,
    metric: Metric | Callable[[np.ndarray, np.ndarray], float] | None = None,
) -> tuple[int, int]:
    x = np.asarray(x, dtype=float)
    if x.shape != (grid.dim,):
        raise ValueError(f"Input has shape {x.shape}, grid expects ({grid.dim},)")
    d = as_metric(metric).pairwise(x[None, :], grid.neurons())[0]
    k = int(np.argmin(d))  # first minimum -> smallest row-major index
    return divmod(k, grid.width)


def kohonen_update(
    weights: np.ndarray,
    coords: np.ndarray,
    bmu: int,
    x: np.ndarray,
    alpha: float,
    radius: float,
) -> None:
    """In-place update of every neuron towards x with a Gaussian neighbourhood."""
    g2 = np.sum((coords - coords[bmu]) ** 2, axis=1)
    h = np.exp(-g2 / (2.0 * radius * radius))
    weights += (alpha * h)[:, None] * (x - weights)


def fit(
    genomes: np.ndarray,
    params: SofmParams = SofmParams(),
    metric: Metric | Callable[[np.ndarray, np.ndarray], float] | None = None,
) -> SofmGrid:
    """
    Kohonen training. Each epoch presents all inputs in a seeded shuffled
    order; learning rate and neighbourhood radius decay linearly over the
    epochs * n presentations.
    """
    X = np.asarray(genomes, dtype=float)
    if X.ndim != 2 or len(X) == 0:
        raise ValueError("fit needs a non-empty 2-D array of input vectors.")
    m = as_metric(metric)

    grid = init_grid(X, params.width, params.height, params.seed)
    W = grid.neurons().copy()
    coords = grid.coords()
    rng = _stream(params.seed, _ORDER_STREAM)

    total = params.epochs * len(X)
    r0, r1 = params.start_radius, params.radius_end
    t = 0
    for epoch in range(params.epochs):
        for i in rng.permutation(len(X)):
            frac = t / (total - 1) if total > 1 else 0.0
            alpha = params.alpha_start + (params.alpha_end - params.alpha_start) * frac
            radius = r0 + (r1 - r0) * frac
            x = X[i]
            bmu = int(np.argmin(m.pairwise(x[None, :], W)[0]))
            kohonen_update(W, coords, bmu, x, alpha, radius)
            t += 1
        logger.debug("sofm_epoch epoch=%d presentations=%d", epoch + 1, t)

    logger.info(
        "sofm_fit grid=%dx%d epochs=%d presentations=%d metric=%s",
        params.height, params.width, params.epochs, t, type(m).__name__,
    )
    return SofmGrid(W.reshape(params.height, params.width, X.shape[1]))


def bmu_indices(
    grid: SofmGrid,
    genomes: np.ndarray,
    metric: Metric | Callable[[np.ndarray, np.ndarray], float] | None = None,
) -> np.ndarray:
    """Row-major neuron index (row * width + col) of every input's BMU."""
    X = np.asarray(genomes, dtype=float)
    if X.ndim != 2 or X.shape[1] != grid.dim:
        raise ValueError(f"Inputs must have shape (n, {grid.dim}), got {X.shape}")
    m = as_metric(metric)
    out = np.empty(len(X), dtype=np.int64)
    step = 4096
    for start in range(0, len(X), step):
        out[start : start + step] = np.argmin(m.pairwise(X[start : start + step], grid.neurons()), axis=1)
    return out


def assign_clusters(
    grid: SofmGrid,
    genomes: np.ndarray,
    metric: Metric | Callable[[np.ndarray, np.ndarray], float] | None = None,
) -> Labeling:
    """Models sharing a BMU form one cluster; ids follow row-major neuron order."""
    return Labeling.from_codes(bmu_indices(grid, genomes, metric))


def neuron_oip(grid: SofmGrid, evaluator: Callable[[np.ndarray], Sequence[float]]) -> np.ndarray:
    """Evaluator output for every pseudo-model, shaped (height, width)."""
    values = np.asarray(evaluator(grid.neurons()), dtype=float)
    if values.shape != (grid.n_neurons,):
        raise ValueError(f"Evaluator returned shape {values.shape}, expected ({grid.n_neurons},)")
    return values.reshape(grid.height, grid.width)


def map_smoothness(table: np.ndarray) -> float:
    """
    Mean |difference| between 4-neighbour neurons over mean |difference|
    between all neuron pairs. Below 1 when similar values sit together.
    """
    t = np.asarray(table, dtype=float)
    if t.ndim != 2 or t.size < 2:
        raise ValueError(f"Need a 2-D table with at least two neurons, got shape {t.shape}")
    local = np.concatenate([np.abs(np.diff(t, axis=0)).ravel(), np.abs(np.diff(t, axis=1)).ravel()])
    flat = t.ravel()
    iu = np.triu_indices(flat.size, k=1)
    overall = np.abs(flat[iu[0]] - flat[iu[1]]).mean()
    if overall == 0:
        return 0.0
    return float(local.mean() / overall)
