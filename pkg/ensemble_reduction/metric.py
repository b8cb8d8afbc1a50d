# ensemble_reduction/metric.py
from __future__ import annotations

from typing import Callable, Mapping, Protocol, runtime_checkable

import numpy as np
from scipy.spatial.distance import cdist

from .genome import GENE_LENGTH, PROPERTIES


@runtime_checkable
class Metric(Protocol):
    """
    Symmetric, non-negative dissimilarity with d(x, x) = 0. The triangle
    inequality is not required.
    """

    def __call__(self, a: np.ndarray, b: np.ndarray) -> float: ...

    def pairwise(self, A: np.ndarray, B: np.ndarray) -> np.ndarray: ...


def _as_2d(A: np.ndarray) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    return A[None, :] if A.ndim == 1 else A


class EuclideanMetric:
    def __call__(self, a: np.ndarray, b: np.ndarray) -> float:
        return float(np.sqrt(np.sum((np.asarray(a, float) - np.asarray(b, float)) ** 2)))

    def pairwise(self, A: np.ndarray, B: np.ndarray) -> np.ndarray:
        return cdist(_as_2d(A), _as_2d(B), metric="euclidean")

    def __repr__(self) -> str:
        return "EuclideanMetric()"


class WeightedEuclidean:
    """Euclidean distance with one non-negative weight per component."""

    def __init__(self, weights: np.ndarray) -> None:
        w = np.asarray(weights, dtype=float)
        if w.ndim != 1 or (w < 0).any():
            raise ValueError("weights must be a 1-D array of non-negative values")
        self.weights = w
        self._scale = np.sqrt(w)

    @classmethod
    def from_property_weights(cls, weights: Mapping[str, float]) -> WeightedEuclidean:
        unknown = set(weights) - set(PROPERTIES)
        if unknown:
            raise ValueError(f"Unknown properties in weights: {sorted(unknown)}")
        return cls(np.repeat([float(weights.get(p, 1.0)) for p in PROPERTIES], GENE_LENGTH))

    def __call__(self, a: np.ndarray, b: np.ndarray) -> float:
        d = (np.asarray(a, float) - np.asarray(b, float)) * self._scale
        return float(np.sqrt(np.sum(d * d)))

    def pairwise(self, A: np.ndarray, B: np.ndarray) -> np.ndarray:
        return cdist(_as_2d(A) * self._scale, _as_2d(B) * self._scale, metric="euclidean")


class PredictedOipMetric:
    """
    d(x, y) = |g(x) - g(y)| for a fitted regressor g over genomes. A
    pseudo-metric: distinct genomes with equal predictions are at distance 0.
    """

    def __init__(self, predict: Callable[[np.ndarray], np.ndarray]) -> None:
        self.predict = predict

    def __call__(self, a: np.ndarray, b: np.ndarray) -> float:
        s = self.predict(np.vstack([np.asarray(a, float), np.asarray(b, float)]))
        return float(abs(s[0] - s[1]))

    def pairwise(self, A: np.ndarray, B: np.ndarray) -> np.ndarray:
        A, B = _as_2d(A), _as_2d(B)
        s = np.asarray(self.predict(np.vstack([A, B])), dtype=float)
        return np.abs(s[: len(A), None] - s[None, len(A):])


class FunctionMetric:
    """Adapts a plain `(a, b) -> float` callable."""

    def __init__(self, fn: Callable[[np.ndarray, np.ndarray], float]) -> None:
        self.fn = fn

    def __call__(self, a: np.ndarray, b: np.ndarray) -> float:
        return float(self.fn(a, b))

    def pairwise(self, A: np.ndarray, B: np.ndarray) -> np.ndarray:
        A, B = _as_2d(A), _as_2d(B)
        out = np.empty((len(A), len(B)))
        for i, a in enumerate(A):
            for j, b in enumerate(B):
                out[i, j] = self.fn(a, b)
        return out


EUCLIDEAN = EuclideanMetric()


def as_metric(metric: Metric | Callable[[np.ndarray, np.ndarray], float] | None) -> Metric:
    if metric is None:
        return EUCLIDEAN
    if hasattr(metric, "pairwise"):
        return metric  # type: ignore[return-value]
    if callable(metric):
        return FunctionMetric(metric)
    raise ValueError(f"Not a metric: {metric!r}")
