from __future__ import annotations
from dataclasses import dataclass
import numpy as np
import pandas as pd

NOISE = -1


def _with_singleton_noise(labels: np.ndarray) -> np.ndarray:
    """Each NOISE point becomes its own cluster, numbered after the real ones."""
    out = np.asarray(labels, dtype=np.int64).copy()
    noise = out == NOISE
    if noise.any():
        start = out.max() + 1 if (~noise).any() else 0
        out[noise] = start + np.arange(int(noise.sum()))
    return out


def _pairs(counts: np.ndarray) -> int:
    c = counts.astype(np.int64)
    return int((c * (c - 1) // 2).sum())


@dataclass(frozen=True)
class PairCounts:
    same_both: int  # same cluster in a and in b
    same_a: int
    same_b: int
    total: int

    @property
    def agreeing(self) -> int:
        # same-same plus different-different
        return self.total + 2 * self.same_both - self.same_a - self.same_b


@dataclass(frozen=True)
class LabelingContingency:
    """
    Sparse contingency table between two labelings of the same points:
    only occupied (a, b) cells are stored.
    """

    cells: pd.Series
    a_totals: pd.Series
    b_totals: pd.Series

    @property
    def n(self) -> int:
        return int(self.a_totals.sum())

    def as_array(self) -> np.ndarray:
        return self.cells.unstack(fill_value=0).to_numpy(dtype=int)

    def pair_counts(self) -> PairCounts:
        n = self.n
        return PairCounts(
            same_both=_pairs(self.cells.to_numpy()),
            same_a=_pairs(self.a_totals.to_numpy()),
            same_b=_pairs(self.b_totals.to_numpy()),
            total=n * (n - 1) // 2,
        )


def build_contingency(a: np.ndarray, b: np.ndarray) -> LabelingContingency:
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError(f"Labelings must be 1-D and aligned, got shapes {a.shape} and {b.shape}")

    df = pd.DataFrame({"a": _with_singleton_noise(a), "b": _with_singleton_noise(b)})
    cells = df.value_counts(["a", "b"], sort=False)
    return LabelingContingency(
        cells=cells,
        a_totals=df["a"].value_counts(sort=False),
        b_totals=df["b"].value_counts(sort=False),
    )
