from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Any, Dict, Sequence
import math

import numpy as np
from scipy.stats import t as student_t


def _t(alpha: float, dof: int) -> float:
    return float(student_t.ppf(1.0 - alpha / 2.0, dof))


@dataclass(frozen=True)
class ErrorMetrics:
    mse: float
    rmse: float
    mae: float

    def to_dict(self) -> Dict[str, float]:
        return asdict(self)


def error_metrics(y_true: Sequence[float], y_pred: Sequence[float]) -> ErrorMetrics:
    yt = np.asarray(y_true, dtype=float)
    yp = np.asarray(y_pred, dtype=float)
    if yt.shape != yp.shape:
        raise ValueError(f"Length mismatch: {yt.shape} vs {yp.shape}")
    if yt.size == 0:
        raise ValueError("error_metrics needs at least one value.")
    r = yp - yt
    mse = float(np.mean(r * r))
    return ErrorMetrics(mse=mse, rmse=math.sqrt(mse), mae=float(np.mean(np.abs(r))))


def repeat_summary(values: Sequence[float], *, alpha: float = 0.05) -> Dict[str, Any]:
    """
    Mean of repeated measurements with a Student-t confidence interval.
    A single repeat has no spread, so its interval is NaN.
    """
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise ValueError("repeat_summary needs at least one value.")
    mean = float(v.mean())
    if v.size < 2:
        return {"mean": mean, "ci_low": float("nan"), "ci_high": float("nan"), "n": 1, "alpha": alpha}

    se = float(v.std(ddof=1)) / math.sqrt(v.size)
    half = _t(alpha, v.size - 1) * se
    return {"mean": mean, "ci_low": mean - half, "ci_high": mean + half, "n": int(v.size), "alpha": alpha}
