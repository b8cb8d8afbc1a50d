# ensemble_reduction/calibration.py
from __future__ import annotations

from typing import Any, Dict, List, Sequence

import numpy as np
import pandas as pd

import statsmodels.api as sm


def _rows(res: Any, alpha: float) -> List[Dict[str, Any]]:
    conf = res.conf_int(alpha=alpha)
    conf.columns = ["ci_low", "ci_high"]
    rows: List[Dict[str, Any]] = []
    for term in res.params.index:
        pv = res.pvalues.loc[term]
        rows.append(
            {
                "term": str(term),
                "coef": float(res.params.loc[term]),
                "ci_low": float(conf.loc[term, "ci_low"]),
                "ci_high": float(conf.loc[term, "ci_high"]),
                "p_value": float(pv) if pd.notna(pv) else float("nan"),
            }
        )
    return rows


def _fit_ols(y: pd.Series, X: pd.DataFrame, *, robust_se: bool) -> Any:
    model = sm.OLS(y, X)
    return model.fit(cov_type="HC1") if robust_se else model.fit()


def prediction_bias(
    y_true: Sequence[float],
    y_pred: Sequence[float],
    *,
    alpha: float = 0.05,
    robust_se: bool = True,
) -> Dict[str, Any]:
    """
    Systematic-bias check of a regressor on held-out models.

    - `results`: OLS of predicted on true OIP. A slope below 1 means high OIP
      values are under-predicted (and low ones over-predicted).
    - `mean_residual`: intercept-only OLS of (predicted - true); its CI
      covering 0 means no overall bias.
    Standard errors are HC1-robust unless `robust_se` is False.
    """
    yt = np.asarray(y_true, dtype=float)
    yp = np.asarray(y_pred, dtype=float)
    if yt.shape != yp.shape or yt.ndim != 1:
        raise ValueError(f"y_true and y_pred must be aligned 1-D arrays, got {yt.shape} and {yp.shape}")
    if yt.size < 3:
        raise ValueError(f"Need at least 3 models for a bias fit, got {yt.size}")
    if np.ptp(yt) == 0:
        raise ValueError("True OIP is constant; the slope is undefined.")

    y = pd.Series(yp, name="predicted_oip")
    X = sm.add_constant(pd.DataFrame({"true_oip": yt}), has_constant="add")
    slope_res = _fit_ols(y, X, robust_se=robust_se)

    resid = pd.Series(yp - yt, name="residual")
    const = pd.DataFrame({"const": np.ones(yt.size)})
    mean_res = _fit_ols(resid, const, robust_se=robust_se)
    mean_row = _rows(mean_res, alpha)[0]

    slope_row = next(r for r in _rows(slope_res, alpha) if r["term"] == "true_oip")
    return {
        "meta": {
            "n_used": int(yt.size),
            "alpha": alpha,
            "robust_se": bool(robust_se),
            "r_squared": float(slope_res.rsquared),
            "under_predicts_high": bool(slope_row["ci_high"] < 1.0),
        },
        "results": _rows(slope_res, alpha),
        "mean_residual": {
            "mean": mean_row["coef"],
            "ci_low": mean_row["ci_low"],
            "ci_high": mean_row["ci_high"],
            "p_value": mean_row["p_value"],
        },
    }
