# ensemble_reduction/regress.py
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from .metrics import ErrorMetrics, error_metrics, repeat_summary
from .tree import LEAF, RegressionTree, build_tree

logger = logging.getLogger(__name__)

DELTA_FLOOR = 1e-12
DEFAULT_FRACTIONS: Tuple[float, ...] = tuple(round(0.05 * k, 2) for k in range(1, 17))
REGRESSORS = ("gb", "mlp")


@dataclass(frozen=True)
class TrainParams:
    # gradient boosting
    n_stages: int = 100
    max_depth: int = 80
    learning_rate: float = 0.1
    huber_alpha: float = 0.9
    min_samples_split: int = 2
    # multilayer perceptron
    hidden_units: int = 30
    adam_step: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_epsilon: float = 1e-8
    batch_size: int = 32
    epochs: int = 200
    seed: int = 42

    def __post_init__(self) -> None:
        if self.n_stages < 1:
            raise ValueError(f"n_stages must be >= 1, got {self.n_stages}")
        if self.max_depth < 1:
            raise ValueError(f"max_depth must be >= 1, got {self.max_depth}")
        if not self.learning_rate > 0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")
        if not 0 < self.huber_alpha < 1:
            raise ValueError(f"huber_alpha must lie in (0, 1), got {self.huber_alpha}")
        if self.min_samples_split < 2:
            raise ValueError(f"min_samples_split must be >= 2, got {self.min_samples_split}")
        if self.hidden_units < 1 or self.batch_size < 1 or self.epochs < 1:
            raise ValueError("hidden_units, batch_size and epochs must be >= 1")
        if not self.adam_step > 0 or not self.adam_epsilon > 0:
            raise ValueError("adam_step and adam_epsilon must be > 0")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError(f"Adam decay rates must lie in [0, 1), got {self.beta1}, {self.beta2}")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError(f"seed must be a non-negative 64-bit integer, got {self.seed}")


def _as_matrix(X: Any) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValueError(f"Expected a 2-D array of genomes, got shape {X.shape}")
    return X


def _check_xy(X: Any, y: Any) -> tuple[np.ndarray, np.ndarray]:
    X = _as_matrix(X)
    y = np.asarray(y, dtype=float)
    if y.ndim != 1 or len(y) != len(X):
        raise ValueError(f"X has {len(X)} rows but y has shape {y.shape}")
    if len(y) == 0:
        raise ValueError("Cannot train on empty data.")
    return X, y


def huber_loss(residual, delta):
    """
    Huber loss and its derivative w.r.t. the residual: r**2/2 and r inside
    |r| <= delta, delta*(|r| - delta/2) and delta*sign(r) outside.
    Works elementwise on arrays; scalars in, floats out.
    """
    if not np.all(np.asarray(delta) > 0):
        raise ValueError(f"delta must be > 0, got {delta}")
    r = np.asarray(residual, dtype=float)
    a = np.abs(r)
    inside = a <= delta
    loss = np.where(inside, 0.5 * r * r, delta * (a - 0.5 * delta))
    grad = np.where(inside, r, delta * np.sign(r))
    if loss.ndim == 0:
        return float(loss), float(grad)
    return loss, grad


def _huber_leaf(diff: np.ndarray, delta: float) -> float:
    """Median of the leaf residuals plus the mean of their clipped deviations."""
    med = float(np.median(diff))
    dev = diff - med
    return med + float(np.mean(np.sign(dev) * np.minimum(np.abs(dev), delta)))


@dataclass(eq=False)
class GbModel:
    """prediction(x) = init_prediction + learning_rate * sum(tree(x) for tree in trees)"""

    init_prediction: float
    trees: List[RegressionTree]
    learning_rate: float = 0.1
    huber_alpha: float = 0.9
    n_features: int = 0
    train_loss: List[float] = field(default_factory=list)
    _forest: Optional[Dict[str, np.ndarray]] = field(default=None, repr=False)

    def _stacked(self) -> Dict[str, np.ndarray]:
        # All trees in one node table so a batch walks every tree at once.
        if self._forest is None:
            sizes = np.array([t.n_nodes for t in self.trees], dtype=np.int64)
            offsets = np.concatenate([[0], np.cumsum(sizes)[:-1]]).astype(np.int64)

            def shift(arr: np.ndarray, off: int) -> np.ndarray:
                return np.where(arr == LEAF, LEAF, arr + off)

            self._forest = {
                "roots": offsets,
                "feature": np.concatenate([t.feature for t in self.trees]),
                "threshold": np.concatenate([t.threshold for t in self.trees]),
                "left": np.concatenate([shift(t.left, o) for t, o in zip(self.trees, offsets)]),
                "right": np.concatenate([shift(t.right, o) for t, o in zip(self.trees, offsets)]),
                "value": np.concatenate([t.value for t in self.trees]),
            }
        return self._forest

    def predict(self, X: Any) -> Union[np.ndarray, float]:
        X = np.asarray(X, dtype=float)
        single = X.ndim == 1
        X = X[None, :] if single else X
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ValueError(f"Expected inputs with {self.n_features} features, got shape {X.shape}")
        if not self.trees:
            out = np.full(len(X), self.init_prediction)
        else:
            f = self._stacked()
            n, T = len(X), len(self.trees)
            node = np.repeat(f["roots"], n)
            rows = np.tile(np.arange(n), T)
            feature, threshold = f["feature"], f["threshold"]
            active = np.flatnonzero(feature[node] != LEAF)
            while active.size:
                nd = node[active]
                go_left = X[rows[active], feature[nd]] <= threshold[nd]
                node[active] = np.where(go_left, f["left"][nd], f["right"][nd])
                active = active[feature[node[active]] != LEAF]
            out = self.init_prediction + self.learning_rate * f["value"][node].reshape(T, n).sum(axis=0)
        return float(out[0]) if single else out


def train_gb(X: Any, y: Any, p: TrainParams = TrainParams()) -> GbModel:
    """
    Gradient boosting with huber loss. Each stage sets delta to the
    huber_alpha-quantile of the absolute residuals, fits a tree to the huber
    pseudo-residuals and sets leaves with the huber leaf update.

    Rows are put in a canonical order first, so the model does not depend on
    the order of the training data.
    """
    X, y = _check_xy(X, y)
    canon = np.lexsort((y, *X.T[::-1]))
    X, y = X[canon], y[canon]
    order = np.ascontiguousarray(np.argsort(X, axis=0, kind="stable").T)

    init = float(np.median(y))
    pred = np.full(len(y), init)
    trees: List[RegressionTree] = []
    loss_trace: List[float] = []
    delta0: Optional[float] = None

    for stage in range(p.n_stages):
        diff = y - pred
        delta = max(float(np.quantile(np.abs(diff), p.huber_alpha)), DELTA_FLOOR)
        if delta0 is None:
            delta0 = delta
        pseudo = np.where(np.abs(diff) <= delta, diff, delta * np.sign(diff))
        tree, leaf_of = build_tree(
            X,
            pseudo,
            max_depth=p.max_depth,
            min_samples_split=p.min_samples_split,
            leaf_value=lambda rows: _huber_leaf(diff[rows], delta),
            order=order,
        )
        trees.append(tree)
        pred = pred + p.learning_rate * tree.value[leaf_of]
        loss_trace.append(float(np.mean(huber_loss(y - pred, delta0)[0])))
        logger.debug("gb_stage stage=%d nodes=%d delta=%.6g loss=%.6g", stage + 1, tree.n_nodes, delta, loss_trace[-1])

    logger.info("gb_train n=%d stages=%d final_loss=%.6g", len(y), len(trees), loss_trace[-1])
    return GbModel(
        init_prediction=init,
        trees=trees,
        learning_rate=p.learning_rate,
        huber_alpha=p.huber_alpha,
        n_features=X.shape[1],
        train_loss=loss_trace,
    )


def predict_gb(m: GbModel, x: Any) -> Union[np.ndarray, float]:
    return m.predict(x)


@dataclass(eq=False)
class MlpModel:
    """Single hidden ReLU layer; outputs are de-standardized with y_mean/y_scale."""

    w1: np.ndarray  # (n_features, hidden)
    b1: np.ndarray  # (hidden,)
    w2: np.ndarray  # (hidden,)
    b2: float
    y_mean: float = 0.0
    y_scale: float = 1.0

    @property
    def n_features(self) -> int:
        return int(self.w1.shape[0])

    def params(self) -> Dict[str, np.ndarray]:
        return {"w1": self.w1, "b1": self.b1, "w2": self.w2, "b2": np.array([self.b2])}

    def predict(self, X: Any) -> Union[np.ndarray, float]:
        X = np.asarray(X, dtype=float)
        single = X.ndim == 1
        X = X[None, :] if single else X
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ValueError(f"Expected inputs with {self.n_features} features, got shape {X.shape}")
        out = _forward(self.params(), X)[2] * self.y_scale + self.y_mean
        return float(out[0]) if single else out


def _forward(params: Dict[str, np.ndarray], X: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    z = X @ params["w1"] + params["b1"]
    a = np.maximum(z, 0.0)
    out = a @ params["w2"] + params["b2"][0]
    return z, a, out


def mlp_loss_and_grads(
    params: Dict[str, np.ndarray], X: np.ndarray, t: np.ndarray
) -> tuple[float, Dict[str, np.ndarray]]:
    """Mean squared error on (standardized) targets and its gradient by backprop."""
    z, a, out = _forward(params, X)
    r = out - t
    loss = float(np.mean(r * r))
    dout = 2.0 * r / len(t)
    dz = np.outer(dout, params["w2"]) * (z > 0)
    grads = {
        "w1": X.T @ dz,
        "b1": dz.sum(axis=0),
        "w2": a.T @ dout,
        "b2": np.array([dout.sum()]),
    }
    return loss, grads


def init_mlp_params(n_features: int, hidden: int, rng: np.random.Generator) -> Dict[str, np.ndarray]:
    lim1 = math.sqrt(6.0 / (n_features + hidden))
    lim2 = math.sqrt(6.0 / (hidden + 1))
    return {
        "w1": rng.uniform(-lim1, lim1, size=(n_features, hidden)),
        "b1": np.zeros(hidden),
        "w2": rng.uniform(-lim2, lim2, size=hidden),
        "b2": np.zeros(1),
    }


def train_mlp(X: Any, y: Any, p: TrainParams = TrainParams()) -> MlpModel:
    """Mini-batch Adam on standardized targets."""
    X, y = _check_xy(X, y)
    y_mean = float(y.mean())
    y_scale = float(y.std())
    if y_scale == 0:
        y_scale = 1.0
    t = (y - y_mean) / y_scale

    rng = np.random.default_rng(p.seed)
    params = init_mlp_params(X.shape[1], p.hidden_units, rng)
    m1 = {k: np.zeros_like(v) for k, v in params.items()}
    m2 = {k: np.zeros_like(v) for k, v in params.items()}
    step = 0
    loss = float("nan")
    for epoch in range(p.epochs):
        perm = rng.permutation(len(y))
        for start in range(0, len(y), p.batch_size):
            idx = perm[start : start + p.batch_size]
            loss, grads = mlp_loss_and_grads(params, X[idx], t[idx])
            step += 1
            c1 = 1.0 - p.beta1**step
            c2 = 1.0 - p.beta2**step
            for k, g in grads.items():
                m1[k] = p.beta1 * m1[k] + (1.0 - p.beta1) * g
                m2[k] = p.beta2 * m2[k] + (1.0 - p.beta2) * g * g
                params[k] = params[k] - p.adam_step * (m1[k] / c1) / (np.sqrt(m2[k] / c2) + p.adam_epsilon)
        if (epoch + 1) % 50 == 0:
            logger.debug("mlp_epoch epoch=%d batch_loss=%.6g", epoch + 1, loss)

    logger.info("mlp_train n=%d epochs=%d steps=%d", len(y), p.epochs, step)
    return MlpModel(
        w1=params["w1"],
        b1=params["b1"],
        w2=params["w2"],
        b2=float(params["b2"][0]),
        y_mean=y_mean,
        y_scale=y_scale,
    )


def predict_mlp(m: MlpModel, x: Any) -> Union[np.ndarray, float]:
    return m.predict(x)


Regressor = Union[GbModel, MlpModel]


def train_regressor(kind: str, X: Any, y: Any, p: TrainParams = TrainParams()) -> Regressor:
    if kind == "gb":
        return train_gb(X, y, p)
    if kind == "mlp":
        return train_mlp(X, y, p)
    raise ValueError(f"Unknown regressor: {kind}. Expected one of {REGRESSORS}")


@dataclass(frozen=True)
class SweepRow:
    fraction: float
    repeats: int
    rmse_mean: float  # sqrt of the mean MSE over repeats
    rmse_per_repeat: Tuple[float, ...]


@dataclass(frozen=True)
class SweepResult:
    regressor: str
    rows: Tuple[SweepRow, ...]

    def to_frame(self) -> pd.DataFrame:
        """Long format: one row per (fraction, repeat)."""
        return pd.DataFrame(
            [
                {"fraction": r.fraction, "repeat": k, "rmse": v}
                for r in self.rows
                for k, v in enumerate(r.rmse_per_repeat)
            ],
            columns=["fraction", "repeat", "rmse"],
        )

    def summary_frame(self, alpha: float = 0.05) -> pd.DataFrame:
        out = []
        for r in self.rows:
            s = repeat_summary(r.rmse_per_repeat, alpha=alpha)
            out.append(
                {
                    "fraction": r.fraction,
                    "repeats": r.repeats,
                    "rmse_mean": r.rmse_mean,
                    "rmse_ci_low": s["ci_low"],
                    "rmse_ci_high": s["ci_high"],
                }
            )
        return pd.DataFrame(out)


def _check_fractions(fractions: Sequence[float]) -> Tuple[float, ...]:
    fr = tuple(float(f) for f in fractions)
    if not fr:
        raise ValueError("At least one training fraction is required.")
    for f in fr:
        if not 0 < f < 1:
            raise ValueError(f"Training fraction {f} outside (0, 1)")
    if any(b <= a for a, b in zip(fr, fr[1:])):
        raise ValueError(f"Training fractions must be strictly increasing, got {fr}")
    return fr


def _sweep_cell(
    X: np.ndarray,
    y: np.ndarray,
    fraction: float,
    cell_key: Tuple[int, int, int],
    regressor: str,
    p: TrainParams,
) -> ErrorMetrics:
    rng = np.random.default_rng(np.random.SeedSequence(list(cell_key)))
    n_train = int(math.floor(fraction * len(y)))
    if not 1 <= n_train < len(y):
        raise ValueError(f"Fraction {fraction} leaves {n_train} of {len(y)} models for training")
    train = np.zeros(len(y), dtype=bool)
    train[rng.choice(len(y), size=n_train, replace=False)] = True
    model = train_regressor(regressor, X[train], y[train], p)
    return error_metrics(y[~train], model.predict(X[~train]))


def sample_size_sweep(
    genomes: Any,
    oip: Any,
    fractions: Sequence[float] = DEFAULT_FRACTIONS,
    repeats: int = 5,
    regressor: str = "gb",
    params: TrainParams = TrainParams(),
    seed: int = 42,
    n_jobs: int = 1,
) -> SweepResult:
    """
    Train on seeded random samples of each size and test on the complement.
    Every (fraction, repeat) cell owns its stream, so cells run in any order
    or in parallel with identical results.
    """
    X, y = _check_xy(genomes, oip)
    fr = _check_fractions(fractions)
    if repeats < 1:
        raise ValueError(f"repeats must be >= 1, got {repeats}")
    if regressor not in REGRESSORS:
        raise ValueError(f"Unknown regressor: {regressor}. Expected one of {REGRESSORS}")

    cells = [(i, f, r) for i, f in enumerate(fr) for r in range(repeats)]
    results = Parallel(n_jobs=n_jobs)(
        delayed(_sweep_cell)(X, y, f, (int(seed), i, r), regressor, params) for i, f, r in cells
    )
    by_fraction: Dict[int, List[ErrorMetrics]] = {}
    for (i, _, _), res in zip(cells, results):
        by_fraction.setdefault(i, []).append(res)

    rows = []
    for i, f in enumerate(fr):
        errs = by_fraction[i]
        rows.append(
            SweepRow(
                fraction=f,
                repeats=repeats,
                rmse_mean=math.sqrt(float(np.mean([e.mse for e in errs]))),
                rmse_per_repeat=tuple(e.rmse for e in errs),
            )
        )
        logger.info("sweep regressor=%s fraction=%.2f rmse_mean=%.6g", regressor, f, rows[-1].rmse_mean)
    return SweepResult(regressor=regressor, rows=tuple(rows))


# Model files: JSON, floats written with repr so a reload predicts bit-identically.
# gb:  kind, init_prediction, learning_rate, huber_alpha, n_features,
#      trees[{feature, threshold, left, right, value}]
# mlp: kind, w1, b1, w2, b2, y_mean, y_scale


def model_to_dict(model: Regressor) -> Dict[str, Any]:
    if isinstance(model, GbModel):
        return {
            "kind": "gb",
            "init_prediction": model.init_prediction,
            "learning_rate": model.learning_rate,
            "huber_alpha": model.huber_alpha,
            "n_features": model.n_features,
            "trees": [
                {
                    "feature": t.feature.tolist(),
                    "threshold": t.threshold.tolist(),
                    "left": t.left.tolist(),
                    "right": t.right.tolist(),
                    "value": t.value.tolist(),
                }
                for t in model.trees
            ],
        }
    if isinstance(model, MlpModel):
        return {
            "kind": "mlp",
            "w1": model.w1.tolist(),
            "b1": model.b1.tolist(),
            "w2": model.w2.tolist(),
            "b2": model.b2,
            "y_mean": model.y_mean,
            "y_scale": model.y_scale,
        }
    raise ValueError(f"Unsupported model type: {type(model).__name__}")


def model_from_dict(d: Dict[str, Any]) -> Regressor:
    kind = d.get("kind")
    if kind == "gb":
        trees = [
            RegressionTree(
                feature=np.asarray(t["feature"], dtype=np.int64),
                threshold=np.asarray(t["threshold"], dtype=float),
                left=np.asarray(t["left"], dtype=np.int64),
                right=np.asarray(t["right"], dtype=np.int64),
                value=np.asarray(t["value"], dtype=float),
            )
            for t in d["trees"]
        ]
        return GbModel(
            init_prediction=float(d["init_prediction"]),
            trees=trees,
            learning_rate=float(d["learning_rate"]),
            huber_alpha=float(d["huber_alpha"]),
            n_features=int(d["n_features"]),
        )
    if kind == "mlp":
        return MlpModel(
            w1=np.asarray(d["w1"], dtype=float),
            b1=np.asarray(d["b1"], dtype=float),
            w2=np.asarray(d["w2"], dtype=float),
            b2=float(d["b2"]),
            y_mean=float(d["y_mean"]),
            y_scale=float(d["y_scale"]),
        )
    raise ValueError(f"Unknown model kind: {kind!r}")


def save_model(model: Regressor, path: Union[str, Path]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(model_to_dict(model), f)


def load_model(path: Union[str, Path]) -> Regressor:
    with open(path, "r", encoding="utf-8-sig") as f:
        return model_from_dict(json.load(f))
