# ensemble_reduction/tree.py
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

LEAF = -1


@dataclass(frozen=True, eq=False)
class RegressionTree:
    """
    Binary regression tree in flat arrays. Node 0 is the root; a node is a
    leaf when feature == LEAF. Samples with x[feature] <= threshold go left.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def n_nodes(self) -> int:
        return int(self.feature.size)

    @property
    def n_leaves(self) -> int:
        return int((self.feature == LEAF).sum())

    def depth(self) -> int:
        depth = np.zeros(self.n_nodes, dtype=np.int64)
        for i in range(self.n_nodes):
            if self.feature[i] != LEAF:
                depth[self.left[i]] = depth[i] + 1
                depth[self.right[i]] = depth[i] + 1
        return int(depth.max())

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf node index reached by every row of X."""
        X = np.asarray(X, dtype=float)
        node = np.zeros(len(X), dtype=np.int64)
        active = np.flatnonzero(self.feature[node] != LEAF)
        while active.size:
            nd = node[active]
            go_left = X[active, self.feature[nd]] <= self.threshold[nd]
            node[active] = np.where(go_left, self.left[nd], self.right[nd])
            active = active[self.feature[node[active]] != LEAF]
        return node

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]


def _best_split(X: np.ndarray, target: np.ndarray, order: np.ndarray) -> Optional[tuple[int, float]]:
    """
    Exact greedy variance-reduction split. `order[f]` lists the node's rows
    sorted by feature f. Candidates are midpoints between consecutive distinct
    values, scanned feature-major; the first maximal gain wins.
    """
    d, m = order.shape
    xs = X[order, np.arange(d)[:, None]]
    ys = target[order]
    csum = np.cumsum(ys, axis=1)
    total = csum[:, -1:]
    left_sum = csum[:, :-1]
    n_left = np.arange(1, m, dtype=float)
    gain = left_sum**2 / n_left + (total - left_sum) ** 2 / (m - n_left)
    gain = np.where(xs[:, 1:] > xs[:, :-1], gain, -np.inf)

    flat = int(np.argmax(gain))
    j, pos = divmod(flat, m - 1)
    best = gain[j, pos]
    if not np.isfinite(best) or best <= total[j, 0] ** 2 / m:
        return None
    lo, hi = xs[j, pos], xs[j, pos + 1]
    thr = lo + (hi - lo) / 2.0
    if thr >= hi:
        thr = lo
    return j, float(thr)


def build_tree(
    X: np.ndarray,
    target: np.ndarray,
    *,
    max_depth: int = 80,
    min_samples_split: int = 2,
    leaf_value: Optional[Callable[[np.ndarray], float]] = None,
    order: Optional[np.ndarray] = None,
) -> tuple[RegressionTree, np.ndarray]:
    """
    Grow a tree on `target`. Splitting stops at max_depth, below
    min_samples_split samples, or when the node's targets are all equal.
    Leaves take `leaf_value(rows)` (mean target by default).

    `order` is the presorted (n_features, n_samples) row order of X; passing
    it lets repeated fits on the same X skip sorting. Returns the tree and the
    leaf index of every training row.
    """
    X = np.asarray(X, dtype=float)
    target = np.asarray(target, dtype=float)
    n, d = X.shape
    if n == 0:
        raise ValueError("Cannot grow a tree on zero samples.")
    if order is None:
        order = np.ascontiguousarray(np.argsort(X, axis=0, kind="stable").T)

    feature: list[int] = []
    threshold: list[float] = []
    left: list[int] = []
    right: list[int] = []
    value: list[float] = []

    def new_node() -> int:
        feature.append(LEAF)
        threshold.append(0.0)
        left.append(LEAF)
        right.append(LEAF)
        value.append(0.0)
        return len(feature) - 1

    leaf_of = np.empty(n, dtype=np.int64)
    goes_left = np.zeros(n, dtype=bool)
    stack = [(new_node(), order, 0)]
    while stack:
        node, ordm, depth = stack.pop()
        rows = ordm[0]
        y = target[rows]
        split = None
        if depth < max_depth and rows.size >= min_samples_split and y.max() > y.min():
            split = _best_split(X, target, ordm)
        if split is None:
            value[node] = float(leaf_value(rows)) if leaf_value is not None else float(y.mean())
            leaf_of[rows] = node
            continue

        j, thr = split
        goes_left[rows] = X[rows, j] <= thr
        mask = goes_left[ordm]
        left_ord = ordm[mask].reshape(d, -1)
        right_ord = ordm[~mask].reshape(d, -1)
        goes_left[rows] = False

        feature[node] = j
        threshold[node] = thr
        left[node] = new_node()
        right[node] = new_node()
        stack.append((right[node], right_ord, depth + 1))
        stack.append((left[node], left_ord, depth + 1))

    tree = RegressionTree(
        feature=np.asarray(feature, dtype=np.int64),
        threshold=np.asarray(threshold, dtype=float),
        left=np.asarray(left, dtype=np.int64),
        right=np.asarray(right, dtype=np.int64),
        value=np.asarray(value, dtype=float),
    )
    return tree, leaf_of
