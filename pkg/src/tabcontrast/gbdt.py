"""Gradient-boosted regression trees, written directly over numpy.

Trees are grown by exact greedy search over sorted feature values. Both
regression and classification fit each tree to gradient/hessian statistics;
split gain is G_L^2/H_L + G_R^2/H_R - G^2/H, which for squared error (h = 1)
equals the SSE reduction exactly. Feature importance is the total split gain
accumulated per input column over the whole ensemble.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

GAIN_TOL = 1e-12


@dataclass(frozen=True)
class GbdtConfig:
    n_rounds: int = 50
    max_depth: int = 3
    learning_rate: float = 0.1
    min_samples_leaf: int = 5

    def __post_init__(self):
        if not 0.0 < self.learning_rate <= 1.0:
            raise ValueError("learning_rate must lie in (0, 1]")
        if self.max_depth < 1 or self.n_rounds < 1 or self.min_samples_leaf < 1:
            raise ValueError("n_rounds, max_depth, min_samples_leaf must be >= 1")


@dataclass
class TreeNode:
    feature: int = -1  # -1 marks a leaf
    threshold: float = 0.0
    value: float = 0.0  # leaf weight (unscaled by learning rate)
    left: Optional["TreeNode"] = None
    right: Optional["TreeNode"] = None

    @property
    def is_leaf(self) -> bool:
        return self.feature < 0


def _best_split(x: np.ndarray, g: np.ndarray, h: np.ndarray, idx: np.ndarray, min_leaf: int):
    """Exact greedy split over all features for the rows in idx.

    Returns (gain, feature, threshold) or None. Ties break toward the lowest
    feature index and threshold because the scan keeps only strict improvements.
    """
    g_sum = g[idx].sum()
    h_sum = h[idx].sum()
    parent = g_sum * g_sum / h_sum
    best = None
    n = idx.size
    for f in range(x.shape[1]):
        col = x[idx, f]
        order = np.argsort(col, kind="stable")
        xs = col[order]
        gs = np.cumsum(g[idx][order])
        hs = np.cumsum(h[idx][order])
        # candidate boundaries: between consecutive distinct values, both sides
        # holding at least min_leaf rows
        lo, hi = min_leaf - 1, n - min_leaf - 1
        if hi < lo:
            continue
        pos = np.arange(lo, hi + 1)
        valid = xs[pos] < xs[pos + 1]
        if not valid.any():
            continue
        pos = pos[valid]
        gl, hl = gs[pos], hs[pos]
        gr, hr = g_sum - gl, h_sum - hl
        gains = gl * gl / hl + gr * gr / hr - parent
        k = int(np.argmax(gains))
        if gains[k] > GAIN_TOL and (best is None or gains[k] > best[0]):
            thr = 0.5 * (xs[pos[k]] + xs[pos[k] + 1])
            best = (float(gains[k]), f, float(thr))
    return best


def _grow(
    x: np.ndarray,
    g: np.ndarray,
    h: np.ndarray,
    idx: np.ndarray,
    depth: int,
    cfg: GbdtConfig,
    gains_out: np.ndarray,
) -> TreeNode:
    g_sum = g[idx].sum()
    h_sum = h[idx].sum()
    node = TreeNode(value=float(-g_sum / h_sum))
    if depth >= cfg.max_depth or idx.size < 2 * cfg.min_samples_leaf:
        return node
    found = _best_split(x, g, h, idx, cfg.min_samples_leaf)
    if found is None:
        return node
    gain, f, thr = found
    gains_out[f] += gain
    mask = x[idx, f] <= thr
    node.feature = f
    node.threshold = thr
    node.left = _grow(x, g, h, idx[mask], depth + 1, cfg, gains_out)
    node.right = _grow(x, g, h, idx[~mask], depth + 1, cfg, gains_out)
    return node


def _tree_predict(node: TreeNode, x: np.ndarray) -> np.ndarray:
    out = np.empty(x.shape[0], dtype=np.float64)

    def walk(n: TreeNode, rows: np.ndarray):
        if n.is_leaf:
            out[rows] = n.value
            return
        mask = x[rows, n.feature] <= n.threshold
        walk(n.left, rows[mask])
        walk(n.right, rows[~mask])

    walk(node, np.arange(x.shape[0]))
    return out


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


@dataclass
class GbdtModel:
    """Fitted ensemble. For classification, trees[r] belongs to class_of_tree[r]."""

    task: str  # "regression" | "classification"
    cfg: GbdtConfig
    trees: list[TreeNode]
    class_of_tree: list[int]
    base: np.ndarray  # (1,) regression mean or (C,) per-class prior log-odds
    n_classes: int
    importance_gains: np.ndarray  # raw per-column gain totals
    train_curve: list[float]  # training loss after each round
    class_values: Optional[np.ndarray] = None  # original class ids, dense order

    def predict_raw(self, x: np.ndarray) -> np.ndarray:
        """Regression value (n,) or per-class scores (n, C)."""
        x = np.asarray(x, dtype=np.float64)
        if self.task == "regression":
            out = np.full(x.shape[0], self.base[0])
            for tree in self.trees:
                out += self.cfg.learning_rate * _tree_predict(tree, x)
            return out
        out = np.tile(self.base, (x.shape[0], 1))
        for tree, c in zip(self.trees, self.class_of_tree):
            out[:, c] += self.cfg.learning_rate * _tree_predict(tree, x)
        return out

    def predict(self, x: np.ndarray) -> np.ndarray:
        raw = self.predict_raw(x)
        if self.task == "regression":
            return raw
        dense = np.argmax(raw, axis=1)
        return self.class_values[dense] if self.class_values is not None else dense


def importance_from_gains(gains: np.ndarray, n_columns: int) -> np.ndarray:
    total = gains.sum()
    if total <= 0.0:
        return np.full(n_columns, 1.0 / n_columns)
    return gains / total


def fit_gbdt(
    features: np.ndarray, target: np.ndarray, task: str, cfg: GbdtConfig = GbdtConfig()
) -> GbdtModel:
    """Boosted ensemble plus normalized gain importance over input columns.

    Regression fits residuals under squared error. Binary classification uses
    logistic loss with Newton leaf weights; more classes cycle one-vs-rest,
    round r training class r mod C. A constant target yields a zero-gain
    ensemble and the uniform importance fallback.
    """
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(target, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] != y.shape[0] or x.shape[0] == 0:
        raise ValueError("features must be (n, d) aligned with target")
    if task not in ("regression", "classification"):
        raise ValueError(f"unknown task {task!r}")
    n, d = x.shape
    gains = np.zeros(d, dtype=np.float64)
    rows = np.arange(n)
    curve: list[float] = []

    if task == "regression":
        base = np.array([y.mean()])
        pred = np.full(n, base[0])
        trees: list[TreeNode] = []
        classes: list[int] = []
        if np.ptp(y) > 0.0:
            for _ in range(cfg.n_rounds):
                g = pred - y  # gradient of 0.5*(pred-y)^2
                h = np.ones(n)
                tree = _grow(x, g, h, rows, 0, cfg, gains)
                trees.append(tree)
                classes.append(0)
                pred = pred + cfg.learning_rate * _tree_predict(tree, x)
                curve.append(float(0.5 * np.mean((pred - y) ** 2)))
        return GbdtModel("regression", cfg, trees, classes, base, 1, gains, curve)

    y_raw = y.astype(np.int64)
    if (y_raw != y).any() or (y_raw < 0).any():
        raise ValueError("classification target must hold nonnegative class indices")
    # compress to the classes actually present so round-robin never trains
    # empty classes; predictions map back through class_values
    class_values, y_int = np.unique(y_raw, return_inverse=True)
    n_classes = class_values.size
    counts = np.bincount(y_int, minlength=n_classes).astype(np.float64)
    trees = []
    classes = []
    if n_classes < 2:
        # constant target: prior-only ensemble, uniform importance fallback
        base = np.zeros(1)
        return GbdtModel("classification", cfg, trees, classes, base, 1, gains, curve, class_values)

    # per-class prior log-odds, clipped away from degenerate 0/1 rates
    rate = np.clip(counts / n, 1e-12, 1.0 - 1e-12)
    base = np.log(rate / (1.0 - rate))
    scores = np.tile(base, (n, 1))
    onehot = np.zeros((n, n_classes))
    onehot[rows, y_int] = 1.0
    for r in range(cfg.n_rounds):
        c = r % n_classes  # one-vs-rest round robin
        p = _sigmoid(scores[:, c])
        g = p - onehot[:, c]
        h = np.maximum(p * (1.0 - p), 1e-12)
        tree = _grow(x, g, h, rows, 0, cfg, gains)
        trees.append(tree)
        classes.append(c)
        scores[:, c] += cfg.learning_rate * _tree_predict(tree, x)
        p_all = _sigmoid(scores)
        eps = 1e-12
        ll = onehot * np.log(p_all + eps) + (1.0 - onehot) * np.log(1.0 - p_all + eps)
        curve.append(float(-ll.mean()))
    return GbdtModel("classification", cfg, trees, classes, base, n_classes, gains, curve, class_values)
