"""Metrics and cross-method comparison utilities.

Accuracy and AUROC score individual runs.  Welch's t-test compares two
method's per-seed accuracy samples, and the win matrix aggregates those
pairwise tests over a basket of datasets.  A 3-component PCA projector
supports visual inspection of learned embeddings.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import special

UNDEFINED_CELL = "—"


class MetricError(ValueError):
    """Raised when a metric's input is degenerate or malformed."""


@dataclass(frozen=True)
class MetricSample:
    """One run's scores, keyed by dataset, method id and seed."""

    dataset: str
    method: str
    seed: int
    accuracy: float
    auroc: float


def accuracy(predicted: np.ndarray, truth: np.ndarray) -> float:
    predicted = np.asarray(predicted)
    truth = np.asarray(truth)
    if predicted.shape != truth.shape or predicted.ndim != 1:
        raise MetricError("predicted and truth must be 1-D arrays of equal length")
    if predicted.size == 0:
        raise MetricError("accuracy of an empty prediction set is undefined")
    return float(np.mean(predicted == truth))


def _midranks(scores: np.ndarray) -> np.ndarray:
    """1-based ranks with ties assigned the mean rank of their run.

    Rank values are of the form (a + b) / 2 for integers a, b, so they are
    exact in binary floating point for any realistic sample size.
    """
    n = scores.shape[0]
    order = np.argsort(scores, kind="stable")
    ordered = scores[order]
    starts = np.flatnonzero(np.concatenate(([True], ordered[1:] != ordered[:-1])))
    ends = np.concatenate((starts[1:], [n]))
    # run occupying sorted positions [start, end) gets rank (start+1 + end)/2
    run_rank = (starts + 1 + ends) / 2.0
    ranks = np.empty(n, dtype=np.float64)
    ranks[order] = np.repeat(run_rank, ends - starts)
    return ranks


def _binary_auroc(scores: np.ndarray, positive: np.ndarray) -> float:
    n_pos = int(np.count_nonzero(positive))
    n_neg = positive.shape[0] - n_pos
    if n_pos == 0 or n_neg == 0:
        raise MetricError("binary AUROC needs at least one positive and one negative")
    ranks = _midranks(scores)
    rank_sum = float(np.sum(ranks[positive]))
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def auroc(scores: np.ndarray, truth: np.ndarray) -> float:
    """Macro one-vs-rest AUROC from per-class scores.

    `scores` is (n, n_classes); column c is the score for class c.  Classes
    absent from `truth` are skipped.  Ties in a score column contribute at
    the midrank rate, so a constant column scores exactly 0.5.
    """
    scores = np.asarray(scores, dtype=np.float64)
    truth = np.asarray(truth)
    if scores.ndim != 2 or truth.ndim != 1 or scores.shape[0] != truth.shape[0]:
        raise MetricError("scores must be (n, n_classes) aligned with 1-D truth")
    if scores.shape[0] == 0:
        raise MetricError("AUROC of an empty sample is undefined")
    present = np.unique(truth)
    if present.size < 2:
        raise MetricError("AUROC undefined when truth holds a single class")
    if int(present.max()) >= scores.shape[1] or int(present.min()) < 0:
        raise MetricError("truth labels exceed the score matrix width")
    per_class = [_binary_auroc(scores[:, int(c)], truth == c) for c in present]
    return float(np.mean(per_class))


def welch_t_test(a: Sequence[float], b: Sequence[float]) -> tuple[float, float, float]:
    """Two-sided Welch's t-test; returns (t, degrees_of_freedom, p).

    Degenerate samples (both variances zero) short-circuit: equal means give
    p = 1, unequal means p = 0, with t = 0 or +-inf and df reported as nan.
    """
    xa = np.asarray(a, dtype=np.float64)
    xb = np.asarray(b, dtype=np.float64)
    if xa.ndim != 1 or xb.ndim != 1 or xa.size < 2 or xb.size < 2:
        raise MetricError("each sample needs at least two observations")
    na, nb = xa.size, xb.size
    ma, mb = float(np.mean(xa)), float(np.mean(xb))
    va = float(np.var(xa, ddof=1))
    vb = float(np.var(xb, ddof=1))
    if va == 0.0 and vb == 0.0:
        if ma == mb:
            return 0.0, float("nan"), 1.0
        return math.copysign(math.inf, ma - mb), float("nan"), 0.0
    sa, sb = va / na, vb / nb
    t = (ma - mb) / math.sqrt(sa + sb)
    df = (sa + sb) ** 2 / (sa * sa / (na - 1) + sb * sb / (nb - 1))
    # two-sided p for Student's t: regularized incomplete beta at df/(df+t^2)
    p = float(special.betainc(df / 2.0, 0.5, df / (df + t * t)))
    return t, df, p


@dataclass(frozen=True)
class WinMatrix:
    """Pairwise win ratios over significant comparisons (alpha-tested).

    ratio[i, j] is the fraction of datasets, among those where methods i and
    j differ significantly, on which i has the higher mean score.  Undefined
    cells (no significant comparison, or the diagonal) hold nan.
    """

    methods: tuple[str, ...]
    ratio: np.ndarray
    wins: np.ndarray
    significant: np.ndarray


def win_matrix(
    samples: Sequence[MetricSample],
    alpha: float = 0.05,
    metric: str = "accuracy",
) -> WinMatrix:
    if not samples:
        raise MetricError("win matrix needs at least one sample")
    if metric not in ("accuracy", "auroc"):
        raise MetricError(f"unknown metric {metric!r}")
    methods: list[str] = []
    datasets: list[str] = []
    for s in samples:
        if s.method not in methods:
            methods.append(s.method)
        if s.dataset not in datasets:
            datasets.append(s.dataset)
    cells: dict[tuple[str, str], list[tuple[int, float]]] = {}
    for s in samples:
        value = s.accuracy if metric == "accuracy" else s.auroc
        cells.setdefault((s.dataset, s.method), []).append((s.seed, value))
    counts = {len(v) for v in cells.values()}
    if len(cells) != len(methods) * len(datasets):
        raise MetricError("every (dataset, method) cell must be populated")
    if len(counts) != 1 or counts.pop() < 2:
        raise MetricError("all cells must share one seed count of at least 2")
    m = len(methods)
    wins = np.zeros((m, m), dtype=np.int64)
    significant = np.zeros((m, m), dtype=np.int64)
    for d in datasets:
        for i in range(m):
            for j in range(i + 1, m):
                va = [v for _, v in sorted(cells[(d, methods[i])])]
                vb = [v for _, v in sorted(cells[(d, methods[j])])]
                _, _, p = welch_t_test(va, vb)
                if p < alpha:
                    significant[i, j] += 1
                    significant[j, i] += 1
                    if float(np.mean(va)) > float(np.mean(vb)):
                        wins[i, j] += 1
                    else:
                        wins[j, i] += 1
    with np.errstate(invalid="ignore"):
        ratio = np.where(significant > 0, wins / np.maximum(significant, 1), np.nan)
    np.fill_diagonal(ratio, np.nan)
    return WinMatrix(tuple(methods), ratio, wins, significant)


@dataclass(frozen=True)
class Projection3D:
    """First three principal components of a set of embeddings."""

    components: np.ndarray
    coords: np.ndarray
    labels: np.ndarray
    explained_variance: np.ndarray


def pca_project(embeddings: np.ndarray, labels: np.ndarray) -> Projection3D:
    """Project rows of `embeddings` onto their top 3 principal directions.

    Components come from the SVD of the mean-centered matrix; explained
    variance uses the sample convention s^2 / (n - 1).  When the centered
    matrix has rank below 3 the remaining components are still returned
    (orthonormal, from the same SVD) with explained variance forced to 0.
    """
    x = np.asarray(embeddings, dtype=np.float64)
    labels = np.asarray(labels)
    if x.ndim != 2 or x.shape[0] != labels.shape[0]:
        raise MetricError("embeddings must be (n, d) aligned with labels")
    n, d = x.shape
    if n < 2 or d < 3:
        raise MetricError("need at least 2 rows and 3 feature dimensions")
    centered = x - np.mean(x, axis=0)
    _, s, vt = np.linalg.svd(centered, full_matrices=True)
    components = vt[:3].copy()
    sing = np.zeros(3, dtype=np.float64)
    sing[: min(3, s.shape[0])] = s[:3]
    tol = (s[0] if s.shape[0] else 0.0) * max(n, d) * np.finfo(np.float64).eps
    explained = np.where(sing > tol, sing**2 / (n - 1), 0.0)
    coords = centered @ components.T
    return Projection3D(components, coords, labels.copy(), explained)


def separation_ratio(coords: np.ndarray, labels: np.ndarray) -> float:
    """Between-class centroid spread over mean within-class scatter.

    Spread is the mean pairwise distance between class centroids; scatter is
    the mean, over classes, of the mean distance from a point to its class
    centroid.  Larger values mean visually cleaner class separation.
    """
    coords = np.asarray(coords, dtype=np.float64)
    labels = np.asarray(labels)
    classes = np.unique(labels)
    if classes.size < 2:
        raise MetricError("separation ratio needs at least two classes")
    centroids = np.stack([coords[labels == c].mean(axis=0) for c in classes])
    scatters = [
        float(np.mean(np.linalg.norm(coords[labels == c] - centroids[k], axis=1)))
        for k, c in enumerate(classes)
    ]
    pair_dists = [
        float(np.linalg.norm(centroids[i] - centroids[j]))
        for i in range(classes.size)
        for j in range(i + 1, classes.size)
    ]
    scatter = float(np.mean(scatters))
    if scatter == 0.0:
        raise MetricError("all points coincide with their class centroid")
    return float(np.mean(pair_dists)) / scatter


def format_metric_table(
    samples: Sequence[MetricSample], metric: str = "accuracy"
) -> str:
    """Datasets x methods table of "mean+-std" percents (two decimals).

    Mean and sample standard deviation (ddof=1) are computed over seeds and
    scaled by 100.  Column order follows first appearance in `samples`.
    """
    if not samples:
        raise MetricError("cannot format an empty sample list")
    if metric not in ("accuracy", "auroc"):
        raise MetricError(f"unknown metric {metric!r}")
    methods: list[str] = []
    datasets: list[str] = []
    cells: dict[tuple[str, str], list[float]] = {}
    for s in samples:
        if s.method not in methods:
            methods.append(s.method)
        if s.dataset not in datasets:
            datasets.append(s.dataset)
        value = s.accuracy if metric == "accuracy" else s.auroc
        cells.setdefault((s.dataset, s.method), []).append(value)
    lines = ["dataset\t" + "\t".join(methods)]
    for d in datasets:
        row = [d]
        for meth in methods:
            vals = cells.get((d, meth))
            if not vals:
                row.append(UNDEFINED_CELL)
                continue
            mean = 100.0 * float(np.mean(vals))
            std = 100.0 * (float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0)
            row.append(f"{mean:.2f}±{std:.2f}")
        lines.append("\t".join(row))
    return "\n".join(lines) + "\n"


def format_win_matrix(matrix: WinMatrix) -> str:
    lines = ["method\t" + "\t".join(matrix.methods)]
    for i, name in enumerate(matrix.methods):
        row = [name]
        for j in range(len(matrix.methods)):
            v = matrix.ratio[i, j]
            row.append(UNDEFINED_CELL if np.isnan(v) else f"{v:.3f}")
        lines.append("\t".join(row))
    return "\n".join(lines) + "\n"


def write_projection_csv(
    path: str,
    projection: Projection3D,
    split_roles: Sequence[str] | None = None,
) -> None:
    """Write coords as CSV with columns pc1, pc2, pc3, class, split_role."""
    n = projection.coords.shape[0]
    roles = list(split_roles) if split_roles is not None else ["test"] * n
    if len(roles) != n:
        raise MetricError("split_roles length must match the projection")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["pc1", "pc2", "pc3", "class", "split_role"])
        for k in range(n):
            writer.writerow(
                [
                    f"{projection.coords[k, 0]:.10g}",
                    f"{projection.coords[k, 1]:.10g}",
                    f"{projection.coords[k, 2]:.10g}",
                    int(projection.labels[k]),
                    roles[k],
                ]
            )
