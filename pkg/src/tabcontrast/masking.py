"""Correlation-guided feature-subset sampling.

Given a per-feature importance matrix Q (Q[i, j] = importance of feature j
when predicting feature i, zero diagonal), subsets are grown sequentially:
the first feature is uniform; afterwards each candidate j is scored by the
column-wise minimum of the selected rows of the direction matrix C (C = Q to
favor the most-correlated remaining feature, C = -Q for the least), selected
entries are zeroed, scores are shifted up only if negatives are present
(least mode makes every score non-positive), a small epsilon keeps the
distribution well-defined, and the next feature is drawn from the normalized
scores. Selected features always carry exactly zero probability.
"""
from __future__ import annotations

import numpy as np

SCORE_EPS = 1e-9
MODES = ("most", "least")


def _direction_matrix(profile_matrix: np.ndarray, mode: str) -> np.ndarray:
    q = np.asarray(profile_matrix, dtype=np.float64)
    if q.ndim != 2 or q.shape[0] != q.shape[1]:
        raise ValueError("profile matrix must be square")
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    return q if mode == "most" else -q


def step_probabilities(c_matrix: np.ndarray, selected: np.ndarray) -> np.ndarray:
    """Probability vector for the next feature given already-selected ones.

    Shared by the sampler and its test oracles so the scheme is stated once:
    column-min over selected rows, zero selected entries, shift by
    min(0, min over non-selected), add epsilon to non-selected, normalize.
    Falls back to uniform over the remaining features if all mass vanishes.
    """
    m = c_matrix.shape[0]
    selected = np.asarray(selected, dtype=np.int64)
    scores = c_matrix[selected].min(axis=0).astype(np.float64)
    mask = np.zeros(m, dtype=bool)
    mask[selected] = True
    scores[mask] = 0.0
    open_scores = scores[~mask]
    shift = min(0.0, float(open_scores.min()))
    scores[~mask] = open_scores - shift + SCORE_EPS
    total = scores.sum()
    if total <= 0.0:  # degenerate guard; epsilon keeps this unreachable in practice
        scores[~mask] = 1.0
        total = scores.sum()
    return scores / total


def sample_correlated_subset(
    profile_matrix: np.ndarray, mode: str, n_corrupt: int, rng: np.random.Generator
) -> np.ndarray:
    """Sequentially sample a feature subset of size n_corrupt, sorted."""
    c = _direction_matrix(profile_matrix, mode)
    m = c.shape[0]
    if n_corrupt > m:
        raise ValueError("cannot corrupt more features than exist")
    if n_corrupt == 0:
        return np.empty(0, dtype=np.int64)
    selected = [int(rng.integers(0, m))]
    for _ in range(1, n_corrupt):
        p = step_probabilities(c, np.array(selected))
        selected.append(int(rng.choice(m, p=p)))
    return np.sort(np.array(selected, dtype=np.int64))


def sample_correlated_subsets_batch(
    profile_matrix: np.ndarray, mode: str, n_corrupt: int, batch: int, rng: np.random.Generator
) -> np.ndarray:
    """Batched sequential sampler: one subset per row, unsorted draw order.

    Keeps a running column-minimum per row instead of re-slicing the matrix,
    and inverts the cumulative distribution with a single uniform per row and
    step. Zero-probability (selected) columns are unreachable because equal
    cumulative values are skipped by the right-open search.
    """
    c = _direction_matrix(profile_matrix, mode)
    m = c.shape[0]
    if n_corrupt > m:
        raise ValueError("cannot corrupt more features than exist")
    out = np.empty((batch, n_corrupt), dtype=np.int64)
    if n_corrupt == 0 or batch == 0:
        return out
    first = np.minimum((rng.random(batch) * m).astype(np.int64), m - 1)
    out[:, 0] = first
    if n_corrupt == 1:
        return out

    run_min = c[first].copy()  # (batch, m) column-mins over selected rows
    mask = np.zeros((batch, m), dtype=bool)
    rows = np.arange(batch)
    mask[rows, first] = True
    for step in range(1, n_corrupt):
        scores = run_min.copy()
        scores[mask] = np.inf  # exclude from the open-entry minimum
        open_min = scores.min(axis=1)
        shift = np.minimum(0.0, open_min)
        scores = scores - shift[:, None] + SCORE_EPS
        scores[mask] = 0.0
        cs = np.cumsum(scores, axis=1)
        cs /= cs[:, -1:]
        u = rng.random(batch)
        nxt = (cs <= u[:, None]).sum(axis=1)
        out[:, step] = nxt
        mask[rows, nxt] = True
        np.minimum(run_min, c[nxt], out=run_min)
    return out
