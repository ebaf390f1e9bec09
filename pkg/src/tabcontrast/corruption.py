"""Feature-value corruption: the view-generating augmentation g(x).

A corruption plan composes a feature-subset sampler (where to corrupt) with a
value sampler (how): subsets are drawn uniformly or by correlation-guided
sequential sampling, replacement values come from the whole training pool or
only from rows sharing the anchor's (pseudo-)class. Everything operates on
raw values; one-hot encoding happens afterward.

Per-anchor functions are the reference semantics. `corrupt_batch` is a
vectorised twin used by the training loop: it draws the same distributions
but organises RNG consumption per batch instead of per anchor.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .masking import sample_correlated_subset, sample_correlated_subsets_batch
from .tabular import Table

SUBSET_MODES = ("uniform", "most_correlated", "least_correlated")
VALUE_MODES = ("table_uniform", "class_conditioned")


@dataclass(frozen=True)
class CorruptionPlan:
    p: float
    subset_mode: str = "uniform"
    value_mode: str = "table_uniform"

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError("corruption fraction p must lie in [0, 1]")
        if self.subset_mode not in SUBSET_MODES:
            raise ValueError(f"unknown subset_mode {self.subset_mode!r}")
        if self.value_mode not in VALUE_MODES:
            raise ValueError(f"unknown value_mode {self.value_mode!r}")

    def n_corrupt(self, n_features: int) -> int:
        return math.ceil(n_features * self.p)


class CorruptionContext:
    """Training-row value pool, per-class row sets, optional importance profile.

    `class_of_row` assigns every pool row its (pseudo-)class; the per-class
    sets partition the pool, and each anchor is a pool member, so its own
    class set is never empty.
    """

    def __init__(
        self,
        pool_values: np.ndarray,
        class_of_row: Optional[np.ndarray] = None,
        class_count: int = 0,
        profile_matrix: Optional[np.ndarray] = None,
    ):
        self.pool_values = np.asarray(pool_values, dtype=np.float64)
        if self.pool_values.ndim != 2 or self.pool_values.shape[0] == 0:
            raise ValueError("pool must be a nonempty (rows, features) matrix")
        self.profile_matrix = profile_matrix
        self.class_of_row = None
        self.class_rows: list[np.ndarray] = []
        if class_of_row is not None:
            self.class_of_row = np.asarray(class_of_row, dtype=np.int64)
            if self.class_of_row.shape != (self.pool_values.shape[0],):
                raise ValueError("class_of_row must label every pool row")
            if class_count < 2:
                raise ValueError("class-conditioned pools need class_count >= 2")
            self.class_rows = [
                np.flatnonzero(self.class_of_row == c) for c in range(class_count)
            ]

    @staticmethod
    def from_table(
        table: Table,
        pool_idx: np.ndarray,
        class_of_row: Optional[np.ndarray] = None,
        profile_matrix: Optional[np.ndarray] = None,
    ) -> "CorruptionContext":
        return CorruptionContext(
            table.values[pool_idx],
            class_of_row=class_of_row,
            class_count=table.class_count if class_of_row is not None else 0,
            profile_matrix=profile_matrix,
        )

    @property
    def n_pool(self) -> int:
        return self.pool_values.shape[0]

    @property
    def n_features(self) -> int:
        return self.pool_values.shape[1]


@dataclass(frozen=True)
class ViewRow:
    values: np.ndarray
    corrupted_set: np.ndarray  # sorted feature indices, |set| = n_corrupt


def select_features_uniform(n_features: int, n_corrupt: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform without-replacement feature subset, sorted for a stable layout."""
    if n_corrupt > n_features:
        raise ValueError("cannot corrupt more features than exist")
    if n_corrupt == 0:
        return np.empty(0, dtype=np.int64)
    return np.sort(rng.choice(n_features, size=n_corrupt, replace=False)).astype(np.int64)


def sample_value_table_uniform(k: int, ctx: CorruptionContext, rng: np.random.Generator) -> float:
    """Value of feature k from a uniformly drawn training row (anchor not excluded)."""
    j = int(rng.integers(0, ctx.n_pool))
    return float(ctx.pool_values[j, k])


def sample_value_class_conditioned(
    k: int, anchor_class: int, ctx: CorruptionContext, rng: np.random.Generator
) -> float:
    """Value of feature k from a uniform row of the anchor's (pseudo-)class set."""
    rows = ctx.class_rows[anchor_class]
    if rows.size == 0:
        raise ValueError(f"class {anchor_class} has an empty pool")
    j = int(rng.integers(0, rows.size))
    return float(ctx.pool_values[rows[j], k])


def _select_subset(
    plan: CorruptionPlan, ctx: CorruptionContext, n: int, rng: np.random.Generator
) -> np.ndarray:
    if plan.subset_mode == "uniform":
        return select_features_uniform(ctx.n_features, n, rng)
    if ctx.profile_matrix is None:
        raise ValueError("correlated subset modes need an importance profile")
    mode = "most" if plan.subset_mode == "most_correlated" else "least"
    return sample_correlated_subset(ctx.profile_matrix, mode, n, rng)


def corrupt(
    anchor: np.ndarray,
    plan: CorruptionPlan,
    ctx: CorruptionContext,
    rng: np.random.Generator,
    anchor_class: Optional[int] = None,
) -> ViewRow:
    """Produce one corrupted view of an anchor row.

    Features outside the selected subset stay bit-identical to the anchor.
    Replacement values are drawn per corrupted feature in ascending feature
    order, matching the algorithmic loop.
    """
    anchor = np.asarray(anchor, dtype=np.float64)
    n = plan.n_corrupt(anchor.shape[0])
    subset = _select_subset(plan, ctx, n, rng)
    values = anchor.copy()
    for k in subset:  # ascending order fixes RNG consumption
        if plan.value_mode == "table_uniform":
            values[k] = sample_value_table_uniform(int(k), ctx, rng)
        else:
            if anchor_class is None:
                raise ValueError("class_conditioned corruption needs the anchor's class")
            values[k] = sample_value_class_conditioned(int(k), int(anchor_class), ctx, rng)
    return ViewRow(values=values, corrupted_set=subset)


def _uniform_subsets_batch(
    batch: int, n_features: int, n_corrupt: int, rng: np.random.Generator
) -> np.ndarray:
    # random-key trick: the n smallest keys per row form a uniform
    # without-replacement subset
    keys = rng.random((batch, n_features))
    part = np.argpartition(keys, n_corrupt - 1, axis=1)[:, :n_corrupt]
    return np.sort(part, axis=1).astype(np.int64)


def corrupt_batch(
    anchors: np.ndarray,
    plan: CorruptionPlan,
    ctx: CorruptionContext,
    rng: np.random.Generator,
    anchor_classes: Optional[np.ndarray] = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised corruption of a batch of anchors.

    Returns (views, subsets) with views shaped like anchors and subsets a
    (batch, n_corrupt) index matrix. Distributionally identical to calling
    `corrupt` per anchor; the RNG stream is organised per batch.
    """
    anchors = np.atleast_2d(np.asarray(anchors, dtype=np.float64))
    b, m = anchors.shape
    n = plan.n_corrupt(m)
    views = anchors.copy()
    if n == 0 or b == 0:
        return views, np.empty((b, 0), dtype=np.int64)

    if plan.subset_mode == "uniform":
        subsets = _uniform_subsets_batch(b, m, n, rng)
    else:
        if ctx.profile_matrix is None:
            raise ValueError("correlated subset modes need an importance profile")
        mode = "most" if plan.subset_mode == "most_correlated" else "least"
        subsets = sample_correlated_subsets_batch(ctx.profile_matrix, mode, n, b, rng)
        subsets = np.sort(subsets, axis=1)

    if plan.value_mode == "table_uniform":
        rows = rng.integers(0, ctx.n_pool, size=(b, n))
    else:
        if anchor_classes is None:
            raise ValueError("class_conditioned corruption needs anchor classes")
        anchor_classes = np.asarray(anchor_classes, dtype=np.int64)
        sizes = np.array([r.size for r in ctx.class_rows], dtype=np.int64)
        if (sizes[anchor_classes] == 0).any():
            raise ValueError("an anchor's class pool is empty")
        # pad the ragged per-class row lists into one rectangle for gathering
        pad = np.zeros((len(ctx.class_rows), max(int(sizes.max()), 1)), dtype=np.int64)
        for c, r in enumerate(ctx.class_rows):
            pad[c, : r.size] = r
        u = rng.random((b, n))
        offs = np.minimum((u * sizes[anchor_classes, None]).astype(np.int64),
                          sizes[anchor_classes, None] - 1)
        rows = pad[anchor_classes[:, None], offs]

    arange_b = np.arange(b)[:, None]
    views[arange_b, subsets] = ctx.pool_values[rows, subsets]
    return views, subsets
