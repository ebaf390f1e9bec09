"""Per-feature importance profiles and the table-level correlation range.

For each feature k, a boosted-tree model predicts k from the remaining
features over the training rows; its normalized gain importances become row k
of the profile matrix. Categorical predictors enter the trees one-hot encoded
and their block gains are summed back to the parent feature, so profiles stay
aligned with the raw features the masker corrupts.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .gbdt import GbdtConfig, fit_gbdt, importance_from_gains
from .tabular import SplitSpec, Table


@dataclass
class ImportanceProfile:
    """matrix[k, j] = importance of feature j for predicting feature k.

    Zero diagonal; every row sums to 1 over its off-diagonal entries
    (uniform fallback rows included).
    """

    matrix: np.ndarray
    feature_names: tuple[str, ...]

    @property
    def n_features(self) -> int:
        return self.matrix.shape[0]

    def vector_for(self, k: int) -> np.ndarray:
        """q_k as the (M-1)-vector over the other features, ascending index."""
        return np.delete(self.matrix[k], k)

    def validate(self) -> None:
        m = self.matrix
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("profile matrix must be square")
        if (np.diag(m) != 0.0).any():
            raise ValueError("profile diagonal must be zero")
        if (m < 0.0).any():
            raise ValueError("importances must be nonnegative")
        rows = m.sum(axis=1)
        if np.abs(rows - 1.0).max() > 1e-9:
            raise ValueError("each importance row must sum to 1")


@dataclass(frozen=True)
class CorrMatrix:
    c: np.ndarray
    mode: str  # "most" | "least"

    @staticmethod
    def from_profile(profile: ImportanceProfile, mode: str) -> "CorrMatrix":
        if mode == "most":
            return CorrMatrix(profile.matrix.copy(), mode)
        if mode == "least":
            return CorrMatrix(-profile.matrix, mode)
        raise ValueError(f"unknown mode {mode!r}")


def _tree_inputs(table: Table, exclude: int) -> tuple[np.ndarray, np.ndarray]:
    """One-hot/raw design matrix over all features but `exclude`.

    Returns (X, parent) where parent[c] is the raw feature index owning
    encoded column c.
    """
    cols = []
    parents = []
    for j, f in enumerate(table.schema.features):
        if j == exclude:
            continue
        if f.kind == "categorical":
            idx = table.values[:, j].astype(np.int64)
            block = np.zeros((table.n_rows, f.cardinality))
            block[np.arange(table.n_rows), idx] = 1.0
            cols.append(block)
            parents.extend([j] * f.cardinality)
        else:
            cols.append(table.values[:, j : j + 1])
            parents.append(j)
    return np.hstack(cols), np.asarray(parents, dtype=np.int64)


def build_profiles(
    table: Table, split: Optional[SplitSpec] = None, cfg: GbdtConfig = GbdtConfig()
) -> ImportanceProfile:
    """Fit one boosted model per feature over the training rows (labeled + unlabeled)."""
    m = table.n_features
    if m < 2:
        raise ValueError("profiles need at least two features")
    rows = split.train_idx if split is not None else np.arange(table.n_rows)
    sub = Table(table.schema, table.values[rows], None)
    matrix = np.zeros((m, m), dtype=np.float64)
    for k, f in enumerate(table.schema.features):
        x, parents = _tree_inputs(sub, k)
        target = sub.values[:, k]
        task = "classification" if f.kind == "categorical" else "regression"
        model = fit_gbdt(x, target, task, cfg)
        col_gains = model.importance_gains
        parent_gains = np.zeros(m, dtype=np.float64)
        np.add.at(parent_gains, parents, col_gains)
        q = importance_from_gains(np.delete(parent_gains, k), m - 1)
        matrix[k] = np.insert(q, k, 0.0)
    profile = ImportanceProfile(matrix, tuple(f.name for f in table.schema.features))
    profile.validate()
    return profile


def correlation_value_range(profile: ImportanceProfile) -> float:
    """max - min over off-diagonal entries; lies in [0, 1] for valid profiles."""
    m = profile.n_features
    if m < 2:
        raise ValueError("range needs at least two features")
    off = profile.matrix[~np.eye(m, dtype=bool)]
    return float(off.max() - off.min())


def gbdt_cfg_hash(cfg: GbdtConfig) -> str:
    payload = json.dumps(
        {
            "n_rounds": cfg.n_rounds,
            "max_depth": cfg.max_depth,
            "learning_rate": cfg.learning_rate,
            "min_samples_leaf": cfg.min_samples_leaf,
        },
        sort_keys=True,
    )
    return hashlib.sha256(payload.encode()).hexdigest()[:12]


def save_profile(profile: ImportanceProfile, path, dataset_id: str = "", cfg_hash: str = "") -> None:
    doc = {
        "dataset_id": dataset_id,
        "cfg_hash": cfg_hash,
        "feature_names": list(profile.feature_names),
        "matrix": profile.matrix.tolist(),
        "correlation_value_range": correlation_value_range(profile),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def load_profile(path) -> ImportanceProfile:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    profile = ImportanceProfile(
        np.asarray(doc["matrix"], dtype=np.float64), tuple(doc["feature_names"])
    )
    profile.validate()
    return profile
