import numpy as np
import pytest

from tabcontrast import FeatureSpec, Schema, Table


@pytest.fixture
def mixed_schema() -> Schema:
    return Schema(
        features=(
            FeatureSpec("age", "numerical"),
            FeatureSpec("color", "categorical", ("red", "green", "blue")),
            FeatureSpec("weight", "numerical"),
        ),
        label_name="class",
        classes=("neg", "pos"),
    )


@pytest.fixture
def mixed_table(mixed_schema) -> Table:
    values = np.array(
        [
            [1.0, 0, 10.0],
            [2.0, 1, 20.0],
            [3.0, 2, 30.0],
            [4.0, 0, 40.0],
            [5.0, 1, 50.0],
            [6.0, 2, 60.0],
            [7.0, 0, 70.0],
            [8.0, 1, 80.0],
            [9.0, 2, 90.0],
            [10.0, 0, 100.0],
        ],
        dtype=np.float64,
    )
    labels = np.array([0, 0, 0, 0, 0, 1, 1, 1, 1, 1], dtype=np.int64)
    return Table(mixed_schema, values, labels)


@pytest.fixture
def make_blobs():
    """Two well-separated numeric Gaussian blobs as a labeled Table."""

    def _make(n_per_class=40, n_features=5, spread=0.3, gap=4.0, seed=0,
              n_classes=2) -> Table:
        rng = np.random.default_rng(seed)
        feats = tuple(
            FeatureSpec(f"f{j}", "numerical") for j in range(n_features)
        )
        classes = tuple(f"c{k}" for k in range(n_classes))
        schema = Schema(features=feats, label_name="class", classes=classes)
        parts, labels = [], []
        for k in range(n_classes):
            center = np.zeros(n_features)
            center[k % n_features] = gap * (k + 1)
            parts.append(center + spread * rng.normal(size=(n_per_class, n_features)))
            labels += [k] * n_per_class
        return Table(
            schema,
            np.concatenate(parts, axis=0),
            np.array(labels, dtype=np.int64),
        )

    return _make
