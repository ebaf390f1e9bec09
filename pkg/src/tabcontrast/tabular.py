"""Mixed-type tabular data model: schema, tables, splits, one-hot encoding.

Rows are stored raw (category indices / real values) so that corruption can
swap values in the original feature space; one-hot encoding and z-scoring
happen afterward, on the corrupted rows.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

MISSING = "?"


class ParseError(ValueError):
    pass


class SchemaError(ValueError):
    pass


class SplitError(ValueError):
    pass


@dataclass(frozen=True)
class FeatureSpec:
    """One column: either categorical with an ordered category list, or numerical."""

    name: str
    kind: str  # "categorical" | "numerical"
    categories: Optional[tuple[str, ...]] = None

    def __post_init__(self):
        if self.kind not in ("categorical", "numerical"):
            raise SchemaError(f"feature {self.name!r}: unknown kind {self.kind!r}")
        if self.kind == "categorical":
            if not self.categories:
                raise SchemaError(f"feature {self.name!r}: categorical needs categories")
            if len(set(self.categories)) != len(self.categories):
                raise SchemaError(f"feature {self.name!r}: duplicate categories")
        elif self.categories is not None:
            raise SchemaError(f"feature {self.name!r}: numerical feature has categories")

    @property
    def cardinality(self) -> int:
        return len(self.categories) if self.categories else 0


@dataclass(frozen=True)
class Schema:
    features: tuple[FeatureSpec, ...]
    label_name: str = "class"
    classes: tuple[str, ...] = ()

    def __post_init__(self):
        names = [f.name for f in self.features] + [self.label_name]
        if len(set(names)) != len(names):
            raise SchemaError("feature/label names must be unique")
        if self.classes and len(set(self.classes)) != len(self.classes):
            raise SchemaError("duplicate class names")

    @property
    def n_features(self) -> int:
        return len(self.features)

    @property
    def class_count(self) -> int:
        return len(self.classes)

    def to_dict(self) -> dict:
        return {
            "features": [
                {"name": f.name, "kind": f.kind}
                if f.kind == "numerical"
                else {"name": f.name, "kind": f.kind, "categories": list(f.categories)}
                for f in self.features
            ],
            "label": {"name": self.label_name, "classes": list(self.classes)},
        }

    @staticmethod
    def from_dict(d: dict) -> "Schema":
        feats = tuple(
            FeatureSpec(
                name=f["name"],
                kind=f["kind"],
                categories=tuple(f["categories"]) if f.get("categories") else None,
            )
            for f in d["features"]
        )
        label = d.get("label", {})
        return Schema(feats, label.get("name", "class"), tuple(label.get("classes", ())))


@dataclass
class Table:
    """N x M raw-value matrix plus optional class labels.

    Categorical cells hold the category index (stored as float for a uniform
    matrix); numerical cells hold the value itself. All cells are finite once
    the table exists: loading imputes missing entries.
    """

    schema: Schema
    values: np.ndarray  # (N, M) float64
    labels: Optional[np.ndarray] = None  # (N,) int64

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2 or self.values.shape[1] != self.schema.n_features:
            raise SchemaError("values shape does not match schema")
        if not np.isfinite(self.values).all():
            raise SchemaError("table holds non-finite cells")
        for j, f in enumerate(self.schema.features):
            if f.kind == "categorical":
                col = self.values[:, j]
                if ((col < 0) | (col >= f.cardinality) | (col != np.floor(col))).any():
                    raise SchemaError(f"feature {f.name!r}: category index out of range")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64)
            if self.labels.shape != (self.values.shape[0],):
                raise SchemaError("labels length does not match rows")
            if self.schema.class_count < 2:
                raise SchemaError("labeled table needs class_count >= 2")
            if ((self.labels < 0) | (self.labels >= self.schema.class_count)).any():
                raise SchemaError("label index out of range")

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_features(self) -> int:
        return self.schema.n_features

    @property
    def class_count(self) -> int:
        return self.schema.class_count


@dataclass(frozen=True)
class SplitSpec:
    """Disjoint labeled/unlabeled/test row indices covering the table."""

    labeled_idx: np.ndarray
    unlabeled_idx: np.ndarray
    test_idx: np.ndarray
    seed: int

    @property
    def train_idx(self) -> np.ndarray:
        """Labeled plus unlabeled rows, ascending. This is the corruption pool."""
        return np.sort(np.concatenate([self.labeled_idx, self.unlabeled_idx]))

    def validate(self, n_rows: int) -> None:
        parts = [self.labeled_idx, self.unlabeled_idx, self.test_idx]
        merged = np.concatenate(parts)
        if len(np.unique(merged)) != len(merged) or len(merged) != n_rows:
            raise SplitError("split must partition the table's rows")


def _parse_cell(cell: str, spec: FeatureSpec, row_no: int) -> float:
    cell = cell.strip()
    if cell == MISSING:
        return np.nan
    if spec.kind == "numerical":
        try:
            return float(cell)
        except ValueError:
            raise ParseError(f"row {row_no}: {cell!r} is not numeric for {spec.name!r}")
    try:
        return float(spec.categories.index(cell))
    except ValueError:
        raise SchemaError(f"feature {spec.name!r}: unknown category {cell!r} (row {row_no})")


def load_table(
    raw_rows: Sequence[Sequence[str]],
    schema: Schema,
    stats_rows: Optional[Sequence[int]] = None,
    with_labels: bool = True,
) -> Table:
    """Parse text records into a Table, imputing "?" cells.

    Each record carries M feature fields, plus a trailing label field when
    with_labels is set. Imputation statistics (mean for numerical, mode for
    categorical, ties to the lowest category index) come from stats_rows,
    defaulting to all rows; pass the training rows to keep test rows out of
    the statistics.
    """
    m = schema.n_features
    want = m + (1 if with_labels else 0)
    n = len(raw_rows)
    values = np.empty((n, m), dtype=np.float64)
    labels = np.empty(n, dtype=np.int64) if with_labels else None
    for i, rec in enumerate(raw_rows):
        if len(rec) != want:
            raise ParseError(f"row {i}: expected {want} fields, got {len(rec)}")
        for j, spec in enumerate(schema.features):
            values[i, j] = _parse_cell(rec[j], spec, i)
        if with_labels:
            cell = rec[m].strip()
            try:
                labels[i] = schema.classes.index(cell)
            except ValueError:
                raise SchemaError(f"unknown class {cell!r} (row {i})")

    pool = np.arange(n) if stats_rows is None else np.asarray(stats_rows, dtype=np.int64)
    for j, spec in enumerate(schema.features):
        col = values[:, j]
        miss = np.isnan(col)
        if not miss.any():
            continue
        known = col[pool][~np.isnan(col[pool])]
        if known.size == 0:
            raise SchemaError(f"feature {spec.name!r}: no observed values to impute from")
        if spec.kind == "numerical":
            fill = float(known.mean())
        else:
            counts = np.bincount(known.astype(np.int64), minlength=spec.cardinality)
            fill = float(np.argmax(counts))  # argmax takes the lowest index on ties
        col[miss] = fill
    return Table(schema, values, labels)


def _largest_remainder(targets: np.ndarray, total: int, caps: np.ndarray) -> np.ndarray:
    """Integer allocation summing to `total`, proportional to `targets`, per-class caps."""
    counts = np.floor(targets).astype(np.int64)
    counts = np.minimum(counts, caps)
    rest = total - int(counts.sum())
    if rest < 0:
        raise SplitError("allocation infeasible")
    frac = targets - np.floor(targets)
    # hand out the remainder by descending fractional part, ties to the lower class index
    order = np.lexsort((np.arange(len(targets)), -frac))
    k = 0
    while rest > 0:
        if k >= len(order):
            raise SplitError("allocation infeasible under per-class caps")
        c = order[k]
        if counts[c] < caps[c]:
            counts[c] += 1
            rest -= 1
        k += 1
    return counts


def make_split(
    table: Table,
    labeled_fraction: float = 0.1,
    test_fraction: float = 0.2,
    seed: int = 0,
) -> SplitSpec:
    """Stratified labeled/unlabeled/test split, deterministic given seed.

    Per-class counts follow the largest-remainder rule so the totals equal
    round(fraction * N) exactly; every class must land at least one labeled row.
    """
    if not (0.0 < labeled_fraction < 1.0 and 0.0 < test_fraction < 1.0):
        raise SplitError("fractions must lie in (0, 1)")
    if labeled_fraction + test_fraction >= 1.0:
        raise SplitError("labeled_fraction + test_fraction must be < 1")
    if table.labels is None:
        raise SplitError("stratified split needs labels")

    n = table.n_rows
    rng = np.random.default_rng(seed)
    class_rows = [np.flatnonzero(table.labels == c) for c in range(table.class_count)]
    counts = np.array([len(r) for r in class_rows], dtype=np.int64)
    if (counts == 0).any():
        raise SplitError("every class needs at least one row")

    n_test = int(round(test_fraction * n))
    n_lab = int(round(labeled_fraction * n))
    test_c = _largest_remainder(test_fraction * counts, n_test, caps=counts)
    lab_c = _largest_remainder(labeled_fraction * counts, n_lab, caps=counts - test_c)
    if (lab_c == 0).any():
        raise SplitError("a class received zero labeled rows; raise labeled_fraction")

    lab_parts, unl_parts, test_parts = [], [], []
    for rows, tc, lc in zip(class_rows, test_c, lab_c):
        perm = rng.permutation(rows)
        test_parts.append(perm[:tc])
        lab_parts.append(perm[tc : tc + lc])
        unl_parts.append(perm[tc + lc :])
    split = SplitSpec(
        labeled_idx=np.sort(np.concatenate(lab_parts)),
        unlabeled_idx=np.sort(np.concatenate(unl_parts)),
        test_idx=np.sort(np.concatenate(test_parts)),
        seed=seed,
    )
    split.validate(n)
    return split


@dataclass
class Encoder1Hot:
    """One-hot + z-score encoder fit on training-split statistics.

    Categorical feature j maps to a block of `cardinality` indicator columns;
    numerical feature j maps to one z-scored column. Population (1/N) std;
    constant columns store std 1 so they encode to 0.
    """

    schema: Schema
    offsets: np.ndarray  # (M,) start column of each feature block
    width: int
    means: np.ndarray  # (M,) 0.0 for categorical slots
    stds: np.ndarray  # (M,) 1.0 for categorical slots

    def encode(self, values: np.ndarray, dtype=np.float64) -> np.ndarray:
        values = np.atleast_2d(np.asarray(values, dtype=np.float64))
        n = values.shape[0]
        out = np.zeros((n, self.width), dtype=np.float64)
        for j, f in enumerate(self.schema.features):
            o = self.offsets[j]
            if f.kind == "categorical":
                idx = values[:, j].astype(np.int64)
                out[np.arange(n), o + idx] = 1.0
            else:
                out[:, o] = (values[:, j] - self.means[j]) / self.stds[j]
        return out.astype(dtype, copy=False)

    def decode_categorical(self, encoded: np.ndarray) -> np.ndarray:
        """Recover category indices from the one-hot blocks (argmax per block)."""
        encoded = np.atleast_2d(encoded)
        cats = [j for j, f in enumerate(self.schema.features) if f.kind == "categorical"]
        out = np.empty((encoded.shape[0], len(cats)), dtype=np.int64)
        for k, j in enumerate(cats):
            o = self.offsets[j]
            c = self.schema.features[j].cardinality
            out[:, k] = np.argmax(encoded[:, o : o + c], axis=1)
        return out


def fit_encoder(table: Table, split: SplitSpec) -> Encoder1Hot:
    """Fit encoding statistics on labeled + unlabeled rows only."""
    train = split.train_idx
    m = table.n_features
    offsets = np.zeros(m, dtype=np.int64)
    means = np.zeros(m, dtype=np.float64)
    stds = np.ones(m, dtype=np.float64)
    w = 0
    for j, f in enumerate(table.schema.features):
        offsets[j] = w
        if f.kind == "categorical":
            w += f.cardinality
        else:
            col = table.values[train, j]
            means[j] = col.mean()
            s = col.std()  # population convention (ddof=0)
            stds[j] = s if s > 0.0 else 1.0
            w += 1
    return Encoder1Hot(table.schema, offsets, w, means, stds)


def encode_row(row: np.ndarray, enc: Encoder1Hot, dtype=np.float64) -> np.ndarray:
    return enc.encode(np.asarray(row)[None, :], dtype=dtype)[0]


def read_schema(path) -> Schema:
    import json

    with open(path, "r", encoding="utf-8") as fh:
        return Schema.from_dict(json.load(fh))


def write_schema(schema: Schema, path) -> None:
    import json

    with open(path, "w", encoding="utf-8") as fh:
        json.dump(schema.to_dict(), fh, indent=2)
        fh.write("\n")


def read_csv_dataset(csv_path, schema_path, stats_rows=None) -> Table:
    """Load a CSV (header row, "?" missing marker) plus its schema sidecar."""
    import csv

    schema = read_schema(schema_path)
    with open(csv_path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        expected = [f.name for f in schema.features] + [schema.label_name]
        if [h.strip() for h in header] != expected:
            raise ParseError(f"CSV header {header} does not match schema columns {expected}")
        rows = [rec for rec in reader if rec]
    return load_table(rows, schema, stats_rows=stats_rows)


def table_to_records(table: Table) -> list[list[str]]:
    """Render a Table back to text records (inverse of load_table, no missing cells)."""
    recs = []
    for i in range(table.n_rows):
        rec = []
        for j, f in enumerate(table.schema.features):
            v = table.values[i, j]
            rec.append(f.categories[int(v)] if f.kind == "categorical" else repr(float(v)))
        if table.labels is not None:
            rec.append(table.schema.classes[int(table.labels[i])])
        recs.append(rec)
    return recs


def write_csv_dataset(table: Table, csv_path, schema_path) -> None:
    import csv

    write_schema(table.schema, schema_path)
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f.name for f in table.schema.features] + [table.schema.label_name])
        writer.writerows(table_to_records(table))
