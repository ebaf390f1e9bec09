"""Sweep orchestration: manifest, dataset resolution, run loop, reports.

A manifest names one dataset and a grid of (method, seed) cells.  Every
cell's outputs (record, loss curve, checkpoint, test-embedding projection)
land under one output directory, keyed by the manifest hash, so re-running
the same manifest resumes instead of recomputing.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .correlation import (
    ImportanceProfile,
    build_profiles,
    correlation_value_range,
    gbdt_cfg_hash,
    load_profile,
    save_profile,
)
from .datasets import get_builtin
from .evaluation import (
    UNDEFINED_CELL,
    format_metric_table,
    format_win_matrix,
    pca_project,
    win_matrix,
    write_projection_csv,
)
from .gbdt import GbdtConfig
from .neural import forward_encoder, init_model, save_checkpoint
from .openml import Transport, fetch_openml
from .store import ResultsStore, StoreError, record_key, to_samples, write_loss_curve
from .tabular import Table, fit_encoder, make_split, read_csv_dataset
from .training import (
    METHODS,
    RunRecord,
    TrainConfig,
    finetune,
    model_spec,
    pretrain,
    rng_streams,
)


class ConfigError(ValueError):
    """Manifest or argument problem; maps to the config-error exit code."""


class RunStageError(RuntimeError):
    """Failure inside one named stage of a sweep."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass(frozen=True)
class RunManifest:
    dataset: str
    out_dir: str
    methods: tuple[str, ...] = ("class_conditioned",)
    subset_mode: str = "uniform"
    seeds: tuple[int, ...] = tuple(range(10))
    labeled_fraction: float = 0.1
    test_fraction: float = 0.2
    pretrain_epochs: int = 500
    finetune_epochs: int = 100
    pseudo_update_interval: int = 10
    head_refresh_epochs: int = 5
    batch_size: int = 128
    p: float = 0.6
    tau: float = 1.0
    learning_rate: float = 1e-3
    head_learning_rate: float = 1e-2
    hidden_width: int = 256
    encoder_hidden_layers: int = 4
    projection_width: int = 256
    cache_dir: str = "openml_cache"
    schema_path: str = ""
    gbdt_rounds: int = 50
    gbdt_max_depth: int = 3
    warm_start_head: bool = False
    reinit_head_at_refresh: bool = False

    def __post_init__(self):
        if not self.dataset:
            raise ConfigError("manifest needs a dataset source")
        if not self.out_dir:
            raise ConfigError("manifest needs an output directory")
        if not self.seeds:
            raise ConfigError("manifest needs a nonempty seed list")
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigError("duplicate seeds in manifest")
        if not self.methods:
            raise ConfigError("manifest needs at least one method")
        for m in self.methods:
            if m not in METHODS:
                raise ConfigError(f"unknown method {m!r}")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)

    def hash(self) -> str:
        return hashlib.sha256(self.to_json().encode("utf-8")).hexdigest()[:12]

    @staticmethod
    def from_dict(doc: dict) -> "RunManifest":
        fields = {f.name for f in dataclasses.fields(RunManifest)}
        unknown = set(doc) - fields
        if unknown:
            raise ConfigError(f"unknown manifest fields: {sorted(unknown)}")
        doc = dict(doc)
        for tup in ("methods", "seeds"):
            if tup in doc:
                doc[tup] = tuple(doc[tup])
        try:
            return RunManifest(**doc)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None


def load_manifest(path) -> RunManifest:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read manifest {path}: {exc}") from exc
    return RunManifest.from_dict(doc)


def dataset_label(source: str) -> str:
    if source.startswith("openml:"):
        return "openml-" + source.split(":", 1)[1]
    if source.startswith("builtin:"):
        return source.split(":", 1)[1]
    return Path(source).stem


def resolve_dataset(
    manifest: RunManifest, transport: Optional[Transport] = None
) -> tuple[str, Table]:
    source = manifest.dataset
    label = dataset_label(source)
    if source.startswith("openml:"):
        try:
            did = int(source.split(":", 1)[1])
        except ValueError:
            raise ConfigError(f"bad OpenML source {source!r}") from None
        table, _ = fetch_openml(did, manifest.cache_dir, transport)
        return label, table
    if source.startswith("builtin:"):
        try:
            return label, get_builtin(source.split(":", 1)[1])
        except KeyError as exc:
            raise ConfigError(str(exc)) from None
    if source.endswith(".csv"):
        schema_path = manifest.schema_path or source[: -len(".csv")] + ".schema.json"
        return label, read_csv_dataset(source, schema_path)
    raise ConfigError(
        f"unresolvable dataset source {source!r}; use openml:DID, builtin:NAME, or a .csv path"
    )


def train_config_for(manifest: RunManifest, method: str, seed: int) -> TrainConfig:
    return TrainConfig(
        method=method,
        subset_mode=manifest.subset_mode,
        pretrain_epochs=manifest.pretrain_epochs,
        finetune_epochs=manifest.finetune_epochs,
        pseudo_update_interval=manifest.pseudo_update_interval,
        head_refresh_epochs=manifest.head_refresh_epochs,
        batch_size=manifest.batch_size,
        p=manifest.p,
        tau=manifest.tau,
        learning_rate=manifest.learning_rate,
        head_learning_rate=manifest.head_learning_rate,
        hidden_width=manifest.hidden_width,
        encoder_hidden_layers=manifest.encoder_hidden_layers,
        projection_width=manifest.projection_width,
        seed=seed,
        warm_start_head=manifest.warm_start_head,
        reinit_head_at_refresh=manifest.reinit_head_at_refresh,
    )


def profile_for(
    manifest: RunManifest, table: Table, split, dataset_id: str, seed: int
) -> ImportanceProfile:
    """Train-split importance profile, cached on disk per (dataset, cfg, seed)."""
    cfg = GbdtConfig(n_rounds=manifest.gbdt_rounds, max_depth=manifest.gbdt_max_depth)
    h = gbdt_cfg_hash(cfg)
    pdir = Path(manifest.out_dir) / "profiles"
    pdir.mkdir(parents=True, exist_ok=True)
    path = pdir / f"{dataset_id}__{h}__seed{seed}.json"
    if path.exists():
        return load_profile(path)
    profile = build_profiles(table, split, cfg)
    save_profile(profile, path, dataset_id=dataset_id, cfg_hash=h)
    return profile


def _write_projection(path, table: Table, split, params) -> None:
    encoder = fit_encoder(table, split)
    x_test = encoder.encode(table.values[split.test_idx], dtype=np.float32)
    h_test, _ = forward_encoder(x_test, params)
    proj = pca_project(h_test.astype(np.float64), table.labels[split.test_idx])
    write_projection_csv(path, proj)


def execute(
    manifest: RunManifest,
    transport: Optional[Transport] = None,
    log=None,
) -> list[RunRecord]:
    """Run every (method, seed) cell not already in the store.

    Raises RunStageError naming the failing stage; cells finished before a
    failure stay on disk, so a rerun picks up where this one stopped.
    """
    say = log if log is not None else (lambda msg: None)
    out = Path(manifest.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "manifest.json").write_text(manifest.to_json() + "\n")
    for sub in ("curves", "checkpoints", "projections"):
        (out / sub).mkdir(exist_ok=True)
    store = ResultsStore(out)
    mhash = manifest.hash()

    try:
        dataset_id, table = resolve_dataset(manifest, transport)
    except ConfigError:
        raise
    except Exception as exc:
        raise RunStageError("fetch", exc) from exc
    if table.labels is None:
        raise ConfigError(f"dataset {manifest.dataset!r} has no class labels")

    records: list[RunRecord] = []
    for seed in manifest.seeds:
        try:
            split = make_split(
                table, manifest.labeled_fraction, manifest.test_fraction, seed=seed
            )
        except Exception as exc:
            raise RunStageError("split", exc) from exc
        profile = None
        if manifest.subset_mode != "uniform":
            try:
                profile = profile_for(manifest, table, split, dataset_id, seed)
            except Exception as exc:
                raise RunStageError("profile", exc) from exc
        for method in manifest.methods:
            key = record_key(dataset_id, method, manifest.subset_mode, seed, mhash)
            if store.has(key):
                say(f"skip {key} (already in store)")
                records.append(store.find(key))
                continue
            cfg = train_config_for(manifest, method, seed)
            if method == "no_pretrain":
                encoder = fit_encoder(table, split)
                spec = model_spec(cfg, encoder.width, table.schema.class_count)
                params = init_model(spec, rng_streams(seed)["init"])
                curve: tuple[float, ...] = ()
            else:
                try:
                    params, curve_list = pretrain(table, split, cfg, profile)
                except Exception as exc:
                    raise RunStageError("pretrain", exc) from exc
                curve = tuple(curve_list)
            try:
                result = finetune(table, split, params, cfg)
            except Exception as exc:
                raise RunStageError("finetune", exc) from exc
            record = RunRecord(
                dataset=dataset_id,
                method=method,
                subset_mode=manifest.subset_mode,
                seed=seed,
                accuracy=result.accuracy,
                auroc=result.auroc,
                loss_curve=curve,
                manifest_hash=mhash,
            )
            try:
                save_checkpoint(
                    out / "checkpoints" / key,
                    params,
                    epoch=cfg.pretrain_epochs,
                    extra={"key": key, "dataset": dataset_id, "seed": seed},
                )
                write_loss_curve(out / "curves" / f"{key}.tsv", curve)
                _write_projection(out / "projections" / f"{key}.csv", table, split, params)
                store.append(record)
            except Exception as exc:
                raise RunStageError("persist", exc) from exc
            records.append(record)
            say(
                f"done {key}: accuracy={record.accuracy:.4f} auroc={record.auroc:.4f}"
            )
    return records


def _seed_count_offenders(samples) -> list[str]:
    counts: dict[tuple[str, str], int] = {}
    for s in samples:
        counts[(s.dataset, s.method)] = counts.get((s.dataset, s.method), 0) + 1
    values = set(counts.values())
    if len(values) <= 1 and (not values or min(values) >= 2):
        return []
    majority = max(values, key=lambda v: sum(1 for c in counts.values() if c == v))
    return [
        f"{d}/{m}: {c} seeds"
        for (d, m), c in sorted(counts.items())
        if c != majority or c < 2
    ]


def write_report(store_root, datasets=None) -> dict[str, str]:
    """Emit accuracy/AUROC tables and the win matrix; returns text by name.

    Files land under {store_root}/report.  When importance profiles exist a
    per-dataset correlation-value-range table is emitted too.
    """
    store = ResultsStore(store_root)
    records = store.load(datasets)
    if not records:
        raise StoreError("store holds no matching records")
    samples = to_samples(records)
    if len({s.method for s in samples}) < 2:
        raise StoreError("report needs at least two methods to compare")
    offenders = _seed_count_offenders(samples)
    if offenders:
        raise StoreError("uneven seed counts: " + "; ".join(offenders))

    texts = {
        "accuracy": format_metric_table(samples, "accuracy"),
        "auroc": format_metric_table(samples, "auroc"),
        "win_matrix": format_win_matrix(win_matrix(samples)),
    }

    ranges = _profile_ranges(store_root)
    if ranges:
        texts["ranges"] = _format_range_table(samples, ranges)

    rdir = Path(store_root) / "report"
    rdir.mkdir(parents=True, exist_ok=True)
    for name, text in texts.items():
        (rdir / f"{name}.tsv").write_text(text)
    return texts


def _profile_ranges(store_root) -> dict[str, float]:
    """Mean stored correlation range per dataset id, from cached profiles."""
    pdir = Path(store_root) / "profiles"
    if not pdir.is_dir():
        return {}
    acc: dict[str, list[float]] = {}
    for path in sorted(pdir.glob("*.json")):
        doc = json.loads(path.read_text())
        rng = doc.get("correlation_value_range")
        if rng is None:
            profile = load_profile(path)
            rng = correlation_value_range(profile)
        acc.setdefault(doc.get("dataset_id", path.stem), []).append(float(rng))
    return {k: float(np.mean(v)) for k, v in acc.items()}


def _format_range_table(samples, ranges: dict[str, float]) -> str:
    methods: list[str] = []
    datasets: list[str] = []
    cells: dict[tuple[str, str], list[float]] = {}
    for s in samples:
        if s.method not in methods:
            methods.append(s.method)
        if s.dataset not in datasets:
            datasets.append(s.dataset)
        cells.setdefault((s.dataset, s.method), []).append(s.accuracy)
    lines = ["dataset\tcorrelation_value_range\t" + "\t".join(methods)]
    for d in datasets:
        if d not in ranges:
            continue
        row = [d, f"{ranges[d]:.3f}"]
        for m in methods:
            vals = cells.get((d, m), [])
            if vals:
                mean = 100.0 * float(np.mean(vals))
                std = 100.0 * (float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0)
                row.append(f"{mean:.2f}±{std:.2f}")
            else:
                row.append(UNDEFINED_CELL)
        lines.append("\t".join(row))
    return "\n".join(lines) + "\n"
