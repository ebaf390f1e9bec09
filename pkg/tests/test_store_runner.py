"""Results store durability and the sweep runner's resume/report behavior."""

import json
from pathlib import Path

import numpy as np
import pytest

from tabcontrast import (
    ConfigError,
    RunManifest,
    RunRecord,
    RunStageError,
    ResultsStore,
    StoreError,
    execute,
    resolve_dataset,
    write_report,
)
from tabcontrast.openml import FetchError
from tabcontrast.runner import (
    dataset_label,
    load_manifest,
    profile_for,
    train_config_for,
)
from tabcontrast.store import (
    method_id,
    read_loss_curve,
    record_key,
    to_samples,
    write_loss_curve,
)


def _record(dataset="iris", method="random", subset="uniform", seed=0, acc=0.8):
    return RunRecord(
        dataset=dataset,
        method=method,
        subset_mode=subset,
        seed=seed,
        accuracy=acc,
        auroc=min(1.0, acc + 0.05),
        loss_curve=(1.5, 1.2, 1.0),
        manifest_hash="cafe01234567",
    )


# ------------------------------------------------------------------ store


def test_record_key_is_filesystem_safe_and_complete():
    key = record_key("openml-15", "random", "uniform", 3, "abc123")
    assert key == "openml-15__random__uniform__seed3__abc123"
    hostile = record_key("my data/set", "random", "uniform", 0, "")
    assert "/" not in hostile and " " not in hostile
    assert hostile.endswith("__nohash")


def test_method_id_folds_in_nonuniform_subset_mode():
    assert method_id("random", "uniform") == "random"
    assert method_id("random", "most_correlated") == "random+most_correlated"


def test_append_load_round_trip(tmp_path):
    store = ResultsStore(tmp_path)
    rec = _record()
    assert store.append(rec) is True
    assert store.append(rec) is False  # idempotent: the cell is taken
    assert len(list((tmp_path / "records").glob("*.json"))) == 1
    loaded = store.load()
    assert loaded == [rec]
    assert store.has(store.key_of(rec))
    assert store.find(store.key_of(rec)) == rec


def test_load_filters_by_dataset(tmp_path):
    store = ResultsStore(tmp_path)
    store.append(_record(dataset="iris"))
    store.append(_record(dataset="wine", seed=1))
    assert {r.dataset for r in store.load(["wine"])} == {"wine"}
    assert len(store.load()) == 2
    with pytest.raises(StoreError):
        store.find("missing__key")


def test_to_samples_uses_the_method_id():
    recs = [
        _record(method="random", subset="most_correlated"),
        _record(method="oracle", seed=1),
    ]
    samples = to_samples(recs)
    assert samples[0].method == "random+most_correlated"
    assert samples[1].method == "oracle"
    assert samples[0].accuracy == recs[0].accuracy


def test_loss_curve_file_round_trip(tmp_path):
    path = tmp_path / "curve.tsv"
    curve = [1.2345678901234, 0.9, 0.5e-7]
    write_loss_curve(path, curve)
    lines = path.read_text().splitlines()
    assert lines[0] == "epoch\tloss"
    assert lines[1].startswith("1\t")
    back = read_loss_curve(path)
    assert np.allclose(back, curve, rtol=1e-9)


# --------------------------------------------------------------- manifest


def test_manifest_round_trip_and_hash(tmp_path):
    m = RunManifest(dataset="builtin:iris", out_dir=str(tmp_path), seeds=(0, 1))
    again = RunManifest.from_dict(json.loads(m.to_json()))
    assert again == m
    assert again.hash() == m.hash()
    path = tmp_path / "manifest.json"
    path.write_text(m.to_json())
    assert load_manifest(path) == m
    assert m.hash() != RunManifest(
        dataset="builtin:iris", out_dir=str(tmp_path), seeds=(0, 2)
    ).hash()


def test_manifest_validation():
    with pytest.raises(ConfigError):
        RunManifest(dataset="", out_dir="x")
    with pytest.raises(ConfigError):
        RunManifest(dataset="builtin:iris", out_dir="x", seeds=())
    with pytest.raises(ConfigError):
        RunManifest(dataset="builtin:iris", out_dir="x", seeds=(1, 1))
    with pytest.raises(ConfigError):
        RunManifest(dataset="builtin:iris", out_dir="x", methods=("magic",))
    with pytest.raises(ConfigError):
        RunManifest.from_dict({"dataset": "d", "out_dir": "o", "fuel": 3})


def test_dataset_label_forms():
    assert dataset_label("openml:15") == "openml-15"
    assert dataset_label("builtin:wdbc") == "wdbc"
    assert dataset_label("data/run7/table.csv") == "table"


def test_resolve_dataset_sources(tmp_path, mixed_table):
    from tabcontrast import write_csv_dataset

    label, table = resolve_dataset(
        RunManifest(dataset="builtin:iris", out_dir=str(tmp_path))
    )
    assert label == "iris" and table.n_rows == 150

    csv_path = tmp_path / "toy.csv"
    write_csv_dataset(mixed_table, csv_path, tmp_path / "toy.schema.json")
    label, table = resolve_dataset(
        RunManifest(
            dataset=str(csv_path),
            out_dir=str(tmp_path),
            schema_path=str(tmp_path / "toy.schema.json"),
        )
    )
    assert label == "toy" and table.n_rows == 10

    with pytest.raises(ConfigError):
        resolve_dataset(RunManifest(dataset="builtin:ghost", out_dir="x"))
    with pytest.raises(ConfigError):
        resolve_dataset(RunManifest(dataset="openml:abc", out_dir="x"))
    with pytest.raises(ConfigError):
        resolve_dataset(RunManifest(dataset="ftp://nope", out_dir="x"))


# ---------------------------------------------------------------- execute


def _tiny_manifest(tmp_path, **overrides):
    base = dict(
        dataset="builtin:iris",
        out_dir=str(tmp_path / "out"),
        methods=("no_pretrain", "random"),
        seeds=(0, 1),
        pretrain_epochs=2,
        finetune_epochs=4,
        pseudo_update_interval=2,
        head_refresh_epochs=1,
        batch_size=64,
        hidden_width=8,
        encoder_hidden_layers=1,
        projection_width=4,
        gbdt_rounds=5,
        gbdt_max_depth=2,
    )
    base.update(overrides)
    return RunManifest(**base)


def test_execute_writes_the_full_artifact_tree(tmp_path):
    manifest = _tiny_manifest(tmp_path)
    records = execute(manifest)
    assert len(records) == 4
    out = Path(manifest.out_dir)
    written = RunManifest.from_dict(json.loads((out / "manifest.json").read_text()))
    assert written == manifest
    assert len(list((out / "records").glob("*.json"))) == 4
    assert len(list((out / "curves").glob("*.tsv"))) == 4
    assert len(list((out / "checkpoints").glob("*.npz"))) == 4
    assert len(list((out / "projections").glob("*.csv"))) == 4
    for r in records:
        assert r.dataset == "iris"
        assert r.manifest_hash == manifest.hash()
        assert 0.0 <= r.accuracy <= 1.0
    curves = {r.method: r.loss_curve for r in records}
    assert curves["no_pretrain"] == ()
    assert len(curves["random"]) == 2


def test_execute_resumes_from_the_store(tmp_path):
    manifest = _tiny_manifest(tmp_path)
    execute(manifest)
    log: list[str] = []
    again = execute(manifest, log=log.append)
    assert len(again) == 4
    assert sum("skip" in line for line in log) == 4
    assert sum("done" in line for line in log) == 0

    # drop one cell; only that cell reruns
    victims = sorted((Path(manifest.out_dir) / "records").glob("*random*seed1*"))
    assert len(victims) == 1
    victims[0].unlink()
    log.clear()
    final = execute(manifest, log=log.append)
    assert len(final) == 4
    assert sum("skip" in line for line in log) == 3
    assert sum("done" in line for line in log) == 1


def test_execute_wraps_fetch_failures(tmp_path):
    manifest = _tiny_manifest(tmp_path, dataset="openml:12345", cache_dir=str(tmp_path / "c"))

    def dead(url):
        raise FetchError("boom", status=503)

    with pytest.raises(RunStageError) as err:
        execute(manifest, transport=dead)
    assert err.value.stage == "fetch"
    assert isinstance(err.value.cause, FetchError)


def test_profile_cache_round_trip(tmp_path):
    manifest = _tiny_manifest(tmp_path, subset_mode="most_correlated")
    from tabcontrast import make_split

    label, table = resolve_dataset(manifest)
    split = make_split(table, 0.1, 0.2, seed=0)
    first = profile_for(manifest, table, split, label, 0)
    files = list((Path(manifest.out_dir) / "profiles").glob("*.json"))
    assert len(files) == 1
    second = profile_for(manifest, table, split, label, 0)
    assert (first.matrix == second.matrix).all()
    doc = json.loads(files[0].read_text())
    assert doc["dataset_id"] == "iris"
    assert 0.0 <= doc["correlation_value_range"] <= 1.0


def test_train_config_for_copies_manifest_fields(tmp_path):
    manifest = _tiny_manifest(tmp_path, subset_mode="least_correlated", tau=0.7)
    cfg = train_config_for(manifest, "oracle", 9)
    assert cfg.method == "oracle"
    assert cfg.seed == 9
    assert cfg.tau == 0.7
    assert cfg.subset_mode == "least_correlated"
    assert cfg.pretrain_epochs == manifest.pretrain_epochs


# ----------------------------------------------------------------- report


def test_write_report_emits_tables(tmp_path):
    manifest = _tiny_manifest(tmp_path)
    execute(manifest)
    texts = write_report(manifest.out_dir)
    assert set(texts) == {"accuracy", "auroc", "win_matrix"}
    assert texts["accuracy"].splitlines()[0] == "dataset\tno_pretrain\trandom"
    assert texts["accuracy"].splitlines()[1].startswith("iris\t")
    rdir = Path(manifest.out_dir) / "report"
    for name in texts:
        assert (rdir / f"{name}.tsv").exists()


def test_write_report_includes_ranges_when_profiles_exist(tmp_path):
    manifest = _tiny_manifest(
        tmp_path, subset_mode="most_correlated", methods=("random", "oracle")
    )
    execute(manifest)
    texts = write_report(manifest.out_dir)
    assert "ranges" in texts
    lines = texts["ranges"].splitlines()
    assert lines[0].startswith("dataset\tcorrelation_value_range\t")
    cells = lines[1].split("\t")
    assert cells[0] == "iris"
    assert 0.0 <= float(cells[1]) <= 1.0


def test_write_report_rejects_thin_stores(tmp_path):
    with pytest.raises(StoreError):
        write_report(tmp_path)  # empty store
    store = ResultsStore(tmp_path)
    store.append(_record(seed=0))
    store.append(_record(seed=1))
    with pytest.raises(StoreError):
        write_report(tmp_path)  # single method

    store.append(_record(method="oracle", seed=0))
    store.append(_record(method="oracle", seed=1))
    store.append(_record(method="oracle", seed=2))
    with pytest.raises(StoreError) as err:
        write_report(tmp_path)  # 2 vs 3 seeds: one side gets named
    msg = str(err.value)
    assert msg.startswith("uneven seed counts")
    assert "iris/oracle: 3 seeds" in msg or "iris/random: 2 seeds" in msg
