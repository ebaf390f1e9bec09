"""Command-line behavior: full run/report/curve/project loop on a builtin
dataset, manifest-file precedence, and the exit-code contract."""

import json
from pathlib import Path

import pytest

import tabcontrast.cli as cli
from tabcontrast import DivergenceError, RunManifest, RunStageError
from tabcontrast.cli import (
    EXIT_CONFIG,
    EXIT_DIVERGENCE,
    EXIT_FAILURE,
    EXIT_FETCH,
    EXIT_OK,
    main,
)
from tabcontrast.openml import FetchError

TINY = [
    "--methods", "no_pretrain,random",
    "--seeds", "0,1",
    "--pretrain-epochs", "2",
    "--finetune-epochs", "4",
    "--pseudo-update-interval", "2",
    "--head-refresh-epochs", "1",
    "--batch-size", "64",
    "--hidden-width", "8",
    "--encoder-hidden-layers", "1",
    "--projection-width", "4",
]


def _run_args(out_dir):
    return ["run", "--dataset", "builtin:iris", "--out-dir", str(out_dir), *TINY]


def test_run_report_curve_project_loop(tmp_path, capsys):
    out = tmp_path / "sweep"
    assert main(_run_args(out)) == EXIT_OK
    stdout = capsys.readouterr().out
    assert "4 records in store" in stdout

    assert main(["report", "--out-dir", str(out)]) == EXIT_OK
    stdout = capsys.readouterr().out
    assert stdout.splitlines()[0] == "dataset\tno_pretrain\trandom"
    assert stdout.splitlines()[1].startswith("iris\t")

    assert main([
        "curve", "--out-dir", str(out), "--dataset", "iris",
        "--method", "random", "--seed", "1",
    ]) == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "epoch\tloss"
    assert len(lines) == 3  # two pretrain epochs

    curve_file = tmp_path / "c.tsv"
    assert main([
        "curve", "--out-dir", str(out), "--dataset", "iris",
        "--method", "random", "--seed", "1", "--out", str(curve_file),
    ]) == EXIT_OK
    capsys.readouterr()
    assert curve_file.read_text().splitlines()[0] == "epoch\tloss"

    ckpt = sorted((out / "checkpoints").glob("*random*seed0*.npz"))[0]
    proj_file = tmp_path / "proj.csv"
    assert main([
        "project", "--checkpoint", str(ckpt), "--dataset", "builtin:iris",
        "--out", str(proj_file),
    ]) == EXIT_OK
    stdout = capsys.readouterr().out
    assert "separation_ratio=" in stdout
    assert proj_file.read_text().startswith("pc1,pc2,pc3,class,split_role")


def test_run_resume_skips_finished_cells(tmp_path, capsys):
    out = tmp_path / "sweep"
    assert main(_run_args(out)) == EXIT_OK
    capsys.readouterr()
    assert main(_run_args(out)) == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert sum(line.startswith("skip ") for line in lines) == 4


def test_manifest_file_overrides_flags(tmp_path, capsys):
    out = tmp_path / "sweep"
    manifest = RunManifest.from_dict({
        "dataset": "builtin:iris",
        "out_dir": str(out),
        "methods": ("no_pretrain",),
        "seeds": (0,),
        "pretrain_epochs": 2,
        "finetune_epochs": 2,
        "pseudo_update_interval": 2,
        "hidden_width": 8,
        "encoder_hidden_layers": 1,
        "projection_width": 4,
    })
    mpath = tmp_path / "m.json"
    mpath.write_text(manifest.to_json())
    # the flags below disagree on everything; the file must win
    code = main([
        "run", "--manifest", str(mpath),
        "--dataset", "builtin:wine", "--out-dir", str(tmp_path / "elsewhere"),
        "--methods", "oracle", "--seeds", "5,6,7",
    ])
    assert code == EXIT_OK
    stdout = capsys.readouterr().out
    assert "1 records in store" in stdout
    written = json.loads((out / "manifest.json").read_text())
    assert written["dataset"] == "builtin:iris"
    assert written["methods"] == ["no_pretrain"]


def test_config_problems_exit_2(tmp_path, capsys):
    assert main([
        "run", "--dataset", "builtin:iris", "--out-dir", str(tmp_path),
        "--methods", "telepathy",
    ]) == EXIT_CONFIG
    assert "telepathy" in capsys.readouterr().err
    # empty store -> StoreError -> config exit
    assert main(["report", "--out-dir", str(tmp_path / "nothing")]) == EXIT_CONFIG
    # missing record for curve
    assert main([
        "curve", "--out-dir", str(tmp_path / "nothing"), "--dataset", "x",
        "--method", "random", "--seed", "0",
    ]) == EXIT_CONFIG


def test_fetch_failure_exits_3(tmp_path, capsys, monkeypatch):
    def dead(did, cache_dir, transport=None):
        raise FetchError("HTTP 503", status=503)

    monkeypatch.setattr(cli, "fetch_openml", dead)
    assert main(["fetch", "--did", "15", "--cache-dir", str(tmp_path)]) == EXIT_FETCH
    assert "503" in capsys.readouterr().err


def test_fetch_success_prints_counts(tmp_path, capsys, monkeypatch):
    from tabcontrast import get_builtin

    table = get_builtin("iris")
    monkeypatch.setattr(cli, "fetch_openml", lambda did, cd: (table, table.schema))
    assert main(["fetch", "--did", "61", "--cache-dir", str(tmp_path)]) == EXIT_OK
    out = capsys.readouterr().out
    assert "did 61: 150 rows, 4 features, 3 classes" in out


def test_stage_errors_map_to_exit_codes(tmp_path, capsys, monkeypatch):
    cases = [
        (DivergenceError(7, "loss diverged at epoch 7"), EXIT_DIVERGENCE),
        (RunStageError("pretrain", DivergenceError(2, "diverged")), EXIT_DIVERGENCE),
        (RunStageError("fetch", FetchError("gone")), EXIT_FETCH),
        (RunStageError("persist", OSError("disk full")), EXIT_FAILURE),
    ]
    for exc, want in cases:
        def boom(manifest, transport=None, log=None, _exc=exc):
            raise _exc

        monkeypatch.setattr(cli, "execute", boom)
        code = main(["run", "--dataset", "builtin:iris", "--out-dir", str(tmp_path)])
        assert code == want, f"{exc!r} -> {code}, wanted {want}"
        assert capsys.readouterr().err.startswith("error:")


def test_curve_disambiguation(tmp_path, capsys):
    from tabcontrast import ResultsStore, RunRecord

    store = ResultsStore(tmp_path)
    for subset in ("uniform", "most_correlated"):
        store.append(RunRecord(
            dataset="iris", method="random", subset_mode=subset, seed=0,
            accuracy=0.9, auroc=0.95, loss_curve=(1.0, 0.5), manifest_hash="h",
        ))
    args = [
        "curve", "--out-dir", str(tmp_path), "--dataset", "iris",
        "--method", "random", "--seed", "0",
    ]
    assert main(args) == EXIT_CONFIG  # two records match
    assert "ambiguous" in capsys.readouterr().err
    assert main([*args, "--subset-mode", "most_correlated"]) == EXIT_OK
    capsys.readouterr()


def test_unknown_subcommand_is_an_argparse_error():
    with pytest.raises(SystemExit):
        main(["divine"])
