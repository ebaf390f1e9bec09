"""Command-line front end.

Subcommands: fetch (dataset acquisition), run (sweep execution), report
(tables + win matrix), project (embedding PCA export from a checkpoint),
curve (loss-curve export).  Exit codes: 0 ok, 2 configuration problem,
3 fetch failure, 4 numeric divergence, 1 anything else.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

import numpy as np

from .evaluation import pca_project, separation_ratio, write_projection_csv
from .neural import forward_encoder, load_checkpoint
from .openml import FetchError, fetch_openml
from .runner import (
    ConfigError,
    RunManifest,
    RunStageError,
    dataset_label,
    execute,
    load_manifest,
    resolve_dataset,
    write_report,
)
from .store import ResultsStore, StoreError, write_loss_curve
from .tabular import fit_encoder, make_split
from .training import DivergenceError

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_FETCH = 3
EXIT_DIVERGENCE = 4


def _add_run_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--manifest", help="manifest JSON; its fields override flags")
    sub.add_argument("--dataset", help="openml:DID | builtin:NAME | path.csv")
    sub.add_argument("--out-dir", help="output directory for all run artifacts")
    sub.add_argument("--methods", default="class_conditioned",
                     help="comma list: no_pretrain,random,class_conditioned,oracle")
    sub.add_argument("--subset-mode", default="uniform",
                     choices=("uniform", "most_correlated", "least_correlated"))
    sub.add_argument("--seeds", default="0,1,2,3,4,5,6,7,8,9", help="comma list of ints")
    sub.add_argument("--labeled-fraction", type=float, default=0.1)
    sub.add_argument("--test-fraction", type=float, default=0.2)
    sub.add_argument("--pretrain-epochs", type=int, default=500)
    sub.add_argument("--finetune-epochs", type=int, default=100)
    sub.add_argument("--pseudo-update-interval", type=int, default=10)
    sub.add_argument("--head-refresh-epochs", type=int, default=5)
    sub.add_argument("--batch-size", type=int, default=128)
    sub.add_argument("--p", type=float, default=0.6, help="corrupted feature fraction")
    sub.add_argument("--tau", type=float, default=1.0)
    sub.add_argument("--learning-rate", type=float, default=1e-3)
    sub.add_argument("--head-learning-rate", type=float, default=1e-2)
    sub.add_argument("--hidden-width", type=int, default=256)
    sub.add_argument("--encoder-hidden-layers", type=int, default=4)
    sub.add_argument("--projection-width", type=int, default=256)
    sub.add_argument("--cache-dir", default="openml_cache")
    sub.add_argument("--schema-path", default="")
    sub.add_argument("--gbdt-rounds", type=int, default=50)
    sub.add_argument("--gbdt-max-depth", type=int, default=3)
    sub.add_argument("--warm-start-head", action="store_true")
    sub.add_argument("--reinit-head-at-refresh", action="store_true")


def _manifest_from_args(args: argparse.Namespace) -> RunManifest:
    doc = {
        "dataset": args.dataset or "",
        "out_dir": args.out_dir or "",
        "methods": tuple(m for m in args.methods.split(",") if m),
        "subset_mode": args.subset_mode,
        "seeds": tuple(int(s) for s in args.seeds.split(",") if s),
        "labeled_fraction": args.labeled_fraction,
        "test_fraction": args.test_fraction,
        "pretrain_epochs": args.pretrain_epochs,
        "finetune_epochs": args.finetune_epochs,
        "pseudo_update_interval": args.pseudo_update_interval,
        "head_refresh_epochs": args.head_refresh_epochs,
        "batch_size": args.batch_size,
        "p": args.p,
        "tau": args.tau,
        "learning_rate": args.learning_rate,
        "head_learning_rate": args.head_learning_rate,
        "hidden_width": args.hidden_width,
        "encoder_hidden_layers": args.encoder_hidden_layers,
        "projection_width": args.projection_width,
        "cache_dir": args.cache_dir,
        "schema_path": args.schema_path,
        "gbdt_rounds": args.gbdt_rounds,
        "gbdt_max_depth": args.gbdt_max_depth,
        "warm_start_head": args.warm_start_head,
        "reinit_head_at_refresh": args.reinit_head_at_refresh,
    }
    if args.manifest:
        file_doc = load_manifest(args.manifest).to_dict()
        doc.update(file_doc)
        return RunManifest.from_dict(doc)
    try:
        return RunManifest.from_dict(doc)
    except dataclasses.FrozenInstanceError:  # pragma: no cover
        raise ConfigError("manifest construction failed")


def _cmd_fetch(args: argparse.Namespace) -> int:
    table, schema = fetch_openml(args.did, args.cache_dir)
    print(
        f"did {args.did}: {table.n_rows} rows, {schema.n_features} features, "
        f"{schema.class_count} classes (cache: {args.cache_dir})"
    )
    return EXIT_OK


def _cmd_run(args: argparse.Namespace) -> int:
    manifest = _manifest_from_args(args)
    records = execute(manifest, log=print)
    print(f"{len(records)} records in store under {manifest.out_dir}")
    return EXIT_OK


def _cmd_report(args: argparse.Namespace) -> int:
    datasets = [d for d in args.datasets.split(",") if d] if args.datasets else None
    texts = write_report(args.out_dir, datasets)
    print(texts["accuracy"], end="")
    print(f"report files written under {Path(args.out_dir) / 'report'}")
    return EXIT_OK


def _cmd_project(args: argparse.Namespace) -> int:
    params, _, _, _, _ = load_checkpoint(args.checkpoint)
    manifest = RunManifest(
        dataset=args.dataset,
        out_dir=".",
        seeds=(args.split_seed,),
        labeled_fraction=args.labeled_fraction,
        test_fraction=args.test_fraction,
        cache_dir=args.cache_dir,
        schema_path=args.schema_path,
    )
    _, table = resolve_dataset(manifest)
    if table.labels is None:
        raise ConfigError("projection needs a labeled dataset")
    split = make_split(
        table, args.labeled_fraction, args.test_fraction, seed=args.split_seed
    )
    encoder = fit_encoder(table, split)
    x_test = encoder.encode(table.values[split.test_idx], dtype=np.float32)
    h_test, _ = forward_encoder(x_test, params)
    proj = pca_project(h_test.astype(np.float64), table.labels[split.test_idx])
    write_projection_csv(args.out, proj)
    ratio = separation_ratio(proj.coords, proj.labels)
    ev = ", ".join(f"{v:.4g}" for v in proj.explained_variance)
    print(f"{dataset_label(args.dataset)}: separation_ratio={ratio:.4f} explained=[{ev}]")
    print(f"projection written to {args.out}")
    return EXIT_OK


def _cmd_curve(args: argparse.Namespace) -> int:
    store = ResultsStore(args.out_dir)
    records = store.load()
    hits = [
        r
        for r in records
        if r.dataset == args.dataset
        and r.method == args.method
        and r.seed == args.seed
        and (args.subset_mode is None or r.subset_mode == args.subset_mode)
    ]
    if not hits:
        raise StoreError(
            f"no record for dataset={args.dataset} method={args.method} seed={args.seed}"
        )
    if len(hits) > 1:
        keys = ", ".join(store.key_of(r) for r in hits)
        raise ConfigError(f"ambiguous selection, matches: {keys}")
    record = hits[0]
    if args.out:
        write_loss_curve(args.out, record.loss_curve)
        print(f"curve written to {args.out}")
    else:
        print("epoch\tloss")
        for e, v in enumerate(record.loss_curve):
            print(f"{e + 1}\t{v:.10g}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tabcontrast",
        description="Semi-supervised contrastive learning on tabular data",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    fetch = subs.add_parser("fetch", help="download and cache an OpenML dataset")
    fetch.add_argument("--did", type=int, required=True)
    fetch.add_argument("--cache-dir", default="openml_cache")
    fetch.set_defaults(fn=_cmd_fetch)

    run = subs.add_parser("run", help="execute a (method, seed) sweep")
    _add_run_flags(run)
    run.set_defaults(fn=_cmd_run)

    report = subs.add_parser("report", help="emit metric tables and the win matrix")
    report.add_argument("--out-dir", required=True, help="a run's output directory")
    report.add_argument("--datasets", default="", help="comma list filter")
    report.set_defaults(fn=_cmd_report)

    project = subs.add_parser("project", help="export a 3-D PCA of test embeddings")
    project.add_argument("--checkpoint", required=True)
    project.add_argument("--dataset", required=True)
    project.add_argument("--out", required=True)
    project.add_argument("--cache-dir", default="openml_cache")
    project.add_argument("--schema-path", default="")
    project.add_argument("--labeled-fraction", type=float, default=0.1)
    project.add_argument("--test-fraction", type=float, default=0.2)
    project.add_argument("--split-seed", type=int, default=0)
    project.set_defaults(fn=_cmd_project)

    curve = subs.add_parser("curve", help="export one run's loss curve")
    curve.add_argument("--out-dir", required=True)
    curve.add_argument("--dataset", required=True)
    curve.add_argument("--method", required=True)
    curve.add_argument("--seed", type=int, required=True)
    curve.add_argument("--subset-mode", default=None)
    curve.add_argument("--out", default="")
    curve.set_defaults(fn=_cmd_curve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except FetchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FETCH
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except RunStageError as exc:
        cause = exc.cause
        print(f"error: {exc}", file=sys.stderr)
        if isinstance(cause, DivergenceError):
            return EXIT_DIVERGENCE
        if isinstance(cause, FetchError):
            return EXIT_FETCH
        return EXIT_FAILURE
    except (StoreError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # pragma: no cover - last-resort guard
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
