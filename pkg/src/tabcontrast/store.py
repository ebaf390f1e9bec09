"""Append-only on-disk store of run records.

One JSON file per (dataset, method, subset_mode, seed, manifest-hash) key,
created atomically (write to a temp file, then rename) so parallel workers
never interleave partial writes.  Existing keys are never overwritten, which
is what makes interrupted sweeps resumable: finished cells are skipped.
"""

from __future__ import annotations

import json
import os
import re
from pathlib import Path
from typing import Optional, Sequence

from .evaluation import MetricSample
from .training import RunRecord


class StoreError(ValueError):
    pass


def _safe(part: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "-", str(part)) or "x"


def record_key(
    dataset: str, method: str, subset_mode: str, seed: int, manifest_hash: str
) -> str:
    return "__".join(
        (_safe(dataset), _safe(method), _safe(subset_mode), f"seed{int(seed)}",
         _safe(manifest_hash) if manifest_hash else "nohash")
    )


def method_id(method: str, subset_mode: str) -> str:
    """Reporting identity of an arm; subset mode folded in when not uniform."""
    return method if subset_mode == "uniform" else f"{method}+{subset_mode}"


class ResultsStore:
    def __init__(self, root):
        self.root = Path(root)
        self.records_dir = self.root / "records"
        self.records_dir.mkdir(parents=True, exist_ok=True)

    def _path(self, key: str) -> Path:
        return self.records_dir / f"{key}.json"

    def key_of(self, record: RunRecord) -> str:
        return record_key(
            record.dataset, record.method, record.subset_mode, record.seed,
            record.manifest_hash,
        )

    def has(self, key: str) -> bool:
        return self._path(key).exists()

    def append(self, record: RunRecord) -> bool:
        """Write the record unless its key exists; returns True when written."""
        key = self.key_of(record)
        path = self._path(key)
        if path.exists():
            return False
        doc = {
            "dataset": record.dataset,
            "method": record.method,
            "subset_mode": record.subset_mode,
            "seed": record.seed,
            "accuracy": record.accuracy,
            "auroc": record.auroc,
            "loss_curve": list(record.loss_curve),
            "manifest_hash": record.manifest_hash,
        }
        tmp = path.with_name(f".{key}.{os.getpid()}.tmp")
        tmp.write_text(json.dumps(doc, indent=1))
        os.replace(tmp, path)
        return True

    def load(self, datasets: Optional[Sequence[str]] = None) -> list[RunRecord]:
        wanted = set(datasets) if datasets is not None else None
        out = []
        for path in sorted(self.records_dir.glob("*.json")):
            doc = json.loads(path.read_text())
            rec = RunRecord(
                dataset=doc["dataset"],
                method=doc["method"],
                subset_mode=doc["subset_mode"],
                seed=int(doc["seed"]),
                accuracy=float(doc["accuracy"]),
                auroc=float(doc["auroc"]),
                loss_curve=tuple(doc["loss_curve"]),
                manifest_hash=doc.get("manifest_hash", ""),
            )
            if wanted is None or rec.dataset in wanted:
                out.append(rec)
        return out

    def find(self, key: str) -> RunRecord:
        matches = [r for r in self.load() if self.key_of(r) == key]
        if not matches:
            raise StoreError(f"no record with key {key!r}")
        return matches[0]


def to_samples(records: Sequence[RunRecord]) -> list[MetricSample]:
    return [
        MetricSample(
            dataset=r.dataset,
            method=method_id(r.method, r.subset_mode),
            seed=r.seed,
            accuracy=r.accuracy,
            auroc=r.auroc,
        )
        for r in records
    ]


def write_loss_curve(path, curve: Sequence[float]) -> None:
    """Columnar (epoch, loss) text, tab separated, 1-based epochs."""
    lines = ["epoch\tloss"]
    lines += [f"{e + 1}\t{v:.10g}" for e, v in enumerate(curve)]
    Path(path).write_text("\n".join(lines) + "\n")


def read_loss_curve(path) -> list[float]:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != "epoch\tloss":
        raise StoreError(f"{path}: not a loss-curve file")
    return [float(line.split("\t")[1]) for line in lines[1:] if line]
