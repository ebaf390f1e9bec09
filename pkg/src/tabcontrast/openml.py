"""OpenML dataset client with a local cache and a small ARFF reader.

Fetches go through an injectable transport (url -> bytes) so tests can run
fully offline.  Each dataset id gets its own cache directory holding the raw
payloads, their checksums, and a canonical JSON form; once the canonical
form exists a fetch makes zero network requests.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Callable, Optional

from .tabular import ParseError, Schema, FeatureSpec, Table, load_table

DESCRIPTION_URL = "https://www.openml.org/api/v1/json/data/{did}"

Transport = Callable[[str], bytes]


class FetchError(RuntimeError):
    """Network or HTTP failure; retryable. Carries the HTTP status if known."""

    def __init__(self, message: str, status: Optional[int] = None):
        super().__init__(message)
        self.status = status


class UnsupportedFeatureError(ValueError):
    """Attribute kind this toolkit does not model (string, date, sparse)."""


def default_transport(url: str) -> bytes:
    import requests

    try:
        resp = requests.get(url, timeout=120)
    except requests.RequestException as exc:
        raise FetchError(f"request failed for {url}: {exc}") from exc
    if resp.status_code != 200:
        raise FetchError(
            f"HTTP {resp.status_code} fetching {url}", status=resp.status_code
        )
    return resp.content


def _sha256(payload: bytes) -> str:
    return hashlib.sha256(payload).hexdigest()


def _unquote(token: str) -> str:
    token = token.strip()
    if len(token) >= 2 and token[0] == token[-1] and token[0] in ("'", '"'):
        return token[1:-1]
    return token


def _split_csv_line(line: str) -> list[str]:
    """Split one data line on commas, honoring single/double quotes."""
    fields: list[str] = []
    buf: list[str] = []
    quote: Optional[str] = None
    for ch in line:
        if quote:
            if ch == quote:
                quote = None
            else:
                buf.append(ch)
        elif ch in ("'", '"'):
            quote = ch
        elif ch == ",":
            fields.append("".join(buf).strip())
            buf = []
        else:
            buf.append(ch)
    if quote:
        raise ParseError(f"unterminated quote in data line: {line!r}")
    fields.append("".join(buf).strip())
    return fields


def parse_arff(text: str) -> tuple[list[tuple[str, Optional[tuple[str, ...]]]], list[list[str]]]:
    """Parse ARFF text into (attributes, data rows).

    Each attribute is (name, categories) with categories None for numeric
    kinds.  String and date attributes, and sparse data rows, raise
    UnsupportedFeatureError; malformed structure raises ParseError.
    """
    attributes: list[tuple[str, Optional[tuple[str, ...]]]] = []
    rows: list[list[str]] = []
    in_data = False
    for raw_line in text.splitlines():
        line = raw_line.strip()
        if not line or line.startswith("%"):
            continue
        if not in_data:
            lower = line.lower()
            if lower.startswith("@relation"):
                continue
            if lower.startswith("@attribute"):
                rest = line[len("@attribute") :].strip()
                if rest.startswith(("'", '"')):
                    q = rest[0]
                    end = rest.index(q, 1)
                    name = rest[1:end]
                    kind = rest[end + 1 :].strip()
                else:
                    parts = rest.split(None, 1)
                    if len(parts) != 2:
                        raise ParseError(f"malformed attribute line: {line!r}")
                    name, kind = parts[0], parts[1].strip()
                if kind.startswith("{"):
                    if not kind.endswith("}"):
                        raise ParseError(f"unterminated category list for {name!r}")
                    cats = tuple(
                        _unquote(c) for c in _split_csv_line(kind[1:-1])
                    )
                    if len(set(cats)) != len(cats) or not cats:
                        raise ParseError(f"bad category list for {name!r}")
                    attributes.append((name, cats))
                elif kind.lower() in ("numeric", "real", "integer"):
                    attributes.append((name, None))
                else:
                    raise UnsupportedFeatureError(
                        f"attribute {name!r} has unsupported kind {kind!r}"
                    )
                continue
            if lower.startswith("@data"):
                if not attributes:
                    raise ParseError("@data before any @attribute")
                in_data = True
                continue
            raise ParseError(f"unrecognized header line: {line!r}")
        if line.startswith("{"):
            raise UnsupportedFeatureError("sparse ARFF data is not supported")
        fields = [_unquote(f) for f in _split_csv_line(line)]
        if len(fields) != len(attributes):
            raise ParseError(
                f"data row has {len(fields)} fields, expected {len(attributes)}"
            )
        rows.append(fields)
    if not in_data:
        raise ParseError("no @data section found")
    return attributes, rows


def _find_target(
    attributes: list[tuple[str, Optional[tuple[str, ...]]]], target_name: Optional[str]
) -> int:
    names = [a[0] for a in attributes]
    if target_name:
        if "," in target_name:
            raise UnsupportedFeatureError("multi-target datasets are not supported")
        for i, n in enumerate(names):
            if n.lower() == target_name.lower():
                return i
        raise ParseError(f"target attribute {target_name!r} not in header")
    for i, n in enumerate(names):
        if n.lower() == "class":
            return i
    raise ParseError("no target attribute declared and no 'class' column found")


def build_table(
    attributes: list[tuple[str, Optional[tuple[str, ...]]]],
    rows: list[list[str]],
    target_name: Optional[str],
) -> Table:
    """Assemble a Table from parsed ARFF content, target column last."""
    t = _find_target(attributes, target_name)
    target = attributes[t]
    if target[1] is None:
        raise UnsupportedFeatureError(
            f"target {target[0]!r} is numeric; only classification targets are modeled"
        )
    features = tuple(
        FeatureSpec(
            name=name,
            kind="numerical" if cats is None else "categorical",
            categories=cats,
        )
        for i, (name, cats) in enumerate(attributes)
        if i != t
    )
    schema = Schema(features=features, label_name=target[0], classes=target[1])
    records = []
    for i, row in enumerate(rows):
        if row[t] == "?":
            raise ParseError(f"row {i}: missing class label")
        records.append([c for k, c in enumerate(row) if k != t] + [row[t]])
    return load_table(records, schema)


def serialize_table_payload(
    did: int, name: str, target_name: str, attributes, rows
) -> str:
    """Canonical JSON form of a fetched dataset (raw cells, not parsed floats)."""
    return json.dumps(
        {
            "did": did,
            "name": name,
            "target": target_name,
            "attributes": [
                {"name": n, "categories": list(c) if c is not None else None}
                for n, c in attributes
            ],
            "rows": rows,
        },
        indent=0,
    )


def parse_table_payload(text: str) -> Table:
    doc = json.loads(text)
    attributes = [
        (a["name"], tuple(a["categories"]) if a["categories"] is not None else None)
        for a in doc["attributes"]
    ]
    return build_table(attributes, doc["rows"], doc["target"])


def fetch_openml(
    did: int,
    cache_dir,
    transport: Optional[Transport] = None,
) -> tuple[Table, Schema]:
    """Fetch dataset `did`, preferring the cache; returns (table, schema).

    Cache layout: {cache_dir}/did_{did}/ holding description.json, data.arff,
    checksums.json, and table.json (the canonical parsed form).  A complete,
    checksum-clean cache entry is served with zero transport calls.
    """
    base = Path(cache_dir) / f"did_{did}"
    canonical = base / "table.json"
    checks = base / "checksums.json"
    desc_path = base / "description.json"
    arff_path = base / "data.arff"

    if canonical.exists() and checks.exists():
        try:
            recorded = json.loads(checks.read_text())
            ok = (
                _sha256(desc_path.read_bytes()) == recorded.get("description.json")
                and _sha256(arff_path.read_bytes()) == recorded.get("data.arff")
            )
        except (OSError, ValueError):
            ok = False
        if ok:
            table = parse_table_payload(canonical.read_text())
            return table, table.schema

    send = transport if transport is not None else default_transport
    desc_bytes = send(DESCRIPTION_URL.format(did=did))
    try:
        desc = json.loads(desc_bytes)["data_set_description"]
    except (ValueError, KeyError) as exc:
        raise FetchError(f"malformed dataset description for DID {did}") from exc
    file_url = desc.get("url")
    if not file_url:
        raise FetchError(f"dataset description for DID {did} names no data file")
    arff_bytes = send(file_url)

    attributes, rows = parse_arff(arff_bytes.decode("utf-8", errors="replace"))
    target_name = desc.get("default_target_attribute") or None
    table = build_table(attributes, rows, target_name)
    resolved_target = table.schema.label_name

    base.mkdir(parents=True, exist_ok=True)
    desc_path.write_bytes(desc_bytes)
    arff_path.write_bytes(arff_bytes)
    canonical.write_text(
        serialize_table_payload(
            did, desc.get("name", f"did_{did}"), resolved_target, attributes, rows
        )
    )
    checks.write_text(
        json.dumps(
            {
                "description.json": _sha256(desc_bytes),
                "data.arff": _sha256(arff_bytes),
            },
            indent=0,
        )
    )
    return table, table.schema
