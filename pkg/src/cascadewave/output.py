"""Atomic CSV/JSON artifact writing."""
from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from pathlib import Path


def write_atomic(path: Path, text: str):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def _number(v: str):
    if v == "":
        return None
    try:
        return int(v)
    except ValueError:
        pass
    try:
        return float(v)
    except ValueError:
        return v


def csv_to_records(text: str) -> list[dict]:
    return [{k: _number(v) for k, v in row.items()}
            for row in csv.DictReader(io.StringIO(text))]


def write_table(out: Path, stem: str, csv_text: str, fmt: str = "csv") -> Path:
    """Write a CSV table, or the same rows as a JSON list of records."""
    if fmt == "json":
        path = Path(out) / f"{stem}.json"
        write_atomic(path, json.dumps(csv_to_records(csv_text), indent=1) + "\n")
    else:
        path = Path(out) / f"{stem}.csv"
        write_atomic(path, csv_text)
    return path


def write_json(out: Path, name: str, obj) -> Path:
    path = Path(out) / name
    write_atomic(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")
    return path
