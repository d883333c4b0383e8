"""Local CSV/JSONL result sinks guarded by file locks."""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np
from filelock import FileLock

from .base import ResultSink


def _lock_for(path: Path) -> FileLock:
    return FileLock(str(path) + ".lock")


class JsonlSink(ResultSink):
    """Append rows to a JSONL file."""

    def __init__(self, path: Path) -> None:
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)

    def record(self, row: Mapping[str, Any]) -> None:
        with _lock_for(self.path):
            with self.path.open("a", encoding="utf-8") as handle:
                json.dump(dict(row), handle, ensure_ascii=False, sort_keys=False)
                handle.write("\n")


class CsvSink(ResultSink):
    """Append rows to a CSV file with a fixed column order; the header is written once."""

    def __init__(self, path: Path, columns: Sequence[str], *, truncate: bool = False) -> None:
        self.path = Path(path)
        self.columns = tuple(columns)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        if truncate and self.path.exists():
            self.path.unlink()

    def record(self, row: Mapping[str, Any]) -> None:
        missing = [column for column in self.columns if column not in row]
        extra = [key for key in row if key not in self.columns]
        if missing or extra:
            raise KeyError(f"row columns mismatch: missing={missing} extra={extra}")
        with _lock_for(self.path):
            new_file = not self.path.exists() or self.path.stat().st_size == 0
            with self.path.open("a", encoding="utf-8", newline="") as handle:
                writer = csv.DictWriter(handle, fieldnames=self.columns, lineterminator="\n")
                if new_file:
                    writer.writeheader()
                writer.writerow({column: _cell(row[column]) for column in self.columns})

    def record_many(self, rows: Iterable[Mapping[str, Any]]) -> None:
        for row in rows:
            self.record(row)


def write_csv(path: Path, columns: Sequence[str], rows: Iterable[Mapping[str, Any]]) -> Path:
    """Write a complete CSV (replacing any previous file)."""

    rows = list(rows)
    sink = CsvSink(path, columns, truncate=True)
    if not rows:
        with _lock_for(sink.path):
            sink.path.write_text(",".join(columns) + "\n", encoding="utf-8")
    sink.record_many(rows)
    return sink.path


def _cell(value: Any) -> Any:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(float(value))
    if isinstance(value, np.integer):
        return int(value)
    return value
