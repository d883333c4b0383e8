"""Utilities for reading result files."""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Dict, Iterator, List, Optional


def iter_jsonl_records(path: Path, *, limit: Optional[int] = None) -> Iterator[Dict[str, object]]:
    """Yield JSON objects from a JSONL file, skipping blank or malformed lines."""

    path = Path(path)
    if not path.exists():
        return
    count = 0
    with path.open("r", encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if not line:
                continue
            try:
                payload = json.loads(line)
            except json.JSONDecodeError:
                continue
            if not isinstance(payload, dict):
                continue
            yield payload
            count += 1
            if limit is not None and count >= limit:
                return


def read_csv_rows(path: Path) -> List[Dict[str, str]]:
    with Path(path).open("r", encoding="utf-8", newline="") as handle:
        return list(csv.DictReader(handle))
