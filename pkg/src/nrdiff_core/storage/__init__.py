"""Result sinks, binary helpers and raster I/O."""

from .base import ResultSink
from .images import read_farbfeld, write_farbfeld
from .local import CsvSink, JsonlSink, write_csv
from .readers import iter_jsonl_records, read_csv_rows

__all__ = [
    "ResultSink",
    "CsvSink",
    "JsonlSink",
    "write_csv",
    "iter_jsonl_records",
    "read_csv_rows",
    "read_farbfeld",
    "write_farbfeld",
]
