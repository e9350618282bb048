"""
Utility functions for tabular output
"""

import csv
import json
import math
from typing import Any, Dict, Iterable, Sequence, TextIO


def format_value(value: Any) -> str:
    """Shortest text that parses back to the same float; other values as str"""
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if isinstance(value, float) or hasattr(value, 'dtype'):
        return repr(float(value))
    return str(value)


def json_value(value: Any) -> Any:
    """JSON-safe value; non-finite floats become null"""
    if isinstance(value, bool) or value is None or isinstance(value, str):
        return value
    if isinstance(value, (list, tuple)):
        return [json_value(v) for v in value]
    if isinstance(value, int):
        return value
    number = float(value)
    return number if math.isfinite(number) else None


class TableWriter:
    """Writes a metadata header, data rows and trailing named blocks as CSV or NDJSON

    CSV metadata and blocks are '#'-prefixed comment lines; NDJSON emits a
    'meta' record first, one 'row' record per row, and one record per block.
    """

    def __init__(self, stream: TextIO, fmt: str, columns: Sequence[str], meta: Dict[str, Any]):
        self.stream = stream
        self.fmt = fmt
        self.columns = list(columns)
        if fmt == 'csv':
            for key, value in meta.items():
                stream.write(f"# {key}: {self._text(value)}\n")
            self._csv = csv.writer(stream, lineterminator='\n')
            self._csv.writerow(self.columns)
        elif fmt == 'ndjson':
            record = {'type': 'meta', 'columns': self.columns}
            record.update({k: json_value(v) for k, v in meta.items()})
            self._emit(record)
        else:
            raise ValueError(f"unknown output format: {fmt}")

    @staticmethod
    def _text(value: Any) -> str:
        if isinstance(value, (list, tuple)):
            return ' '.join(format_value(v) for v in value)
        return format_value(value)

    def _emit(self, record: Dict[str, Any]) -> None:
        self.stream.write(json.dumps(record) + '\n')

    def row(self, values: Sequence[Any]) -> None:
        if len(values) != len(self.columns):
            raise ValueError(f"expected {len(self.columns)} values, got {len(values)}")
        if self.fmt == 'csv':
            self._csv.writerow([format_value(v) for v in values])
        else:
            record = {'type': 'row'}
            record.update({c: json_value(v) for c, v in zip(self.columns, values)})
            self._emit(record)

    def rows(self, rows: Iterable[Sequence[Any]]) -> None:
        for values in rows:
            self.row(values)

    def block(self, name: str, values: Dict[str, Any]) -> None:
        if self.fmt == 'csv':
            for key, value in values.items():
                self.stream.write(f"# {name}.{key}: {self._text(value)}\n")
        else:
            record = {'type': name}
            record.update({k: json_value(v) for k, v in values.items()})
            self._emit(record)
