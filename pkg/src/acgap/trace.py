"""Per-iteration training records and their CSV form."""
from __future__ import annotations

import csv
import io
from pathlib import Path

import numpy as np


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return str(int(value))
    return repr(float(value))


class TrainingTrace:
    """Ordered rows with a fixed column schema.

    Missing values are written as empty CSV cells and read back as NaN.
    """

    def __init__(self, columns):
        self.columns = tuple(columns)
        self.rows: list[dict] = []
        self.final_params: dict = {}

    def append(self, **values) -> None:
        unknown = set(values) - set(self.columns)
        if unknown:
            raise KeyError(f"unknown trace columns {sorted(unknown)}")
        self.rows.append({c: values.get(c) for c in self.columns})

    def __len__(self):
        return len(self.rows)

    def column(self, name: str) -> np.ndarray:
        return np.array([np.nan if r[name] is None else float(r[name]) for r in self.rows])

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.columns)
        for row in self.rows:
            writer.writerow([_fmt(row[c]) for c in self.columns])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_csv(cls, path) -> "TrainingTrace":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            trace = cls(header)
            for line in reader:
                trace.rows.append({c: (None if v == "" else float(v)) for c, v in zip(header, line)})
        return trace
