"""Plain CSV files with a ``# key: value`` metadata preamble.

Floats are written with 17 significant digits so a write/read cycle is
lossless.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

__all__ = ["write_csv", "read_csv", "format_float"]


def format_float(v) -> str:
    return format(float(v), ".17g")


def write_csv(path, columns, rows, metadata=None):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        for key, value in (metadata or {}).items():
            if not isinstance(value, str):
                value = json.dumps(value, sort_keys=True)
            fh.write(f"# {key}: {value}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow(
                [format_float(v) if isinstance(v, (float, np.floating)) else v for v in row]
            )
    return path


def read_csv(path):
    """Return ``(columns, float array, metadata)``."""
    metadata = {}
    body = []
    with Path(path).open() as fh:
        for line in fh:
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition(":")
                value = value.strip()
                try:
                    metadata[key.strip()] = json.loads(value)
                except json.JSONDecodeError:
                    metadata[key.strip()] = value
            elif line.strip():
                body.append(line)
    reader = csv.reader(body)
    columns = next(reader)
    data = np.array([[float(v) for v in row] for row in reader], dtype=float)
    if data.size == 0:
        data = data.reshape(0, len(columns))
    return columns, data, metadata
