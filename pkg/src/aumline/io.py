"""CSV readers and writers for features, weight vectors and step lists."""
from __future__ import annotations

import csv
import math

import numpy as np

from .error_model import ParseError


def _float(text, row, column):
    try:
        x = float(text)
    except (TypeError, ValueError):
        raise ParseError(f"row {row}: cannot parse {column}={text!r}") from None
    if not math.isfinite(x):
        raise ParseError(f"row {row}: non-finite {column}={text!r}")
    return x


def read_features(path, ids=None):
    """Read ``example_id,<feature columns...>``; returns ``(X, ids)``.

    With ``ids`` given, rows are reordered to that order and every id
    must be present.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0] != "example_id" or len(header) < 2:
            raise ParseError(f"{path}: header must be example_id,<features...>")
        rows, seen = [], []
        for k, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise ParseError(f"{path}: row {k} has {len(row)} fields, expected {len(header)}")
            seen.append(row[0].strip())
            rows.append([_float(x, k, header[j + 1]) for j, x in enumerate(row[1:])])
    if not rows:
        raise ParseError(f"{path}: no rows")
    if len(set(seen)) != len(seen):
        raise ParseError(f"{path}: duplicate example_id")
    X = np.array(rows)
    if ids is None:
        return X, tuple(seen)
    index = {key: k for k, key in enumerate(seen)}
    missing = [key for key in ids if key not in index]
    if missing:
        raise ParseError(f"{path}: no features for example_id {missing[0]!r}")
    if len(ids) != len(seen):
        raise ParseError(f"{path}: {len(seen)} feature rows but {len(ids)} labeled examples")
    return X[[index[key] for key in ids]], tuple(ids)


def write_features(X, ids, fh) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["example_id"] + [f"x{j + 1}" for j in range(X.shape[1])])
    for key, row in zip(ids, X):
        writer.writerow([key] + [repr(float(x)) for x in row])


def write_labels(y, ids, fh) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["example_id", "label"])
    for key, label in zip(ids, y):
        writer.writerow([key, int(label)])


def read_vector(path) -> np.ndarray:
    """Read a single-column ``value`` CSV."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["value"]:
            raise ParseError(f"{path}: header must be 'value'")
        return np.array([_float(r["value"], k, "value") for k, r in enumerate(reader, start=2)])


def write_vector(v, fh) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["value"])
    for x in v:
        writer.writerow([repr(float(x))])


def parse_steps(text: str) -> list[float]:
    """Parse a comma-separated list of non-negative step sizes."""
    steps = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        try:
            s = float(part)
        except ValueError:
            raise ParseError(f"cannot parse step {part!r}") from None
        if not (math.isfinite(s) and s >= 0):
            raise ParseError(f"step sizes must be finite and >= 0, got {part!r}")
        steps.append(s)
    return steps
