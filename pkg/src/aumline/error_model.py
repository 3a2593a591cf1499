"""Piecewise-constant per-example error functions stored as breakpoints.

Each breakpoint records a jump ``(value, delta_fp, delta_fn)`` in the
false positive / false negative rate functions of one labeled example,
as a function of that example's predicted value. False positives start
at zero for very small predictions and false negatives end at zero for
very large ones.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np

RATE_TOL = 1e-9


class ValidationError(ValueError):
    """Input data violates an error-model invariant."""


class ParseError(ValueError):
    """A row of an input file could not be parsed."""


class Breakpoint(NamedTuple):
    value: float
    delta_fp: float
    delta_fn: float
    example: int


@dataclass(frozen=True, eq=False)
class ErrorModel:
    """Breakpoints of all examples, in arrays indexed by breakpoint.

    ``example`` holds dense 0-based example indices. ``example_ids``
    optionally records the original identifiers, in dense-index order.
    Construction checks structure only; rate invariants are checked by
    :meth:`validate` so that raw counts can be built and then normalized.
    """

    value: np.ndarray
    delta_fp: np.ndarray
    delta_fn: np.ndarray
    example: np.ndarray
    n_examples: int
    example_ids: tuple = field(default=())

    def __post_init__(self):
        value = np.asarray(self.value, dtype=float).ravel()
        delta_fp = np.asarray(self.delta_fp, dtype=float).ravel()
        delta_fn = np.asarray(self.delta_fn, dtype=float).ravel()
        example = np.asarray(self.example, dtype=np.intp).ravel()
        if not (len(value) == len(delta_fp) == len(delta_fn) == len(example)):
            raise ValidationError("breakpoint arrays differ in length")
        if len(value) == 0:
            raise ValidationError("no breakpoints")
        for name, arr in (("value", value), ("delta_fp", delta_fp),
                          ("delta_fn", delta_fn)):
            if not np.all(np.isfinite(arr)):
                raise ValidationError(f"non-finite {name}")
        if np.any((delta_fp == 0) & (delta_fn == 0)):
            raise ValidationError("breakpoint with delta_fp = delta_fn = 0")
        n = int(self.n_examples)
        if example.min() < 0 or example.max() >= n:
            raise ValidationError("example index out of range")
        if len(np.unique(example)) != n:
            raise ValidationError("some example has no breakpoint")
        for arr in (value, delta_fp, delta_fn, example):
            arr.flags.writeable = False
        object.__setattr__(self, "value", value)
        object.__setattr__(self, "delta_fp", delta_fp)
        object.__setattr__(self, "delta_fn", delta_fn)
        object.__setattr__(self, "example", example)
        object.__setattr__(self, "n_examples", n)
        object.__setattr__(self, "example_ids", tuple(self.example_ids))

    def __len__(self):
        return len(self.value)

    def __iter__(self):
        for row in zip(self.value, self.delta_fp, self.delta_fn, self.example):
            yield Breakpoint(float(row[0]), float(row[1]), float(row[2]),
                             int(row[3]))

    @property
    def n_breakpoints(self) -> int:
        return len(self.value)

    @property
    def total_fp(self) -> float:
        return float(np.sum(self.delta_fp))

    @property
    def total_fn(self) -> float:
        return float(np.sum(self.delta_fn))

    @property
    def fn_start(self) -> float:
        """Global false negative rate for very small predictions."""
        return -self.total_fn

    def validate(self, tol: float = RATE_TOL) -> "ErrorModel":
        """Check rate-unit invariants, returning ``self``.

        Totals must be 1 (FP) and -1 (FN); per example, FP must stay in
        [0, 1] and FN in [0, FN(-inf)] as breakpoints are crossed in
        order of value. Breakpoints sharing a value are crossed together.
        """
        if abs(self.total_fp - 1.0) > tol:
            raise ValidationError(
                f"total_fp = {self.total_fp:.12g}, expected 1")
        if abs(self.total_fn + 1.0) > tol:
            raise ValidationError(
                f"total_fn = {self.total_fn:.12g}, expected -1")
        order = np.lexsort((self.value, self.example))
        ex = self.example[order]
        val = self.value[order]
        # last breakpoint of each run of equal (example, value)
        run_end = np.ones(len(ex), dtype=bool)
        run_end[:-1] = (ex[1:] != ex[:-1]) | (val[1:] != val[:-1])
        for deltas, lo, hi, name in ((self.delta_fp, 0.0, 1.0, "FP"),
                                     (self.delta_fn, -1.0, 0.0, "FN")):
            d = deltas[order]
            csum = np.cumsum(d)
            starts = np.flatnonzero(np.r_[True, ex[1:] != ex[:-1]])
            offset = np.repeat(csum[starts] - d[starts], np.diff(np.r_[starts, len(ex)]))
            prefix = (csum - offset)[run_end]
            if np.any(prefix < lo - tol) or np.any(prefix > hi + tol):
                bad = int(ex[run_end][np.argmax((prefix < lo - tol) | (prefix > hi + tol))])
                raise ValidationError(
                    f"{name} running sum leaves [{lo:g}, {hi:g}] for example {bad}")
        return self

    def breakpoints_of(self, i: int) -> list[Breakpoint]:
        """Breakpoints of example ``i`` sorted by value."""
        idx = np.flatnonzero(self.example == i)
        idx = idx[np.argsort(self.value[idx], kind="stable")]
        return [Breakpoint(float(self.value[b]), float(self.delta_fp[b]),
                           float(self.delta_fn[b]), i) for b in idx]


def from_breakpoints(breakpoints: Iterable[Breakpoint | Sequence],
                     n_examples: int | None = None,
                     validate: bool = True) -> ErrorModel:
    """Build an :class:`ErrorModel` from ``(value, dfp, dfn, example)`` rows."""
    rows = [tuple(b) for b in breakpoints]
    if not rows:
        raise ValidationError("no breakpoints")
    value, dfp, dfn, example = (np.array(col) for col in zip(*rows))
    if n_examples is None:
        n_examples = int(np.max(example)) + 1
    model = ErrorModel(value, dfp, dfn, example, n_examples)
    return model.validate() if validate else model


def binary_breakpoints(labels) -> ErrorModel:
    """Error model of a binary classification problem.

    A positive example contributes ``(0, 0, -1/n_pos)`` and a negative
    example ``(0, 1/n_neg, 0)``: one breakpoint per example at predicted
    value zero.

    >>> [tuple(b) for b in binary_breakpoints([1, -1])]
    [(0.0, 0.0, -1.0, 0), (0.0, 1.0, 0.0, 1)]
    """
    y = np.asarray(labels).ravel()
    if y.size == 0 or not np.all(np.isin(y, (-1, 1))):
        raise ValidationError("labels must be -1 or 1")
    pos = y == 1
    n_pos = int(pos.sum())
    n_neg = len(y) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValidationError("degenerate labels: need both classes")
    delta_fp = np.where(pos, 0.0, 1.0 / n_neg)
    delta_fn = np.where(pos, -1.0 / n_pos, 0.0)
    return ErrorModel(np.zeros(len(y)), delta_fp, delta_fn,
                      np.arange(len(y)), len(y)).validate()


def normalize(model: ErrorModel) -> ErrorModel:
    """Rescale deltas so that the FP total is 1 and the FN total is -1."""
    total_fp, total_fn = model.total_fp, model.total_fn
    if not total_fp > 0 or not total_fn < 0:
        raise ValidationError(
            "cannot normalize: need total_fp > 0 and total_fn < 0, "
            f"got {total_fp:g} and {total_fn:g}")
    return ErrorModel(model.value, model.delta_fp / total_fp,
                      model.delta_fn / -total_fn, model.example,
                      model.n_examples, model.example_ids)


def _parse_float(text, row, column):
    try:
        x = float(text)
    except (TypeError, ValueError):
        raise ParseError(f"row {row}: cannot parse {column}={text!r}") from None
    if not math.isfinite(x):
        raise ParseError(f"row {row}: non-finite {column}={text!r}")
    return x


def _read_rows(source, required):
    """Yield ``(row_number, dict)`` from a path, file object or row iterable."""
    if isinstance(source, (str, bytes)) or hasattr(source, "__fspath__"):
        with open(source, newline="", encoding="utf-8") as fh:
            yield from _read_rows(fh, required)
        return
    if hasattr(source, "read"):
        reader = csv.DictReader(source)
        missing = set(required) - set(reader.fieldnames or ())
        if missing:
            raise ParseError(f"missing column(s) {sorted(missing)} in header")
        for k, row in enumerate(reader, start=2):
            yield k, row
        return
    for k, row in enumerate(source, start=1):
        if not isinstance(row, dict):
            row = dict(zip(required, row))
        yield k, row


def load_breakpoints(source, normalize_rates: bool = False) -> ErrorModel:
    """Read ``example_id,value,delta_fp,delta_fn`` rows.

    ``source`` may be a path, an open text file with a header, or an
    iterable of dicts / tuples. Example ids are mapped to dense indices
    in order of first appearance; the mapping is kept on
    ``ErrorModel.example_ids``.
    """
    columns = ("example_id", "value", "delta_fp", "delta_fn")
    ids: dict[str, int] = {}
    value, dfp, dfn, example = [], [], [], []
    for k, row in _read_rows(source, columns):
        key = str(row["example_id"]).strip()
        if key == "":
            raise ParseError(f"row {k}: empty example_id")
        example.append(ids.setdefault(key, len(ids)))
        value.append(_parse_float(row["value"], k, "value"))
        dfp.append(_parse_float(row["delta_fp"], k, "delta_fp"))
        dfn.append(_parse_float(row["delta_fn"], k, "delta_fn"))
    if not value:
        raise ValidationError("no breakpoints")
    model = ErrorModel(value, dfp, dfn, example, len(ids), tuple(ids))
    if normalize_rates:
        model = normalize(model)
    return model.validate()


def load_labels(source) -> tuple[ErrorModel, np.ndarray]:
    """Read ``example_id,label`` rows into a binary error model.

    Returns the model (ids kept in file order) and the label vector.
    """
    ids, labels = [], []
    for k, row in _read_rows(source, ("example_id", "label")):
        text = str(row["label"]).strip()
        try:
            label = int(float(text))
        except ValueError:
            raise ParseError(f"row {k}: cannot parse label={text!r}") from None
        if label not in (-1, 1) or float(text) != label:
            raise ParseError(f"row {k}: label must be -1 or 1, got {text!r}")
        ids.append(str(row["example_id"]).strip())
        labels.append(label)
    if len(set(ids)) != len(ids):
        raise ParseError("duplicate example_id in labels")
    y = np.array(labels)
    base = binary_breakpoints(y)
    model = ErrorModel(base.value, base.delta_fp, base.delta_fn, base.example,
                       base.n_examples, tuple(ids))
    return model, y


def write_breakpoints(model: ErrorModel, fh) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["example_id", "value", "delta_fp", "delta_fn"])
    ids = model.example_ids or tuple(str(i + 1) for i in range(model.n_examples))
    for b in model:
        writer.writerow([ids[b.example], repr(b.value), repr(b.delta_fp),
                         repr(b.delta_fn)])


def subset(model: ErrorModel, examples) -> ErrorModel:
    """Error model restricted to ``examples`` (in that order), renormalized."""
    examples = np.asarray(examples, dtype=np.intp)
    remap = np.full(model.n_examples, -1, dtype=np.intp)
    remap[examples] = np.arange(len(examples))
    keep = remap[model.example] >= 0
    ids = tuple(model.example_ids[i] for i in examples) if model.example_ids else ()
    raw = ErrorModel(model.value[keep], model.delta_fp[keep], model.delta_fn[keep],
                     remap[model.example[keep]], len(examples), ids)
    return normalize(raw).validate()
