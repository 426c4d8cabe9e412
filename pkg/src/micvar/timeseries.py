"""Time-series container, invertible transforms and CSV ingestion."""

from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import NonFinite, NonPositiveEntry, ParseError, RaggedRow, TooShort, ZeroVariance

__all__ = [
    "TimeSeries",
    "TransformStep",
    "TransformLog",
    "demean",
    "log_transform",
    "first_difference",
    "standardize_window",
    "sample_sd",
    "read_csv",
    "write_csv",
]


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class TimeSeries:
    """A k-variate series of length n stored as an ``(n, k)`` array.

    Rows are time points, columns are variables. The array is copied and made
    read-only on construction.
    """

    values: np.ndarray
    names: tuple[str, ...] = ()

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if v.ndim != 2:
            raise ValueError("values must be a 2D array of shape (n, k)")
        if v.shape[0] < 1 or v.shape[1] < 1:
            raise ValueError("a series needs n >= 1 and k >= 1")
        if not np.all(np.isfinite(v)):
            raise ValueError("series contains non-finite entries")
        names = tuple(self.names) if self.names else tuple(f"x{j + 1}" for j in range(v.shape[1]))
        if len(names) != v.shape[1]:
            raise ValueError(f"got {len(names)} names for {v.shape[1]} columns")
        if len(set(names)) != len(names):
            raise ValueError("column names must be unique")
        object.__setattr__(self, "values", _frozen(v))
        object.__setattr__(self, "names", names)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def k(self) -> int:
        return self.values.shape[1]

    def with_values(self, values: np.ndarray) -> "TimeSeries":
        return TimeSeries(values, self.names)

    def rows(self, start: int, stop: int) -> "TimeSeries":
        return TimeSeries(self.values[start:stop], self.names)

    def __eq__(self, other):
        if not isinstance(other, TimeSeries):
            return NotImplemented
        return self.names == other.names and np.array_equal(self.values, other.values)

    __hash__ = None


@dataclass(frozen=True)
class TransformStep:
    kind: str  # "demean" | "log" | "diff" | "standardize"
    params: dict = field(default_factory=dict)

    def invert(self, values: np.ndarray) -> np.ndarray:
        if self.kind == "demean":
            return values + self.params["mean"]
        if self.kind == "log":
            return np.exp(values)
        if self.kind == "diff":
            first = np.asarray(self.params["first_row"], dtype=float)
            return np.vstack([first, first + np.cumsum(values, axis=0)])
        if self.kind == "standardize":
            return values * self.params["sd"] + self.params["mean"]
        raise ValueError(f"unknown transform {self.kind!r}")


@dataclass(frozen=True)
class TransformLog:
    """Ordered record of applied transforms; ``invert`` undoes them all."""

    steps: tuple[TransformStep, ...] = ()

    def then(self, other: "TransformLog | TransformStep") -> "TransformLog":
        extra = (other,) if isinstance(other, TransformStep) else other.steps
        return TransformLog(self.steps + extra)

    def invert(self, series: TimeSeries) -> TimeSeries:
        v = series.values
        for step in reversed(self.steps):
            v = step.invert(v)
        return series.with_values(v)

    def kinds(self) -> list[str]:
        return [s.kind for s in self.steps]


def sample_sd(x: np.ndarray, axis: int = 0) -> np.ndarray:
    """Standard deviation with the 1/(n-1) divisor used throughout the package."""
    return np.std(x, axis=axis, ddof=1)


def demean(series: TimeSeries) -> tuple[TimeSeries, TransformLog]:
    mean = series.values.mean(axis=0)
    out = series.with_values(series.values - mean)
    return out, TransformLog((TransformStep("demean", {"mean": _frozen(mean)}),))


def log_transform(series: TimeSeries) -> tuple[TimeSeries, TransformLog]:
    bad = np.argwhere(series.values <= 0)
    if bad.size:
        t, j = (int(i) for i in bad[0])
        raise NonPositiveEntry(t, j)
    return series.with_values(np.log(series.values)), TransformLog((TransformStep("log"),))


def first_difference(series: TimeSeries) -> tuple[TimeSeries, TransformLog]:
    if series.n < 2:
        raise TooShort(f"differencing needs n >= 2, got n={series.n}")
    out = series.with_values(np.diff(series.values, axis=0))
    step = TransformStep("diff", {"first_row": _frozen(series.values[0])})
    return out, TransformLog((step,))


def standardize_window(
    window: TimeSeries, target_row: Sequence[float] | np.ndarray | None = None
) -> tuple[TimeSeries, np.ndarray | None, TransformLog]:
    """Standardize each column of ``window`` and apply the same map to ``target_row``.

    The target is the observation being forecast; it never contributes to the
    mean or SD.
    """
    if window.n < 2:
        raise TooShort("standardizing needs at least two rows")
    mean = window.values.mean(axis=0)
    # second pass removes the rounding left by a large offset
    mean = mean + (window.values - mean).mean(axis=0)
    sd = sample_sd(window.values)
    for j, s in enumerate(sd):
        # a column equal to its mean at every row has no scale
        if s == 0.0 or not np.any(window.values[:, j] != window.values[0, j]):
            raise ZeroVariance(j)
    out = window.with_values((window.values - mean) / sd)
    target = None
    if target_row is not None:
        target = (np.asarray(target_row, dtype=float) - mean) / sd
    step = TransformStep("standardize", {"mean": _frozen(mean), "sd": _frozen(sd)})
    return out, target, TransformLog((step,))


# -- CSV ---------------------------------------------------------------------


def _parse_float(cell: str, line: int) -> float:
    try:
        return float(cell)
    except ValueError:
        raise ParseError(line, repr(cell)) from None


def _looks_numeric(row: list[str]) -> bool:
    try:
        for c in row:
            float(c)
    except ValueError:
        return False
    return True


def read_csv(path: str | os.PathLike, has_header: bool | None = None) -> TimeSeries:
    """Read a rectangular numeric CSV, one row per time point.

    ``has_header=None`` treats the first row as a header when any of its cells
    is non-numeric.
    """
    with open(path, "r", encoding="utf-8", newline="") as fh:
        text = fh.read()
    if text.startswith("﻿"):
        text = text[1:]
    rows = [(i + 1, r) for i, r in enumerate(csv.reader(io.StringIO(text))) if r and any(c.strip() for c in r)]
    if not rows:
        raise ParseError(1, "(empty file)")

    names: tuple[str, ...] = ()
    first_line, first = rows[0]
    if has_header is None:
        has_header = not _looks_numeric([c.strip() for c in first])
    if has_header:
        names = tuple(c.strip() for c in first)
        rows = rows[1:]
        if not rows:
            raise ParseError(first_line + 1, "(no data rows)")

    width = len(names) if names else len(rows[0][1])
    data = np.empty((len(rows), width))
    for i, (line, row) in enumerate(rows):
        if len(row) != width:
            raise RaggedRow(line, width, len(row))
        for j, cell in enumerate(row):
            x = _parse_float(cell.strip(), line)
            if not math.isfinite(x):
                raise NonFinite(line, j + 1)
            data[i, j] = x
    return TimeSeries(data, names)


def write_csv(series: TimeSeries, path: str | os.PathLike, header: bool = True) -> None:
    """Write with 17 significant digits so that ``read_csv`` round-trips exactly.

    Output goes to a temporary file that is renamed into place.
    """
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if header:
            w.writerow(series.names)
        for row in series.values:
            w.writerow([format(x, ".17g") for x in row])
    os.replace(tmp, path)
