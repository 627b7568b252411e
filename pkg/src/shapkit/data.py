"""Datasets: synthetic two-feature class patterns, CSV I/O, background stats."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import DataError

SYNTHETIC_FEATURES = 5
PAPER_INSTANCE_VALUE = 0.25


def paper_instance(m: int = SYNTHETIC_FEATURES) -> np.ndarray:
    """The reference instance used in the synthetic experiments: every feature 0.25."""
    return np.full(m, PAPER_INSTANCE_VALUE)


@dataclass(frozen=True)
class Dataset:
    X: np.ndarray
    names: Optional[tuple] = None
    y: Optional[np.ndarray] = None
    label_name: Optional[str] = None
    provenance: str = ""

    def __post_init__(self):
        X = np.array(self.X, dtype=float)
        if X.ndim != 2 or X.shape[0] < 1:
            raise DataError("dataset needs a non-empty 2-D feature matrix")
        names = tuple(self.names) if self.names else tuple(f"x{i + 1}" for i in range(X.shape[1]))
        if len(names) != X.shape[1]:
            raise DataError(f"{len(names)} names for {X.shape[1]} features")
        if len(set(names)) != len(names):
            raise DataError("feature names must be unique")
        X.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "names", names)
        if self.y is not None:
            y = np.array(self.y, dtype=float).reshape(-1)
            if y.shape[0] != X.shape[0]:
                raise DataError(f"{y.shape[0]} labels for {X.shape[0]} rows")
            y.setflags(write=False)
            object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def m(self) -> int:
        return self.X.shape[1]

    def shuffle_split(self, test_fraction: float, seed: int):
        """Seeded shuffle into (train, test)."""
        idx = np.random.default_rng(seed).permutation(self.n)
        cut = self.n - int(round(self.n * test_fraction))
        parts = []
        for sel in (idx[:cut], idx[cut:]):
            parts.append(
                Dataset(self.X[sel], self.names,
                        None if self.y is None else self.y[sel],
                        self.label_name, self.provenance)
            )
        return tuple(parts)


# ---------------------------------------------------------------------------
# Synthetic patterns
# ---------------------------------------------------------------------------

def _triangle(u):
    # period 2, range [-1, 1], peak 1 at even integers
    return 1.0 - 2.0 * np.abs(np.mod(u + 1.0, 2.0) - 1.0)


@dataclass(frozen=True)
class SyntheticPattern:
    """Class-1 region over the first two features.

    Defaults:

    * linear: ``slope*x1 + x2 + offset > 0`` (i.e. ``x1 + x2 > 0``)
    * stripe: ``|x2| < width``
    * saw: ``x2 > amplitude * triangle(teeth * x1)``
    * wedge: ``|x2| < opening * (x1 - apex)`` (i.e. ``|x2| < x1``), a cone opening to the right
    * checkerboard: even parity of ``cells x cells`` cells over ``[-1, 1]^2``
    """

    name: str
    params: dict = field(default_factory=dict)

    DEFAULTS = {
        "linear": {"slope": 1.0, "offset": 0.0},
        "stripe": {"width": 0.33},
        "saw": {"amplitude": 0.5, "teeth": 3.0},
        "wedge": {"apex": 0.0, "opening": 1.0},
        "checkerboard": {"cells": 3},
    }

    def __post_init__(self):
        if self.name not in self.DEFAULTS:
            raise DataError(
                f"unknown pattern {self.name!r}; choose from {sorted(self.DEFAULTS)}"
            )
        unknown = set(self.params) - set(self.DEFAULTS[self.name])
        if unknown:
            raise DataError(f"unknown parameters for {self.name}: {sorted(unknown)}")

    def param(self, key):
        return self.params.get(key, self.DEFAULTS[self.name][key])

    def label(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        x1, x2 = X[:, 0], X[:, 1]
        if self.name == "linear":
            inside = self.param("slope") * x1 + x2 + self.param("offset") > 0
        elif self.name == "stripe":
            inside = np.abs(x2) < self.param("width")
        elif self.name == "saw":
            inside = x2 > self.param("amplitude") * _triangle(self.param("teeth") * x1)
        elif self.name == "wedge":
            inside = np.abs(x2) < self.param("opening") * (x1 - self.param("apex"))
        else:
            k = int(self.param("cells"))
            i = np.clip(np.floor((x1 + 1.0) * k / 2.0), 0, k - 1)
            j = np.clip(np.floor((x2 + 1.0) * k / 2.0), 0, k - 1)
            inside = (i + j) % 2 == 0
        return inside.astype(float)


PATTERNS = tuple(SyntheticPattern.DEFAULTS)


def generate_synthetic(pattern, n: int, seed: int, m: int = SYNTHETIC_FEATURES) -> Dataset:
    """``n`` points uniform on ``[-1, 1]^m`` labelled by ``pattern`` on features 1-2."""
    if isinstance(pattern, str):
        pattern = SyntheticPattern(pattern)
    if n < 1:
        raise DataError("n must be >= 1")
    if m < 2:
        raise DataError("synthetic data needs at least 2 features")
    X = np.random.default_rng(seed).uniform(-1.0, 1.0, size=(n, m))
    return Dataset(X, tuple(f"x{i + 1}" for i in range(m)), pattern.label(X),
                   "y", f"synthetic:{pattern.name}")


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------

def load_csv(path, label_column: Optional[str] = None) -> Dataset:
    """Read a numeric CSV with a mandatory header row.

    Row numbers in error messages count data rows from 1 (the header is not
    counted).
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        rows = []
        for r, raw in enumerate(reader, start=1):
            if not raw or all(not c.strip() for c in raw):
                continue
            if len(raw) != len(header):
                raise DataError(
                    f"{path}: row {r} has {len(raw)} cells, header has {len(header)}"
                )
            vals = []
            for col, cell in zip(header, raw):
                try:
                    vals.append(float(cell))
                except ValueError:
                    raise DataError(
                        f"{path}: non-numeric cell {cell!r} at row {r}, column {col}"
                    ) from None
            rows.append(vals)
    if not rows:
        raise DataError(f"{path}: no data rows")
    table = np.array(rows, dtype=float)
    y = None
    names = header
    if label_column is not None:
        if label_column not in header:
            raise DataError(f"{path}: label column {label_column!r} not in header")
        k = header.index(label_column)
        y = table[:, k]
        table = np.delete(table, k, axis=1)
        names = header[:k] + header[k + 1:]
    return Dataset(table, tuple(names), y, label_column, f"csv:{path}")


def save_csv(data: Dataset, path) -> None:
    header = list(data.names)
    table = data.X
    if data.y is not None:
        header.append(data.label_name or "y")
        table = np.column_stack([table, data.y])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in table:
            w.writerow([format(v, ".17g") for v in row])


# ---------------------------------------------------------------------------

def background_means(data) -> np.ndarray:
    X = data.X if isinstance(data, Dataset) else np.asarray(data, dtype=float)
    if X.ndim != 2 or X.shape[0] < 1:
        raise DataError("background_means needs at least one row")
    return np.array([math.fsum(col) / X.shape[0] for col in X.T])


def generate_neighbors(x: Sequence[float], count: int, sigma: float, seed) -> np.ndarray:
    """``count`` Gaussian perturbations of ``x`` (std ``sigma`` per feature).

    ``seed`` may be an int or a ``numpy.random.Generator``.
    """
    if sigma < 0:
        raise DataError("sigma must be >= 0")
    if count < 1:
        raise DataError("count must be >= 1")
    x = np.asarray(x, dtype=float)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return x + sigma * rng.standard_normal((count, x.shape[0]))
