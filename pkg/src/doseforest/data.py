"""Columnar dataset, CSV ingestion, honest partitioning, and dose grids."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ConfigError,
    CsvParseError,
    EmptyDatasetError,
    SchemaError,
)


@dataclass(frozen=True)
class Sample:
    """One observation: covariates x, dose t, outcome y."""

    x: np.ndarray
    t: float
    y: float


@dataclass(frozen=True)
class CsvSchema:
    """Column mapping for ingestion.

    covariates=None means "all columns other than outcome and treatment",
    in file order.
    """

    outcome: str
    treatment: str
    covariates: tuple[str, ...] | None = None


@dataclass(frozen=True)
class Dataset:
    """Immutable columnar store of (X, T, Y).

    Arrays are read-only; a Dataset is safe to share across threads.
    """

    x: np.ndarray  # (n, p) float64
    t: np.ndarray  # (n,) float64
    y: np.ndarray  # (n,) float64
    covariate_names: tuple[str, ...]
    outcome_name: str = "y"
    treatment_name: str = "t"
    t_min: float = field(init=False, default=0.0)
    t_max: float = field(init=False, default=0.0)

    def __post_init__(self):
        x = np.ascontiguousarray(np.asarray(self.x, dtype=np.float64))
        t = np.ascontiguousarray(np.asarray(self.t, dtype=np.float64))
        y = np.ascontiguousarray(np.asarray(self.y, dtype=np.float64))
        if x.ndim != 2:
            raise ConfigError("covariate block must be a 2-d array")
        if t.shape != (x.shape[0],) or y.shape != (x.shape[0],):
            raise ConfigError("x, t, y row counts differ")
        if x.shape[0] == 0:
            raise EmptyDatasetError("dataset has no rows")
        if len(self.covariate_names) != x.shape[1]:
            raise ConfigError("covariate_names length does not match x")
        for name, arr in (("x", x), ("t", t), ("y", y)):
            if not np.all(np.isfinite(arr)):
                raise CsvParseError(f"non-finite value in column block '{name}'")
        for arr in (x, t, y):
            arr.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "t_min", float(t.min()))
        object.__setattr__(self, "t_max", float(t.max()))

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def p(self) -> int:
        return self.x.shape[1]

    def sample(self, i: int) -> Sample:
        return Sample(x=self.x[i], t=float(self.t[i]), y=float(self.y[i]))

    def subset(self, indices: np.ndarray) -> "Dataset":
        """Copy of the selected rows; the view cannot address the rest."""
        idx = np.asarray(indices, dtype=np.intp)
        return Dataset(
            x=self.x[idx].copy(),
            t=self.t[idx].copy(),
            y=self.y[idx].copy(),
            covariate_names=self.covariate_names,
            outcome_name=self.outcome_name,
            treatment_name=self.treatment_name,
        )


@dataclass(frozen=True)
class HonestSplit:
    """Disjoint exhaustive partition into a structure half and an estimation half."""

    omega1: np.ndarray
    omega2: np.ndarray
    fraction: float


@dataclass(frozen=True)
class TreatmentGrid:
    """Equally spaced dose grid spanning the observed treatment range."""

    points: np.ndarray
    baseline_index: int

    def __post_init__(self):
        pts = np.ascontiguousarray(np.asarray(self.points, dtype=np.float64))
        if pts.ndim != 1 or pts.size < 2:
            raise ConfigError("grid needs at least 2 points")
        if not np.all(np.diff(pts) > 0):
            raise ConfigError("grid points must be strictly increasing")
        if not 0 <= self.baseline_index < pts.size:
            raise ConfigError("baseline_index out of range")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def size(self) -> int:
        return int(self.points.size)

    @property
    def baseline(self) -> float:
        return float(self.points[self.baseline_index])

    def trapezoid_weights(self) -> np.ndarray:
        """Quadrature weights for integrating a curve sampled on this grid."""
        w = np.empty(self.points.size)
        d = np.diff(self.points)
        w[0] = d[0] / 2.0
        w[-1] = d[-1] / 2.0
        w[1:-1] = (d[:-1] + d[1:]) / 2.0
        return w

    def same_as(self, other: "TreatmentGrid") -> bool:
        return (
            self.baseline_index == other.baseline_index
            and self.points.size == other.points.size
            and bool(np.array_equal(self.points, other.points))
        )


def _parse_cell(raw: str, row: int, column: str) -> float:
    try:
        value = float(raw)
    except ValueError:
        raise CsvParseError(
            f"row {row}, column '{column}': cannot parse {raw!r} as a number"
        ) from None
    if not math.isfinite(value):
        raise CsvParseError(f"row {row}, column '{column}': non-finite value {raw!r}")
    return value


def load_csv(path: str, schema: CsvSchema) -> Dataset:
    """Read a headered CSV into a Dataset.

    Rows keep file order. Data rows are numbered from 1 in error messages.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyDatasetError(f"{path}: file is empty") from None
        header = [h.strip() for h in header]
        col_index = {name: i for i, name in enumerate(header)}
        for required in (schema.outcome, schema.treatment):
            if required not in col_index:
                raise SchemaError(f"{path}: missing column '{required}'")
        if schema.covariates is None:
            cov_names = tuple(
                h for h in header if h not in (schema.outcome, schema.treatment)
            )
        else:
            cov_names = tuple(schema.covariates)
            for name in cov_names:
                if name not in col_index:
                    raise SchemaError(f"{path}: missing covariate column '{name}'")
        if not cov_names:
            raise SchemaError(f"{path}: no covariate columns")

        y_i = col_index[schema.outcome]
        t_i = col_index[schema.treatment]
        cov_i = [col_index[c] for c in cov_names]

        xs, ts, ys = [], [], []
        for row_num, row in enumerate(reader, start=1):
            if not row:
                continue
            if len(row) != len(header):
                raise CsvParseError(
                    f"{path}: row {row_num} has {len(row)} cells, expected {len(header)}"
                )
            ys.append(_parse_cell(row[y_i], row_num, schema.outcome))
            ts.append(_parse_cell(row[t_i], row_num, schema.treatment))
            xs.append(
                [_parse_cell(row[j], row_num, header[j]) for j in cov_i]
            )
    if not ys:
        raise EmptyDatasetError(f"{path}: no data rows")
    return Dataset(
        x=np.array(xs, dtype=np.float64),
        t=np.array(ts, dtype=np.float64),
        y=np.array(ys, dtype=np.float64),
        covariate_names=cov_names,
        outcome_name=schema.outcome,
        treatment_name=schema.treatment,
    )


def save_csv(d: Dataset, path: str) -> None:
    """Write a Dataset back to CSV; floats use repr so load_csv round-trips bit-identically."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([d.outcome_name, d.treatment_name, *d.covariate_names])
        for i in range(d.n):
            writer.writerow(
                [repr(float(d.y[i])), repr(float(d.t[i]))]
                + [repr(float(v)) for v in d.x[i]]
            )


def honest_split(d: Dataset, fraction: float, seed: int) -> HonestSplit:
    """Random (fraction, 1 - fraction) partition of row indices, fixed by seed."""
    if not 0.0 < fraction < 1.0:
        raise ConfigError(f"honesty fraction must be in (0, 1), got {fraction}")
    if d.n < 2:
        raise ConfigError("need at least 2 rows to split honestly")
    k = int(round(d.n * fraction))
    k = min(max(k, 1), d.n - 1)
    perm = np.random.default_rng(seed).permutation(d.n)
    omega1 = np.sort(perm[:k])
    omega2 = np.sort(perm[k:])
    return HonestSplit(omega1=omega1, omega2=omega2, fraction=fraction)


def treatment_grid(d: Dataset, g: int, baseline: float | None = None) -> TreatmentGrid:
    """g equally spaced doses on [t_min, t_max]; baseline snaps to the nearest point."""
    if g < 2:
        raise ConfigError(f"grid size must be >= 2, got {g}")
    if baseline is None:
        baseline = d.t_min
    if not d.t_min <= baseline <= d.t_max:
        raise ConfigError(
            f"baseline {baseline} outside observed range [{d.t_min}, {d.t_max}]"
        )
    points = np.linspace(d.t_min, d.t_max, g)
    baseline_index = int(np.argmin(np.abs(points - baseline)))
    return TreatmentGrid(points=points, baseline_index=baseline_index)
