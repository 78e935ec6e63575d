"""Data model, CSV ingestion, and design-matrix construction.

A :class:`Dataset` holds an ``n x p`` covariate matrix, a binary treatment
vector, and optional block labels.  Columns are taken as-is: no automatic
standardization, no imputation (missing values are a hard error), and
categorical columns must be encoded explicitly (``one_hot`` at load time).
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass
from itertools import combinations

import numpy as np

MAIN_EFFECTS = "main-effects"
INTERACTIONS = "all-two-way-interactions"
DESIGN_KINDS = (MAIN_EFFECTS, INTERACTIONS)


class DataError(ValueError):
    """An input file or dataset violates a precondition."""


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class Dataset:
    """Covariate matrix plus treatment labels, immutable after validation.

    Attributes:
        covariates: (n, p) float matrix, all entries finite.
        treatment: (n,) integer vector with values in {0, 1}, both present.
        column_names: p covariate names.
        blocks: optional length-n tuple of block labels, each block >= 2 units.
    """

    covariates: np.ndarray
    treatment: np.ndarray
    column_names: tuple[str, ...]
    blocks: tuple[str, ...] | None = None

    def __post_init__(self):
        cov = np.asarray(self.covariates, dtype=float)
        if cov.ndim != 2:
            raise DataError("covariates must be a 2-D matrix")
        n, p = cov.shape
        if n < 2:
            raise DataError(f"need at least 2 rows, got {n}")
        if p < 1:
            raise DataError("need at least 1 covariate column")
        if not np.all(np.isfinite(cov)):
            bad = np.argwhere(~np.isfinite(cov))[0]
            raise DataError(
                f"non-finite covariate value at row {bad[0] + 1}, "
                f"column {self.column_names[bad[1]]!r}"
            )
        t = np.asarray(self.treatment)
        if t.shape != (n,):
            raise DataError("treatment length does not match covariate rows")
        t = t.astype(int)
        if not np.all((t == 0) | (t == 1)):
            raise DataError("treatment vector must contain only 0/1")
        if t.sum() == 0 or t.sum() == n:
            raise DataError("degenerate treatment vector: need both classes")
        names = tuple(str(c) for c in self.column_names)
        if len(names) != p:
            raise DataError("column_names length does not match covariates")
        blocks = self.blocks
        if blocks is not None:
            blocks = tuple(str(b) for b in blocks)
            if len(blocks) != n:
                raise DataError("blocks length does not match covariate rows")
            counts: dict[str, int] = {}
            for b in blocks:
                counts[b] = counts.get(b, 0) + 1
            small = [b for b, c in counts.items() if c < 2]
            if small:
                raise DataError(f"block {small[0]!r} has a single unit")
        object.__setattr__(self, "covariates", _freeze(cov))
        object.__setattr__(self, "treatment", _freeze(t))
        object.__setattr__(self, "column_names", names)
        object.__setattr__(self, "blocks", blocks)

    @property
    def n(self) -> int:
        return self.covariates.shape[0]

    @property
    def p(self) -> int:
        return self.covariates.shape[1]

    @property
    def n_treated(self) -> int:
        return int(self.treatment.sum())

    @property
    def n_control(self) -> int:
        return self.n - self.n_treated

    def treated_indices(self) -> np.ndarray:
        return np.flatnonzero(self.treatment == 1)

    def control_indices(self) -> np.ndarray:
        return np.flatnonzero(self.treatment == 0)


@dataclass(frozen=True)
class DesignMatrix:
    """Feature matrix derived from a dataset (no intercept column; the
    consuming models add their own)."""

    values: np.ndarray
    feature_names: tuple[str, ...]
    kind: str

    def __post_init__(self):
        object.__setattr__(self, "values", _freeze(np.asarray(self.values, dtype=float)))
        object.__setattr__(self, "feature_names", tuple(self.feature_names))

    @property
    def q(self) -> int:
        return self.values.shape[1]


def load_csv(path: str, treatment_column: str = "treatment",
             block_column: str | None = None,
             one_hot: tuple[str, ...] = (),
             true_tokens: tuple[str, ...] = ("1",),
             false_tokens: tuple[str, ...] = ("0",)) -> Dataset:
    """Load a dataset from a comma-separated UTF-8 file with a header row.

    All columns other than the treatment and block columns become
    covariates, in file order.  Columns named in ``one_hot`` are treated
    as categorical and expand in place into k-1 indicator columns
    (one per level, sorted, dropping the lexicographically first level).
    Any other cell must parse as a finite real; missing or non-numeric
    cells are errors, not imputed.
    """
    if not os.path.exists(path):
        raise DataError(f"no such file: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"empty file: {path}") from None
        rows = [row for row in reader if row]
    header = [h.strip() for h in header]
    if treatment_column not in header:
        raise DataError(f"treatment column {treatment_column!r} not found in header")
    if block_column is not None and block_column not in header:
        raise DataError(f"block column {block_column!r} not found in header")
    one_hot = tuple(one_hot)
    for col in one_hot:
        if col not in header:
            raise DataError(f"one-hot column {col!r} not found in header")
        if col in (treatment_column, block_column):
            raise DataError(f"cannot one-hot encode the {col!r} column")
    t_idx = header.index(treatment_column)
    b_idx = header.index(block_column) if block_column is not None else None

    treatment: list[int] = []
    blocks: list[str] = []
    columns: list[list] = [[] for _ in header]
    for r, row in enumerate(rows, start=2):  # header is file row 1
        if len(row) != len(header):
            raise DataError(f"row {r}: expected {len(header)} cells, got {len(row)}")
        for j, cell in enumerate(row):
            cell = cell.strip()
            if j == t_idx:
                if cell in true_tokens:
                    treatment.append(1)
                elif cell in false_tokens:
                    treatment.append(0)
                else:
                    raise DataError(
                        f"row {r}, column {header[j]!r}: invalid treatment "
                        f"value {cell!r} (expected one of "
                        f"{true_tokens + false_tokens})"
                    )
            elif j == b_idx:
                blocks.append(cell)
            elif header[j] in one_hot:
                if cell == "":
                    raise DataError(f"row {r}, column {header[j]!r}: missing value")
                columns[j].append(cell)
            else:
                if cell == "":
                    raise DataError(f"row {r}, column {header[j]!r}: missing value")
                try:
                    v = float(cell)
                except ValueError:
                    raise DataError(
                        f"row {r}, column {header[j]!r}: non-numeric value {cell!r}"
                    ) from None
                if not math.isfinite(v):
                    raise DataError(
                        f"row {r}, column {header[j]!r}: non-finite value {cell!r}"
                    )
                columns[j].append(v)
    if not treatment:
        raise DataError(f"no data rows in {path}")

    out_cols: list[np.ndarray] = []
    out_names: list[str] = []
    for j, name in enumerate(header):
        if j == t_idx or j == b_idx:
            continue
        if name in one_hot:
            levels = sorted(set(columns[j]))
            vals = np.asarray(columns[j])
            for level in levels[1:]:  # drop the lexicographically first level
                out_cols.append((vals == level).astype(float))
                out_names.append(f"{name}={level}")
        else:
            out_cols.append(np.asarray(columns[j], dtype=float))
            out_names.append(name)
    if not out_cols:
        raise DataError("no covariate columns after removing treatment/block")
    cov = np.column_stack(out_cols)
    return Dataset(cov, np.asarray(treatment),
                   tuple(out_names),
                   tuple(blocks) if block_column is not None else None)


def write_csv(d: Dataset, path: str, treatment_column: str = "treatment",
              block_column: str = "block") -> None:
    """Write a dataset back to CSV in the same schema ``load_csv`` reads.

    Floats are written with ``repr``, so a load/write/load cycle is
    bit-exact.
    """
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        header = list(d.column_names) + [treatment_column]
        if d.blocks is not None:
            header.append(block_column)
        w.writerow(header)
        for i in range(d.n):
            row = [repr(float(v)) for v in d.covariates[i]]
            row.append(str(int(d.treatment[i])))
            if d.blocks is not None:
                row.append(d.blocks[i])
            w.writerow(row)


def expand_design(d: Dataset, kind: str = MAIN_EFFECTS,
                  include_squares: bool = False) -> DesignMatrix:
    """Build a design matrix from the covariates.

    ``main-effects`` returns the covariate columns.
    ``all-two-way-interactions`` appends the C(p, 2) pairwise products
    x_j * x_k (j < k) in lexicographic pair order.  ``include_squares``
    additionally appends x_j ** 2 columns at the end (squares are not
    part of the two-way expansion).
    """
    if kind not in DESIGN_KINDS:
        raise ValueError(f"unknown design kind {kind!r}; expected one of {DESIGN_KINDS}")
    X = d.covariates
    cols = [X]
    names = list(d.column_names)
    if kind == INTERACTIONS:
        for j, k in combinations(range(d.p), 2):
            cols.append((X[:, j] * X[:, k])[:, None])
            names.append(f"{d.column_names[j]}*{d.column_names[k]}")
    if include_squares:
        for j in range(d.p):
            cols.append((X[:, j] ** 2)[:, None])
            names.append(f"{d.column_names[j]}^2")
    return DesignMatrix(np.hstack(cols), tuple(names), kind)


def standardize(d: Dataset) -> Dataset:
    """Z-score every covariate column over the full sample.

    Constant columns are centered but not scaled.  Offered for
    numerically fragile classifiers; never applied implicitly.
    """
    X = d.covariates
    mu = X.mean(axis=0)
    sd = X.std(axis=0)
    sd = np.where(sd == 0.0, 1.0, sd)
    return Dataset((X - mu) / sd, d.treatment, d.column_names, d.blocks)
