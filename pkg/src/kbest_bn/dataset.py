"""Complete discrete datasets: loading, validation, counting, concatenation.

Values are stored as dense 0-based category codes per column, assigned in
first-occurrence order so that repeated runs see identical encodings. The
original labels are kept so datasets can be merged by value rather than by
code, and round-tripped through CSV.
"""
from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass, field

import numpy as np

from .errors import DatasetError, SchemaMismatchError
from .masks import iter_bits

# Parent sets and candidate sets are 32-bit masks; one bit is headroom.
MAX_VARIABLES = 31


@dataclass(frozen=True, eq=False)
class Dataset:
    """Immutable complete categorical data matrix.

    names: unique column names.
    arities: declared category count per column, each >= 2. May exceed the
        number of codes observed in ``rows`` (e.g. sampled data).
    rows: (N, n) integer array of category codes, 0 <= code < arity.
    categories: per-column label tuple; index = code.
    """

    names: tuple[str, ...]
    arities: tuple[int, ...]
    rows: np.ndarray = field(repr=False)
    categories: tuple[tuple[str, ...], ...] = field(repr=False)

    def __post_init__(self):
        n = len(self.names)
        if n < 1:
            raise DatasetError("dataset needs at least one variable")
        if n > MAX_VARIABLES:
            raise DatasetError(f"at most {MAX_VARIABLES} variables supported, got {n}")
        if len(set(self.names)) != n:
            raise DatasetError("variable names must be unique")
        if len(self.arities) != n or len(self.categories) != n:
            raise DatasetError("names, arities and categories must align")
        for name, r, cats in zip(self.names, self.arities, self.categories):
            if r < 2:
                raise DatasetError(f"column {name!r} has arity {r}; constant columns are rejected")
            if len(cats) != r:
                raise DatasetError(f"column {name!r}: {len(cats)} labels for arity {r}")
            if len(set(cats)) != r:
                raise DatasetError(f"column {name!r} has duplicate category labels")
        rows = self.rows
        if rows.ndim != 2 or rows.shape[1] != n:
            raise DatasetError(f"rows must be an (N, {n}) array")
        if not np.issubdtype(rows.dtype, np.integer):
            raise DatasetError("rows must hold integer category codes")
        if rows.size:
            if rows.min() < 0:
                raise DatasetError("negative category code found; data may be incomplete")
            over = rows.max(axis=0) >= np.asarray(self.arities)
            if over.any():
                bad = self.names[int(np.argmax(over))]
                raise DatasetError(f"column {bad!r} has a code outside its declared arity")
        rows.flags.writeable = False

    @property
    def n(self) -> int:
        return len(self.names)

    @property
    def N(self) -> int:
        return int(self.rows.shape[0])

    def column(self, i: int) -> np.ndarray:
        return self.rows[:, i]

    def __eq__(self, other) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.names == other.names
            and self.arities == other.arities
            and self.categories == other.categories
            and self.rows.shape == other.rows.shape
            and bool(np.array_equal(self.rows, other.rows))
        )

    def content_hash(self) -> str:
        """Stable hex digest of schema plus data, for score-cache validation."""
        h = hashlib.sha256()
        for name, r, cats in zip(self.names, self.arities, self.categories):
            h.update(name.encode())
            h.update(str(r).encode())
            for c in cats:
                h.update(b"\0" + c.encode())
            h.update(b"\1")
        h.update(str(self.rows.shape).encode())
        h.update(np.ascontiguousarray(self.rows, dtype=np.int32).tobytes())
        return h.hexdigest()

    def to_csv(self, path, delimiter: str = ",", header: bool = True) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, delimiter=delimiter)
            if header:
                writer.writerow(self.names)
            for row in self.rows:
                writer.writerow([self.categories[i][code] for i, code in enumerate(row)])


@dataclass(frozen=True)
class ContingencyTable:
    """Sparse sufficient statistics for one (child, parent set) pair.

    Only parent configurations that occur in the data are stored; keys are
    tuples of parent codes in ascending parent-index order, iterated in
    lexicographic order.
    """

    child: int
    parent_mask: int
    q: int
    cells: dict[tuple[tuple[int, ...], int], int]
    margins: dict[tuple[int, ...], int]


def from_records(names, records) -> Dataset:
    """Build a dataset from label rows, encoding first-occurrence per column."""
    names = tuple(names)
    n = len(names)
    records = list(records)
    if not records:
        raise DatasetError("no data rows")
    maps: list[dict[str, int]] = [{} for _ in range(n)]
    codes = np.empty((len(records), n), dtype=np.int32)
    for r, rec in enumerate(records):
        if len(rec) != n:
            raise DatasetError(f"row {r + 1} has {len(rec)} fields, expected {n}")
        for i, value in enumerate(rec):
            m = maps[i]
            code = m.get(value)
            if code is None:
                code = len(m)
                m[value] = code
            codes[r, i] = code
    for i, m in enumerate(maps):
        if len(m) < 2:
            raise DatasetError(f"column {names[i]!r} is constant; arity must be >= 2")
    categories = tuple(tuple(m) for m in maps)
    arities = tuple(len(m) for m in maps)
    return Dataset(names=names, arities=arities, rows=codes, categories=categories)


def from_codes(names, arities, rows, categories=None) -> Dataset:
    """Build a dataset from pre-encoded codes with declared arities."""
    arities = tuple(int(r) for r in arities)
    if categories is None:
        categories = tuple(tuple(str(v) for v in range(r)) for r in arities)
    rows = np.array(rows, dtype=np.int32).reshape(-1, len(tuple(names)))
    return Dataset(names=tuple(names), arities=arities, rows=rows, categories=tuple(categories))


def load_csv(path, has_header: bool = False, delimiter: str = ",") -> Dataset:
    """Load a complete categorical CSV; values are opaque strings.

    Raises DatasetError on ragged rows (with the row number), constant
    columns, or an empty file.
    """
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        try:
            first = next(reader)
        except StopIteration:
            raise DatasetError(f"{path}: empty file") from None
        first = [c.strip() for c in first]
        if has_header:
            names = first
            records = []
        else:
            names = [f"v{i}" for i in range(len(first))]
            records = [first]
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            row = [c.strip() for c in row]
            if len(row) != len(names):
                raise DatasetError(
                    f"{path}: row {lineno} has {len(row)} fields, expected {len(names)}"
                )
            records.append(row)
    if not records:
        raise DatasetError(f"{path}: no data rows")
    try:
        return from_records(names, records)
    except DatasetError as exc:
        raise DatasetError(f"{path}: {exc}") from None


def reencode(data: Dataset, categories) -> Dataset:
    """Re-express ``data`` under wider per-column category maps.

    Every existing label must appear in the new map; arities grow to the new
    map sizes. Used to put two datasets on a common domain.
    """
    categories = tuple(tuple(c) for c in categories)
    rows = np.array(data.rows, dtype=np.int32)
    for i, (old, new) in enumerate(zip(data.categories, categories)):
        lookup = {label: code for code, label in enumerate(new)}
        try:
            remap = np.asarray([lookup[label] for label in old], dtype=np.int32)
        except KeyError as exc:
            raise SchemaMismatchError(
                f"column {data.names[i]!r}: category {exc.args[0]!r} missing from target map"
            ) from None
        if data.N:
            rows[:, i] = remap[rows[:, i]]
    arities = tuple(len(c) for c in categories)
    return Dataset(names=data.names, arities=arities, rows=rows, categories=categories)


def concat(d1: Dataset, d2: Dataset) -> Dataset:
    """Pool two datasets over the same variables; d1 rows first.

    Category maps are reconciled by value: labels seen only in d2 extend the
    shared map, so codes stay consistent with d1's encoding.
    """
    if d1.names != d2.names:
        raise SchemaMismatchError(f"variable names differ: {d1.names} vs {d2.names}")
    merged: list[tuple[str, ...]] = []
    for i in range(d1.n):
        extra = [c for c in d2.categories[i] if c not in set(d1.categories[i])]
        merged.append(d1.categories[i] + tuple(extra))
    a = reencode(d1, merged)
    b = reencode(d2, merged)
    rows = np.concatenate([a.rows, b.rows], axis=0)
    return Dataset(names=d1.names, arities=a.arities, rows=rows, categories=tuple(merged))


def count_table(data: Dataset, child: int, parent_mask: int) -> ContingencyTable:
    """Sufficient statistics N_ijk / N_ij for one child and parent set."""
    if not 0 <= child < data.n:
        raise ValueError(f"child index {child} out of range")
    if parent_mask >> data.n:
        raise ValueError("parent mask references variables outside the dataset")
    if parent_mask & (1 << child):
        raise ValueError("child may not appear in its own parent set")
    parent_idx = list(iter_bits(parent_mask))
    child_col = data.column(child)
    cells: dict[tuple[tuple[int, ...], int], int] = {}
    margins: dict[tuple[int, ...], int] = {}
    if not parent_idx:
        key = ()
        counts = np.bincount(child_col, minlength=data.arities[child]) if data.N else np.zeros(0)
        if data.N:
            margins[key] = data.N
            for state, c in enumerate(counts):
                if c:
                    cells[(key, state)] = int(c)
        return ContingencyTable(child, parent_mask, len(margins), cells, margins)
    sub = data.rows[:, parent_idx]
    joint = np.column_stack([sub, child_col])
    uniq, counts = np.unique(joint, axis=0, return_counts=True)
    for row, c in zip(uniq, counts):
        key = tuple(int(x) for x in row[:-1])
        state = int(row[-1])
        cells[(key, state)] = int(c)
        margins[key] = margins.get(key, 0) + int(c)
    return ContingencyTable(child, parent_mask, len(margins), cells, margins)
