"""Core contingency-table data model.

Conventions used throughout the package:

* rows are husband (male partner) education categories, columns are wife
  (female partner) categories, both ordered from lowest to highest;
* counts are stored as nonnegative floats because counterfactual tables are
  generally non-integer, while ingestion validates integrality at load time;
* all values are immutable after construction, so tables are safe to share
  across threads and to map over in parallel.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DegenerateInputError,
    EnumerationCapError,
    PartitionError,
    ShapeError,
    TableError,
)

_REL_TOL = 1e-9


def _default_labels(prefix: str, k: int) -> tuple[str, ...]:
    return tuple(f"{prefix}{i + 1}" for i in range(k))


def _frozen_array(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ContingencyTable:
    """Joint distribution of couples over ordered education categories.

    Parameters
    ----------
    counts : array-like, shape (n, m)
        Nonnegative couple counts; ``counts[i, j]`` is the number of couples
        with a husband in row category ``i`` and a wife in column category
        ``j``.
    row_labels, col_labels : sequence of str, optional
        Ordered category names (lowest first). Generated when omitted.
    """

    counts: np.ndarray
    row_labels: tuple[str, ...] = ()
    col_labels: tuple[str, ...] = ()

    def __post_init__(self):
        counts = _frozen_array(self.counts)
        if counts.ndim != 2:
            raise TableError(f"counts must be 2-dimensional, got ndim={counts.ndim}")
        n, m = counts.shape
        if n < 2 or m < 2:
            raise TableError(f"table must be at least 2x2, got {n}x{m}")
        if not np.all(np.isfinite(counts)):
            raise TableError("counts must be finite")
        if np.any(counts < 0):
            raise TableError("counts must be nonnegative")
        if not np.any(counts > 0):
            raise TableError("at least one count must be positive")
        rows = tuple(self.row_labels) or _default_labels("r", n)
        cols = tuple(self.col_labels) or _default_labels("c", m)
        if len(rows) != n or len(cols) != m:
            raise TableError("label lengths must match table dimensions")
        if len(set(rows)) != n or len(set(cols)) != m:
            raise TableError("category labels must be unique")
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "row_labels", rows)
        object.__setattr__(self, "col_labels", cols)

    @property
    def n_rows(self) -> int:
        return self.counts.shape[0]

    @property
    def n_cols(self) -> int:
        return self.counts.shape[1]

    @property
    def total(self) -> float:
        return float(self.counts.sum())

    def is_square(self) -> bool:
        return self.n_rows == self.n_cols

    def scaled(self, factor: float) -> "ContingencyTable":
        return ContingencyTable(self.counts * factor, self.row_labels, self.col_labels)

    def transposed(self) -> "ContingencyTable":
        return ContingencyTable(self.counts.T, self.col_labels, self.row_labels)

    def with_counts(self, counts) -> "ContingencyTable":
        return ContingencyTable(counts, self.row_labels, self.col_labels)


@dataclass(frozen=True)
class TableWithSingles:
    """A couples table plus single men / single women counts per category."""

    couples: ContingencyTable
    single_men: np.ndarray
    single_women: np.ndarray

    def __post_init__(self):
        men = _frozen_array(self.single_men)
        women = _frozen_array(self.single_women)
        if men.ndim != 1 or men.shape[0] != self.couples.n_rows:
            raise TableError("single_men must have one entry per husband category")
        if women.ndim != 1 or women.shape[0] != self.couples.n_cols:
            raise TableError("single_women must have one entry per wife category")
        if np.any(men < 0) or np.any(women < 0):
            raise TableError("singles counts must be nonnegative")
        object.__setattr__(self, "single_men", men)
        object.__setattr__(self, "single_women", women)

    def men_population(self) -> np.ndarray:
        """Total marriageable men per category: in couples plus single."""
        return self.couples.counts.sum(axis=1) + self.single_men

    def women_population(self) -> np.ndarray:
        return self.couples.counts.sum(axis=0) + self.single_women

    def scaled(self, factor: float) -> "TableWithSingles":
        return TableWithSingles(
            self.couples.scaled(factor),
            self.single_men * factor,
            self.single_women * factor,
        )

    def transposed(self) -> "TableWithSingles":
        return TableWithSingles(
            self.couples.transposed(), self.single_women, self.single_men
        )


@dataclass(frozen=True)
class Marginals:
    """Row sums, column sums and grand total of a table (the structural factor)."""

    row_sums: np.ndarray
    col_sums: np.ndarray
    total: float = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        rows = _frozen_array(self.row_sums)
        cols = _frozen_array(self.col_sums)
        if rows.ndim != 1 or cols.ndim != 1:
            raise TableError("marginal sums must be vectors")
        if np.any(rows < 0) or np.any(cols < 0):
            raise TableError("marginal sums must be nonnegative")
        total = self.total if self.total is not None else float(rows.sum())
        scale = max(abs(total), 1.0)
        if abs(rows.sum() - total) > _REL_TOL * scale:
            raise TableError("row sums do not add up to the total")
        if abs(cols.sum() - total) > _REL_TOL * scale:
            raise TableError("column sums do not add up to the total")
        object.__setattr__(self, "row_sums", rows)
        object.__setattr__(self, "col_sums", cols)
        object.__setattr__(self, "total", float(total))

    @property
    def n_rows(self) -> int:
        return self.row_sums.shape[0]

    @property
    def n_cols(self) -> int:
        return self.col_sums.shape[0]


def marginals(table: ContingencyTable) -> Marginals:
    """Row sums, column sums and grand total of ``table``."""
    return Marginals(table.counts.sum(axis=1), table.counts.sum(axis=0))


def _validate_partition(partition: Sequence[Iterable[int]], size: int, axis: str):
    blocks = [tuple(int(i) for i in block) for block in partition]
    if len(blocks) < 2:
        raise PartitionError(f"{axis} partition must keep at least two blocks")
    expected = 0
    for block in blocks:
        if not block:
            raise PartitionError(f"{axis} partition contains an empty block")
        if list(block) != list(range(block[0], block[-1] + 1)):
            raise PartitionError(f"{axis} partition block {block} is not contiguous")
        if block[0] != expected:
            raise PartitionError(
                f"{axis} partition is not an ordered cover: block {block} "
                f"starts at {block[0]}, expected {expected}"
            )
        expected = block[-1] + 1
    if expected != size:
        raise PartitionError(f"{axis} partition does not cover all {size} categories")
    return blocks


def merge_categories(
    table: ContingencyTable,
    row_partition: Sequence[Iterable[int]],
    col_partition: Sequence[Iterable[int]],
) -> ContingencyTable:
    """Merge neighboring categories into blocks, summing the grouped cells.

    Partitions are sequences of blocks of 0-based indices. Blocks must be
    contiguous, ordered and cover every category, because the assorted trait
    is ordered; arbitrary regroupings are rejected. The merged table must
    remain at least 2x2.
    """
    rows = _validate_partition(row_partition, table.n_rows, "row")
    cols = _validate_partition(col_partition, table.n_cols, "column")
    out = np.zeros((len(rows), len(cols)))
    for i, rblock in enumerate(rows):
        for j, cblock in enumerate(cols):
            out[i, j] = table.counts[np.ix_(rblock, cblock)].sum()
    row_labels = tuple("+".join(table.row_labels[i] for i in block) for block in rows)
    col_labels = tuple("+".join(table.col_labels[j] for j in block) for block in cols)
    return ContingencyTable(out, row_labels, col_labels)


def merge_with_singles(
    tws: TableWithSingles,
    row_partition: Sequence[Iterable[int]],
    col_partition: Sequence[Iterable[int]],
) -> TableWithSingles:
    """Merge categories of a couples-plus-singles table, summing singles blocks."""
    merged = merge_categories(tws.couples, row_partition, col_partition)
    rows = _validate_partition(row_partition, tws.couples.n_rows, "row")
    cols = _validate_partition(col_partition, tws.couples.n_cols, "column")
    men = np.array([tws.single_men[list(b)].sum() for b in rows])
    women = np.array([tws.single_women[list(b)].sum() for b in cols])
    return TableWithSingles(merged, men, women)


def random_match(
    marg: Marginals,
    row_labels: Sequence[str] = (),
    col_labels: Sequence[str] = (),
) -> ContingencyTable:
    """Expected joint distribution of couples under random matching.

    Cell ``(i, j)`` is ``row_sums[i] * col_sums[j] / total``, so the result
    reproduces the input marginals exactly.
    """
    if marg.total <= 0:
        raise DegenerateInputError("random matching requires a positive total")
    counts = np.outer(marg.row_sums, marg.col_sums) / marg.total
    return ContingencyTable(counts, tuple(row_labels), tuple(col_labels))


def pam_match(
    marg: Marginals,
    row_labels: Sequence[str] = (),
    col_labels: Sequence[str] = (),
) -> ContingencyTable:
    """Perfectly assortative matching for the given marginals.

    Greedy descent from the top: the highest unexhausted husband category is
    matched with the highest unexhausted wife category, so someone marries
    below their own level only once nobody of equal or higher education
    remains unmatched on the other side. The descent is deterministic because
    categories are totally ordered.
    """
    if marg.total <= 0:
        raise DegenerateInputError("assortative matching requires a positive total")
    rows = marg.row_sums.astype(float).copy()
    cols = marg.col_sums.astype(float).copy()
    out = np.zeros((rows.shape[0], cols.shape[0]))
    i = rows.shape[0] - 1
    j = cols.shape[0] - 1
    while i >= 0 and j >= 0:
        take = min(rows[i], cols[j])
        out[i, j] = take
        rows[i] -= take
        cols[j] -= take
        # subtracting the min leaves an exact zero on at least one side;
        # advance past every exhausted category
        if rows[i] == 0:
            i -= 1
        if cols[j] == 0:
            j -= 1
    return ContingencyTable(out, tuple(row_labels), tuple(col_labels))


def homogamy_share(table: ContingencyTable) -> float:
    """Fraction of couples on the diagonal (same category for both partners)."""
    if not table.is_square():
        raise ShapeError(
            f"homogamy share needs a square table, got {table.n_rows}x{table.n_cols}"
        )
    return float(np.trace(table.counts) / table.total)


def _integer_vector(values: np.ndarray, what: str) -> list[int]:
    rounded = np.rint(values)
    if np.any(np.abs(values - rounded) > 1e-9):
        raise DegenerateInputError(f"{what} must be integers for enumeration")
    return [int(v) for v in rounded]


def enumerate_tables(
    marg: Marginals,
    cap: int = 40,
    row_labels: Sequence[str] = (),
    col_labels: Sequence[str] = (),
) -> list[ContingencyTable]:
    """All nonnegative integer tables with the given marginals.

    Exhaustively lists the lattice points of the transportation polytope,
    recursing row by row over bounded compositions. Intended as a brute-force
    oracle for criteria checks on tiny instances; totals above ``cap``
    (default 40) are refused because the polytope size explodes.
    """
    rows = _integer_vector(marg.row_sums, "row sums")
    cols = _integer_vector(marg.col_sums, "column sums")
    total = sum(rows)
    if total != sum(cols):
        raise DegenerateInputError("row and column sums disagree")
    if total > cap:
        raise EnumerationCapError(
            f"total {total} exceeds the enumeration cap {cap}"
        )

    m = len(cols)
    results: list[ContingencyTable] = []
    current = np.zeros((len(rows), m))

    def compositions(amount: int, bounds: list[int], j: int, row_out: list[int]):
        if j == m - 1:
            if amount <= bounds[j]:
                row_out[j] = amount
                yield row_out
            return
        upper = min(amount, bounds[j])
        for v in range(upper + 1):
            row_out[j] = v
            yield from compositions(amount - v, bounds, j + 1, row_out)

    def recurse(i: int, remaining: list[int]):
        if i == len(rows):
            results.append(
                ContingencyTable(current.copy(), tuple(row_labels), tuple(col_labels))
            )
            return
        for row in compositions(rows[i], remaining, 0, [0] * m):
            current[i, :] = row
            reduced = [remaining[j] - row[j] for j in range(m)]
            recurse(i + 1, reduced)

    recurse(0, cols)
    return results
