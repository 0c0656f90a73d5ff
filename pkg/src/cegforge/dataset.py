"""Tabular input handling: CSV loading, column selection, row filtering.

A :class:`Dataset` is an immutable table of text values. Every column is
categorical; the distinct values of a column (its levels) are ordered
lexicographically. One column may be designated as the area column (for
map outputs) and one as the time column (for time-range filtering).
"""

from __future__ import annotations

import csv
import hashlib
import io
from dataclasses import dataclass, field, replace
from datetime import datetime

from .errors import ConfigurationError, ParseError, UnknownNameError, ValidationError

__all__ = [
    "Dataset",
    "TimeSpec",
    "load_csv",
    "select_columns",
    "filter_rows",
    "designate",
]

GRANULARITIES = ("date", "month-year", "year")


@dataclass(frozen=True)
class TimeSpec:
    """Designation of a time column.

    Args:
        name: column name.
        granularity: one of ``date``, ``month-year``, ``year``.
        format: ``%``-style pattern used to parse values, e.g. ``%Y-%m-%d``.
    """

    name: str
    granularity: str
    format: str

    def __post_init__(self) -> None:
        if self.granularity not in GRANULARITIES:
            raise ConfigurationError(
                f"unknown time granularity {self.granularity!r}; "
                f"expected one of {', '.join(GRANULARITIES)}"
            )

    def sort_key(self, value: str) -> tuple[int, ...]:
        """Parse one cell into a comparable key at this granularity."""
        try:
            parsed = datetime.strptime(value, self.format)
        except ValueError as exc:
            raise ParseError(
                f"time value {value!r} does not match format {self.format!r}"
            ) from exc
        if self.granularity == "year":
            return (parsed.year,)
        if self.granularity == "month-year":
            return (parsed.year, parsed.month)
        return (parsed.year, parsed.month, parsed.day)


@dataclass(frozen=True)
class Dataset:
    """An immutable table of categorical text values."""

    column_names: tuple[str, ...]
    rows: tuple[tuple[str, ...], ...]
    area_column: str | None = None
    time_column: TimeSpec | None = None

    @property
    def n_rows(self) -> int:
        return len(self.rows)

    @property
    def n_columns(self) -> int:
        return len(self.column_names)

    def column_index(self, name: str) -> int:
        try:
            return self.column_names.index(name)
        except ValueError:
            raise UnknownNameError(
                f"unknown column {name!r}; have {', '.join(self.column_names)}"
            ) from None

    def column_values(self, name: str) -> tuple[str, ...]:
        idx = self.column_index(name)
        return tuple(row[idx] for row in self.rows)

    def levels(self, name: str) -> tuple[str, ...]:
        """Distinct values of a column in lexicographic order."""
        return tuple(sorted(set(self.column_values(name))))

    def to_csv_text(self) -> str:
        """Canonical CSV echo of the table (used for fingerprinting)."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.column_names)
        writer.writerows(self.rows)
        return buf.getvalue()

    def fingerprint(self) -> str:
        """Stable hex digest of the table contents."""
        return hashlib.sha256(self.to_csv_text().encode("utf-8")).hexdigest()

    def to_payload(self) -> dict:
        payload: dict = {
            "column_names": list(self.column_names),
            "rows": [list(r) for r in self.rows],
            "area_column": self.area_column,
            "time_column": None,
        }
        if self.time_column is not None:
            payload["time_column"] = {
                "name": self.time_column.name,
                "granularity": self.time_column.granularity,
                "format": self.time_column.format,
            }
        return payload

    @classmethod
    def from_payload(cls, payload: dict) -> "Dataset":
        time_col = payload.get("time_column")
        return cls(
            column_names=tuple(payload["column_names"]),
            rows=tuple(tuple(r) for r in payload["rows"]),
            area_column=payload.get("area_column"),
            time_column=TimeSpec(**time_col) if time_col else None,
        )


def _clean_cell(raw: str, row_index: int, column: int) -> str:
    value = raw.strip()
    if "\n" in value or "\r" in value:
        raise ParseError(
            f"row {row_index}: value contains a line break; "
            "this usually means an unbalanced quote"
        )
    if not value:
        raise ParseError(f"row {row_index}: empty value in column {column + 1}")
    return value


def load_csv(
    path: str | None = None,
    *,
    text: str | None = None,
    header: bool = True,
    separator: str = ",",
    quote: str = '"',
    exclude_first_column: bool = False,
) -> Dataset:
    """Load a delimited text file into a :class:`Dataset`.

    Either ``path`` or ``text`` must be given. Cell values are trimmed of
    surrounding whitespace; empty cells are rejected. Without a header row,
    columns are named ``V1..Vn``.

    Raises:
        ParseError: empty input, ragged rows (reported with their 1-based
            data row index), unbalanced quoting, or empty cells.
    """
    if (path is None) == (text is None):
        raise ConfigurationError("load_csv needs exactly one of path or text")
    if path is not None:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            raw = fh.read()
    else:
        raw = text or ""
    if not raw.strip():
        raise ParseError("empty input: no rows to read")

    try:
        records = list(
            csv.reader(io.StringIO(raw), delimiter=separator, quotechar=quote, strict=True)
        )
    except csv.Error as exc:
        raise ParseError(f"malformed CSV: {exc}") from exc
    records = [rec for rec in records if rec and any(cell.strip() for cell in rec)]
    if not records:
        raise ParseError("empty input: no rows to read")

    if header:
        names = [cell.strip() for cell in records[0]]
        body = records[1:]
        if any(not n for n in names):
            raise ParseError("header row contains an empty column name")
    else:
        names = [f"V{i + 1}" for i in range(len(records[0]))]
        body = records

    width = len(names)
    rows: list[tuple[str, ...]] = []
    for i, rec in enumerate(body, start=1):
        if len(rec) != width:
            raise ParseError(
                f"row {i}: expected {width} values, found {len(rec)}"
            )
        rows.append(tuple(_clean_cell(cell, i, j) for j, cell in enumerate(rec)))

    if exclude_first_column:
        if width < 2:
            raise ValidationError("cannot drop the first column of a 1-column table")
        names = names[1:]
        rows = [r[1:] for r in rows]

    if len(set(names)) != len(names):
        raise ValidationError(f"duplicate column names: {names}")
    return Dataset(column_names=tuple(names), rows=tuple(rows))


def _resolve_column(dataset: Dataset, ref: str | int) -> int:
    """Resolve a column reference (name or 1-based index) to a 0-based index."""
    if isinstance(ref, bool):
        raise ValidationError(f"invalid column reference {ref!r}")
    if isinstance(ref, int):
        if not 1 <= ref <= dataset.n_columns:
            raise UnknownNameError(
                f"column index {ref} out of range 1..{dataset.n_columns}"
            )
        return ref - 1
    return dataset.column_index(ref)


def select_columns(dataset: Dataset, columns: list[str | int]) -> Dataset:
    """Project the dataset onto the given columns, in the given order.

    Columns may be referenced by name or by 1-based index. Duplicates are
    rejected. Area/time designations survive only if their column does.
    """
    if not columns:
        raise ValidationError("select_columns needs at least one column")
    indices = [_resolve_column(dataset, ref) for ref in columns]
    if len(set(indices)) != len(indices):
        raise ValidationError(f"duplicate columns in selection: {columns}")
    names = tuple(dataset.column_names[i] for i in indices)
    rows = tuple(tuple(row[i] for i in indices) for row in dataset.rows)
    area = dataset.area_column if dataset.area_column in names else None
    time_spec = (
        dataset.time_column
        if dataset.time_column is not None and dataset.time_column.name in names
        else None
    )
    return Dataset(column_names=names, rows=rows, area_column=area, time_column=time_spec)


def designate(
    dataset: Dataset,
    *,
    area_column: str | None = None,
    time_column: TimeSpec | None = None,
) -> Dataset:
    """Return a copy with the area and/or time column designated.

    Passing None leaves the corresponding designation unchanged.
    """
    updated = dataset
    if area_column is not None:
        dataset.column_index(area_column)  # existence check
        updated = replace(updated, area_column=area_column)
    if time_column is not None:
        dataset.column_index(time_column.name)
        updated = replace(updated, time_column=time_column)
    return updated


def filter_rows(
    dataset: Dataset,
    *,
    area_subset: set[str] | frozenset[str] | None = None,
    time_range: tuple[str, str] | None = None,
) -> Dataset:
    """Keep rows matching an area subset and/or an inclusive time range.

    An empty or None ``area_subset`` applies no area filter. ``time_range``
    bounds are inclusive and compared at the declared granularity.
    """
    keep = list(range(dataset.n_rows))

    if area_subset:
        if dataset.area_column is None:
            raise ConfigurationError("no area column designated; cannot filter by area")
        idx = dataset.column_index(dataset.area_column)
        wanted = set(area_subset)
        keep = [i for i in keep if dataset.rows[i][idx] in wanted]

    if time_range is not None:
        spec = dataset.time_column
        if spec is None:
            raise ConfigurationError("no time column designated; cannot filter by time")
        start, end = (spec.sort_key(bound.strip()) for bound in time_range)
        if start > end:
            raise ValidationError(
                f"time range start {time_range[0]!r} is after end {time_range[1]!r}"
            )
        idx = dataset.column_index(spec.name)
        keep = [i for i in keep if start <= spec.sort_key(dataset.rows[i][idx]) <= end]

    return replace(dataset, rows=tuple(dataset.rows[i] for i in keep))
