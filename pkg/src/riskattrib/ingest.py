"""CSV ingestion, log-return computation, and calendar-period slicing.

Input files are UTF-8 comma-separated with a header row ``date,<label>,...``,
ISO-8601 dates in the first column, and C-locale decimals elsewhere. Empty
cells mark missing observations; they survive loading as NaN and are removed
by per-period complete-case filtering on sources (columns are dropped for a
period when any of their values in that period is missing — rows are never
dropped). Returns are decimal units throughout; percent is display-only.
"""

from __future__ import annotations

import csv
import datetime
import enum
from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatch,
    DuplicateDate,
    EmptyFile,
    EmptyPeriod,
    NonPositivePrice,
    ParseError,
    TooFewObservations,
)


class PanelKind(str, enum.Enum):
    PRICES = "prices"
    RETURNS = "returns"


class PeriodScheme(str, enum.Enum):
    HALF_YEARS = "halfyears"
    MONTHS = "months"
    EXPLICIT_RANGES = "explicit"


def _validate_panel(sources, dates, values) -> np.ndarray:
    array = np.asarray(values, dtype=float)
    if array.ndim != 2:
        raise DimensionMismatch(f"panel values must be 2-D, got shape {array.shape}")
    n, p = array.shape
    if len(sources) != p:
        raise DimensionMismatch(f"{len(sources)} labels for {p} value columns")
    if len(dates) != n:
        raise DimensionMismatch(f"{len(dates)} dates for {n} value rows")
    if n < 1 or p < 1:
        raise DimensionMismatch("panel must have at least one row and one column")
    for prev, cur in zip(dates, dates[1:]):
        if cur <= prev:
            raise DuplicateDate(f"dates not strictly increasing at {cur}")
    return array


@dataclass(frozen=True)
class ReturnPanel:
    """Per-period returns, one column per source, rows ordered by date."""

    sources: tuple[str, ...]
    dates: tuple[datetime.date, ...]
    values: np.ndarray

    def __post_init__(self) -> None:
        array = _validate_panel(self.sources, self.dates, self.values)
        object.__setattr__(self, "sources", tuple(self.sources))
        object.__setattr__(self, "dates", tuple(self.dates))
        object.__setattr__(self, "values", array)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]

    def select_sources(self, labels) -> "ReturnPanel":
        index = {label: j for j, label in enumerate(self.sources)}
        cols = [index[label] for label in labels]
        return ReturnPanel(tuple(labels), self.dates, self.values[:, cols])


@dataclass(frozen=True)
class PricePanel:
    """Same shape as :class:`ReturnPanel` but strictly positive prices.

    NaN marks a missing quote; any non-missing price must be positive.
    """

    sources: tuple[str, ...]
    dates: tuple[datetime.date, ...]
    values: np.ndarray

    def __post_init__(self) -> None:
        array = _validate_panel(self.sources, self.dates, self.values)
        finite = array[~np.isnan(array)]
        if np.any(finite <= 0):
            raise NonPositivePrice(f"non-positive price {finite[finite <= 0][0]!r} in panel")
        object.__setattr__(self, "sources", tuple(self.sources))
        object.__setattr__(self, "dates", tuple(self.dates))
        object.__setattr__(self, "values", array)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]


def load_csv(path, kind: PanelKind = PanelKind.RETURNS):
    """Load a price or return panel from CSV, sorting rows by date.

    Raises :class:`ParseError` with the 1-based row/column of the first
    malformed cell, :class:`DuplicateDate` on repeated dates, and
    :class:`EmptyFile` when no data rows are present.
    """
    with open(path, "r", encoding="utf-8", newline="") as handle:
        rows = list(csv.reader(handle))
    rows = [row for row in rows if row and any(cell.strip() for cell in row)]
    if not rows:
        raise EmptyFile(f"{path}: no header row")
    header = [cell.strip() for cell in rows[0]]
    if len(header) < 2 or header[0].lower() != "date":
        raise ParseError(f"{path}: header must be 'date,<label>,...', got {header!r}", row=1)
    sources = tuple(header[1:])
    if not rows[1:]:
        raise EmptyFile(f"{path}: no data rows")

    parsed: list[tuple[datetime.date, list[float]]] = []
    seen: set[datetime.date] = set()
    for r, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise ParseError(
                f"{path}: row {r} has {len(row)} cells, expected {len(header)}", row=r
            )
        try:
            date = datetime.date.fromisoformat(row[0].strip())
        except ValueError as exc:
            raise ParseError(f"{path}: bad date {row[0]!r} at row {r}", row=r, column=1) from exc
        if date in seen:
            raise DuplicateDate(f"{path}: duplicate date {date} at row {r}")
        seen.add(date)
        cells = []
        for c, cell in enumerate(row[1:], start=2):
            text = cell.strip()
            if not text:
                cells.append(float("nan"))
                continue
            try:
                cells.append(float(text))
            except ValueError as exc:
                raise ParseError(
                    f"{path}: non-numeric cell {cell!r} at row {r}, column {c}",
                    row=r,
                    column=c,
                ) from exc
        parsed.append((date, cells))

    parsed.sort(key=lambda item: item[0])
    dates = tuple(date for date, _ in parsed)
    values = np.array([cells for _, cells in parsed], dtype=float)
    if kind is PanelKind.PRICES:
        return PricePanel(sources, dates, values)
    return ReturnPanel(sources, dates, values)


def write_csv(panel, path) -> None:
    """Serialize a panel with 17-significant-digit decimals (bit-exact reload)."""
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["date", *panel.sources])
        for date, row in zip(panel.dates, panel.values):
            cells = ["" if np.isnan(x) else format(x, ".17g") for x in row]
            writer.writerow([date.isoformat(), *cells])


def log_returns(prices: PricePanel) -> ReturnPanel:
    """Per-step log returns ln(P_{t+1} / P_t); the panel shrinks by one row."""
    if prices.n < 2:
        raise TooFewObservations(f"need at least 2 price rows, got {prices.n}")
    values = prices.values
    if np.any(values[~np.isnan(values)] <= 0):
        raise NonPositivePrice("prices must be strictly positive to take log returns")
    returns = np.log(values[1:] / values[:-1])
    return ReturnPanel(prices.sources, prices.dates[1:], returns)


def _complete_case(panel: ReturnPanel, row_index: np.ndarray, label: str) -> ReturnPanel:
    """Sub-panel on the given rows, dropping sources with any missing value."""
    block = panel.values[row_index]
    keep = ~np.isnan(block).any(axis=0)
    if not keep.any():
        raise EmptyPeriod(f"period {label}: every source has missing values")
    sources = tuple(s for s, k in zip(panel.sources, keep) if k)
    dates = tuple(panel.dates[i] for i in row_index)
    return ReturnPanel(sources, dates, block[:, keep])


def period_label(scheme: PeriodScheme, date: datetime.date) -> str:
    if scheme is PeriodScheme.HALF_YEARS:
        half = 1 if date.month <= 6 else 2
        return f"{date.year}H{half}"
    return f"{date.year}-{date.month:02d}"


def slice_periods(
    panel: ReturnPanel,
    scheme: PeriodScheme,
    ranges: list[tuple[datetime.date, datetime.date]] | None = None,
) -> list[ReturnPanel]:
    """Split a panel into consecutive calendar periods.

    ``HALF_YEARS`` groups January-June and July-December; ``MONTHS`` groups
    by calendar month; ``EXPLICIT_RANGES`` takes inclusive (start, end) date
    pairs and raises :class:`EmptyPeriod` for a range with no rows. Sources
    with any missing value inside a period are dropped for that period only,
    so the usable dimension p may vary across periods.
    """
    if scheme is PeriodScheme.EXPLICIT_RANGES:
        if not ranges:
            raise EmptyPeriod("explicit slicing requires at least one (start, end) range")
        out = []
        for start, end in ranges:
            rows = np.array(
                [i for i, d in enumerate(panel.dates) if start <= d <= end], dtype=int
            )
            if rows.size == 0:
                raise EmptyPeriod(f"no observations in {start}..{end}")
            out.append(_complete_case(panel, rows, f"{start}..{end}"))
        return out

    groups: dict[tuple, list[int]] = {}
    for i, date in enumerate(panel.dates):
        if scheme is PeriodScheme.HALF_YEARS:
            key = (date.year, 1 if date.month <= 6 else 2)
        elif scheme is PeriodScheme.MONTHS:
            key = (date.year, date.month)
        else:
            raise ValueError(f"unknown period scheme: {scheme!r}")
        groups.setdefault(key, []).append(i)

    out = []
    for key in sorted(groups):
        rows = np.array(groups[key], dtype=int)
        label = period_label(scheme, panel.dates[rows[0]])
        out.append(_complete_case(panel, rows, label))
    return out
