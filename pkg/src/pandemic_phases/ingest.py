"""Reader for the wide-format CSSE global time-series CSV files.

Each file holds one kind of count (confirmed, deaths or recovered) with one
row per province/country and one column per day (``M/D/YY`` headers).
"""

from __future__ import annotations

import csv
import datetime as dt
import io
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DomainError, ParseError
from .series import ObservedSeries, monotone_repair

log = logging.getLogger(__name__)

KINDS = ("confirmed", "deaths", "recovered")
HEADER = ("Province/State", "Country/Region", "Lat", "Long")


@dataclass(frozen=True)
class CsseRow:
    province: str | None
    country: str
    values: np.ndarray


@dataclass
class CsseTable:
    kind: str
    dates: list[dt.date]
    rows: list[CsseRow]

    def countries(self) -> list[str]:
        return sorted({row.country for row in self.rows})

    def country_total(self, country: str) -> np.ndarray:
        """Sum of all province rows of ``country``."""
        matches = [row.values for row in self.rows if row.country == country]
        if not matches:
            raise DomainError(f"country {country!r} not found in the {self.kind} table")
        return np.sum(matches, axis=0)


def _parse_date(text: str, line: int) -> dt.date:
    try:
        month, day, year = (int(part) for part in text.strip().split("/"))
        return dt.date(2000 + year if year < 100 else year, month, day)
    except ValueError as exc:
        raise ParseError(f"unparseable date {text!r} in header", line=line) from exc


def _parse_count(text: str, line: int) -> float:
    text = text.strip()
    if text == "":
        raise ParseError("empty count", line=line)
    try:
        value = float(text)
    except ValueError as exc:
        raise ParseError(f"unparseable count {text!r}", line=line) from exc
    if not np.isfinite(value) or value < 0:
        raise ParseError(f"count must be a finite non-negative number, got {text!r}", line=line)
    return value


def parse_csse_csv(text, kind: str) -> CsseTable:
    """Parse one CSSE time-series file from a string or text stream."""
    if kind not in KINDS:
        raise DomainError(f"kind must be one of {KINDS}, got {kind!r}")
    stream = io.StringIO(text) if isinstance(text, str) else text
    reader = csv.reader(stream)
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError("empty file", line=1) from None
    if header and header[0].startswith("﻿"):
        header[0] = header[0][1:]
    if tuple(h.strip() for h in header[:4]) != HEADER:
        raise ParseError("header must start with " + ",".join(HEADER), line=1)
    dates = [_parse_date(h, 1) for h in header[4:]]
    if not dates:
        raise ParseError("header has no date columns", line=1)
    for prev, cur in zip(dates, dates[1:]):
        if (cur - prev).days != 1:
            raise ParseError(f"dates not consecutive: {prev} then {cur}", line=1)

    rows = []
    for fields in reader:
        line = reader.line_num
        if not fields or all(f.strip() == "" for f in fields):
            continue
        if len(fields) != len(header):
            raise ParseError(f"expected {len(header)} fields, found {len(fields)}", line=line)
        country = fields[1].strip()
        if not country:
            raise ParseError("missing country", line=line)
        values = np.array([_parse_count(f, line) for f in fields[4:]])
        rows.append(CsseRow(province=fields[0].strip() or None, country=country, values=values))
    return CsseTable(kind=kind, dates=dates, rows=rows)


def read_csse_file(path, kind: str) -> CsseTable:
    with open(path, newline="", encoding="utf-8") as fh:
        return parse_csse_csv(fh, kind)


def _window(table: CsseTable, start: dt.date | None, end: dt.date | None) -> tuple[int, int]:
    first = table.dates[0] if start is None else start
    last = table.dates[-1] if end is None else end
    if last < first:
        raise DomainError(f"empty date range {first} .. {last}")
    if first < table.dates[0] or last > table.dates[-1]:
        raise DomainError(
            f"range {first} .. {last} outside the file's axis {table.dates[0]} .. {table.dates[-1]}"
        )
    i0 = (first - table.dates[0]).days
    return i0, i0 + (last - first).days + 1


def country_series(
    confirmed: CsseTable,
    deaths: CsseTable,
    recovered: CsseTable,
    country: str,
    start_date: dt.date | None = None,
    end_date: dt.date | None = None,
) -> ObservedSeries:
    """Country totals over ``start_date .. end_date`` (inclusive), repaired to be non-decreasing.

    When the recovered counts are all zero on the window, active cases fall
    back to ``confirmed - deaths`` and the series is flagged.
    """
    columns = {}
    for table in (confirmed, deaths, recovered):
        i0, i1 = _window(table, start_date, end_date)
        columns[table.kind] = monotone_repair(table.country_total(country)[i0:i1])
    lengths = {len(c) for c in columns.values()}
    if len(lengths) != 1:
        raise DomainError("tables do not cover the same date range")
    first = start_date or confirmed.dates[0]
    missing = not np.any(columns["recovered"] > 0)
    if missing:
        log.warning("%s: recovered counts are all zero, active falls back to confirmed - deaths", country)
    return ObservedSeries(
        start_date=first,
        confirmed=columns["confirmed"],
        deaths=columns["deaths"],
        recovered=columns["recovered"],
        recovered_missing=missing,
        label=country,
    )


def load_country(directory, country: str, start_date=None, end_date=None, pattern="time_series_covid19_{kind}_global.csv") -> ObservedSeries:
    """Read the three files named by ``pattern`` from ``directory``."""
    directory = Path(directory)
    tables = [read_csse_file(directory / pattern.format(kind=kind), kind) for kind in KINDS]
    return country_series(*tables, country, start_date, end_date)


def format_csse_csv(table: CsseTable) -> str:
    """Serialise a table back to the wide CSV layout (lat/long written as 0)."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(list(HEADER) + [f"{d.month}/{d.day}/{d.year % 100:02d}" for d in table.dates])
    for row in table.rows:
        writer.writerow([row.province or "", row.country, 0, 0] + [repr(float(v)) for v in row.values])
    return out.getvalue()
