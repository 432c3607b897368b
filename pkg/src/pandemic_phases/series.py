"""Observed daily cumulative counts for one region."""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError


def monotone_repair(values) -> np.ndarray:
    """Replace every drop in a cumulative series by the previous value (running max)."""
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        return arr.copy()
    return np.maximum.accumulate(arr)


@dataclass
class ObservedSeries:
    """Daily cumulative confirmed, deaths and recovered counts.

    ``active`` defaults to ``confirmed - deaths - recovered`` clamped at zero.
    ``recovered_missing`` marks series whose recovered counts were unusable,
    in which case active cases fall back to ``confirmed - deaths``.
    """

    start_date: dt.date
    confirmed: np.ndarray
    deaths: np.ndarray
    recovered: np.ndarray
    active: np.ndarray | None = None
    recovered_missing: bool = False
    label: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.confirmed = np.asarray(self.confirmed, dtype=float)
        self.deaths = np.asarray(self.deaths, dtype=float)
        self.recovered = np.asarray(self.recovered, dtype=float)
        n = len(self.deaths)
        if n < 1:
            raise DomainError("series must contain at least one day")
        if len(self.confirmed) != n or len(self.recovered) != n:
            raise DomainError("confirmed, deaths and recovered must have equal length")
        if self.active is None:
            removed = self.deaths if self.recovered_missing else self.deaths + self.recovered
            self.active = np.maximum(self.confirmed - removed, 0.0)
        else:
            self.active = np.asarray(self.active, dtype=float)
            if len(self.active) != n:
                raise DomainError("active must have the same length as deaths")

    def __len__(self) -> int:
        return len(self.deaths)

    @property
    def last(self) -> int:
        return len(self) - 1

    @property
    def dates(self) -> list[dt.date]:
        return [self.start_date + dt.timedelta(days=k) for k in range(len(self))]

    def date_of(self, t: int) -> dt.date:
        return self.start_date + dt.timedelta(days=int(t))

    def index_of(self, day: dt.date) -> int:
        return (day - self.start_date).days

    def slice(self, start: int, stop: int) -> "ObservedSeries":
        """Days ``start`` .. ``stop - 1`` as a new series."""
        if not 0 <= start < stop <= len(self):
            raise DomainError(f"slice [{start}, {stop}) outside series of length {len(self)}")
        return ObservedSeries(
            start_date=self.date_of(start),
            confirmed=self.confirmed[start:stop],
            deaths=self.deaths[start:stop],
            recovered=self.recovered[start:stop],
            active=self.active[start:stop],
            recovered_missing=self.recovered_missing,
            label=self.label,
            meta=dict(self.meta),
        )
