"""Trading calendar: an ordered list of exchange trading days.

The calendar is always data, never derived from weekday rules; HK holidays
are too irregular for that.  A reference calendar covering 2014, 2018-2019
and early 2020 ships with the package.
"""

from __future__ import annotations

import csv
import datetime as dt
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from ..errors import SchemaViolation

_BUNDLED = "hk_trading_days.csv"


@dataclass(frozen=True)
class TradingCalendar:
    """Strictly increasing sequence of trading dates."""

    dates: tuple

    def __post_init__(self):
        dates = tuple(self.dates)
        if not dates:
            raise ValueError("calendar is empty")
        for a, b in zip(dates, dates[1:]):
            if a >= b:
                raise ValueError(f"calendar not strictly increasing at {a} >= {b}")
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "_index", {d: i for i, d in enumerate(dates)})

    def __len__(self):
        return len(self.dates)

    def __contains__(self, day):
        return day in self._index

    @property
    def start(self):
        return self.dates[0]

    @property
    def end(self):
        return self.dates[-1]

    def index_of(self, day):
        """Index of an exact trading day; KeyError for non-trading dates."""
        return self._index[day]

    def first_on_or_after(self, day):
        """Index of the first trading day >= ``day``, or None past the end."""
        if day in self._index:
            return self._index[day]
        if day > self.dates[-1]:
            return None
        lo, hi = 0, len(self.dates)
        while lo < hi:
            mid = (lo + hi) // 2
            if self.dates[mid] < day:
                lo = mid + 1
            else:
                hi = mid
        return lo

    def window(self, start, end):
        """Sub-calendar of trading days inside [start, end]."""
        sub = tuple(d for d in self.dates if start <= d <= end)
        if not sub:
            raise ValueError(f"no trading days between {start} and {end}")
        return TradingCalendar(sub)

    @classmethod
    def from_csv(cls, path):
        if not Path(path).exists():
            raise SchemaViolation(path, "file not found")
        rows = []
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or "date" not in reader.fieldnames:
                raise SchemaViolation(path, "missing required column 'date'")
            for lineno, row in enumerate(reader, start=2):
                raw = (row.get("date") or "").strip()
                try:
                    rows.append(dt.date.fromisoformat(raw))
                except ValueError:
                    raise SchemaViolation(path, f"bad date {raw!r}", row=lineno) from None
        try:
            return cls(tuple(rows))
        except ValueError as err:
            raise SchemaViolation(path, str(err)) from None

    @classmethod
    def bundled(cls):
        """The packaged reference calendar."""
        ref = resources.files("hkprotest").joinpath("data", _BUNDLED)
        with resources.as_file(ref) as path:
            return cls.from_csv(path)
