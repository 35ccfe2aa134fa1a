"""Protest head-count construction.

Textual estimates resolve through a fixed phrase table plus plain-numeral
parsing; police/organizer pairs average (half up); events on non-trading days
roll forward onto the next trading day.  The daily series is z-scored with
the population (divisor-n) standard deviation.
"""

from __future__ import annotations

import csv
import datetime as dt
import decimal
import re
import unicodedata
from pathlib import Path
from dataclasses import dataclass

import numpy as np

from ..core_stats import StandardizationStats, standardize
from ..errors import EventAfterWindow, SchemaViolation, UnrecognizedPhrase
from .trading_calendar import TradingCalendar

PHRASE_TABLE = {
    "数以百计": 500,
    "数千": 5000,
    "过百": 100,
    "上千": 1000,
}

_NUMERAL = re.compile(r"^(\d+(?:\.\d+)?)(万)?$")


def parse_count_phrase(raw):
    """Resolve a textual head-count descriptor to an integer count.

    Fixed phrases come from :data:`PHRASE_TABLE`; anything else must be a
    plain numeral, optionally suffixed with 万 (x 10,000).  Unrecognized text
    raises rather than guessing.
    """
    if raw is None or not str(raw).strip():
        raise UnrecognizedPhrase(raw)
    text = unicodedata.normalize("NFKC", str(raw)).strip()
    text = text.replace(",", "").removesuffix("人")
    if text in PHRASE_TABLE:
        return PHRASE_TABLE[text]
    m = _NUMERAL.match(text)
    if m:
        # decimal arithmetic: 33.8万 must be exactly 338,000
        value = decimal.Decimal(m.group(1)) * (10_000 if m.group(2) else 1)
        if value != value.to_integral_value():
            raise UnrecognizedPhrase(raw)
        return int(value)
    raise UnrecognizedPhrase(raw)


@dataclass(frozen=True)
class ProtestEvent:
    """One protest observation: a date plus at least one count source."""

    date: dt.date
    raw_count: str | None = None
    police_estimate: int | None = None
    organizer_estimate: int | None = None

    def __post_init__(self):
        if self.raw_count is None and self.police_estimate is None and self.organizer_estimate is None:
            raise ValueError(f"event on {self.date} carries no count source")
        for field in ("police_estimate", "organizer_estimate"):
            v = getattr(self, field)
            if v is not None and v < 0:
                raise ValueError(f"{field} must be non-negative, got {v}")


def resolve_event_count(event):
    """Deterministic head count for one event.

    Both police and organizer present: arithmetic mean, rounded half up.
    Exactly one: that estimate.  Neither: parse the textual descriptor.
    """
    p, o = event.police_estimate, event.organizer_estimate
    if p is not None and o is not None:
        return (p + o + 1) // 2
    if p is not None:
        return p
    if o is not None:
        return o
    return parse_count_phrase(event.raw_count)


def align_to_trading_days(events, cal: TradingCalendar):
    """Per-trading-day counts with non-trading-day mass rolled forward.

    Every event lands on the first trading day on/after its date, so each
    trading day collects its own events plus everything since the previous
    trading day.  Total mass is conserved exactly (integer arithmetic).
    """
    counts = np.zeros(len(cal), dtype=np.int64)
    for event in events:
        idx = cal.first_on_or_after(event.date)
        if idx is None:
            raise EventAfterWindow(
                f"event on {event.date} falls after the final trading day {cal.end}"
            )
        counts[idx] += resolve_event_count(event)
    return counts


@dataclass(frozen=True)
class ProtestSeries:
    """Calendar-aligned counts and their z-scores."""

    calendar: TradingCalendar
    counts: np.ndarray
    stdprotests: np.ndarray
    stats: StandardizationStats


def build_protest_series(events, cal, divisor="population"):
    counts = align_to_trading_days(events, cal)
    z, stats = standardize(counts, divisor=divisor)
    return ProtestSeries(calendar=cal, counts=counts, stdprotests=z, stats=stats)


def load_protest_events(path):
    """Parse protests.csv: date, raw_count, police_estimate, organizer_estimate."""
    if not Path(path).exists():
        raise SchemaViolation(path, "file not found")
    required = ["date", "raw_count", "police_estimate", "organizer_estimate"]
    events = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in required if reader.fieldnames is None or c not in reader.fieldnames]
        if missing:
            raise SchemaViolation(path, f"missing column(s): {', '.join(missing)}")
        for lineno, row in enumerate(reader, start=2):
            try:
                date = dt.date.fromisoformat(row["date"].strip())
            except ValueError:
                raise SchemaViolation(path, f"bad date {row['date']!r}", row=lineno) from None

            def _opt_int(field):
                raw = (row.get(field) or "").strip()
                if not raw:
                    return None
                try:
                    return int(raw.replace(",", ""))
                except ValueError:
                    raise SchemaViolation(
                        path, f"bad integer {raw!r} in {field}", row=lineno
                    ) from None

            raw_count = (row.get("raw_count") or "").strip() or None
            try:
                events.append(
                    ProtestEvent(
                        date=date,
                        raw_count=raw_count,
                        police_estimate=_opt_int("police_estimate"),
                        organizer_estimate=_opt_int("organizer_estimate"),
                    )
                )
            except ValueError as err:
                raise SchemaViolation(path, str(err), row=lineno) from None
    return events
