"""Input parsing, validation and dataset assembly."""

from .dataset import (
    CLASS_COLUMNS,
    CONTROL_COLUMNS,
    FLAG_COLUMNS,
    INDEX_SERIES,
    Dataset,
    WindowData,
    emit_canonical,
    load_dataset,
)
from .protests import (
    PHRASE_TABLE,
    ProtestEvent,
    ProtestSeries,
    align_to_trading_days,
    build_protest_series,
    load_protest_events,
    parse_count_phrase,
    resolve_event_count,
)
from .rosters import (
    RosterMember,
    load_officers,
    load_roster,
    match_rosters,
    normalize_name,
)
from .trading_calendar import TradingCalendar

__all__ = [
    "CLASS_COLUMNS",
    "CONTROL_COLUMNS",
    "FLAG_COLUMNS",
    "INDEX_SERIES",
    "Dataset",
    "WindowData",
    "emit_canonical",
    "load_dataset",
    "PHRASE_TABLE",
    "ProtestEvent",
    "ProtestSeries",
    "align_to_trading_days",
    "build_protest_series",
    "load_protest_events",
    "parse_count_phrase",
    "resolve_event_count",
    "RosterMember",
    "load_officers",
    "load_roster",
    "match_rosters",
    "normalize_name",
    "TradingCalendar",
]
