"""Run configuration: input locations, window defaults, model options.

Defaults reproduce the study design end to end: a 2019-06-06..2020-01-17
study window split at 2019-10-05, betas estimated on calendar-year 2018
against the MSCI HK index, and the 2014 occupation windows for the
sensitivity measure.
"""

from __future__ import annotations

import datetime as dt
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

_DATE_FIELDS = (
    "study_start",
    "study_end",
    "estimation_start",
    "estimation_end",
    "occupy_est_start",
    "occupy_est_end",
    "occupy_start",
    "occupy_end",
    "split_date",
    "listing_cutoff",
)


@dataclass(frozen=True)
class InputPaths:
    """Locations of the eight input files (None picks the bundled default
    where one exists: calendar and events)."""

    protests: Path
    roster: Path
    officers: Path
    classes: Path
    returns: Path
    index: Path
    controls: Path
    industry: Path
    calendar: Path | None = None
    events: Path | None = None

    @classmethod
    def from_dir(cls, root):
        """Conventional file names inside one directory."""
        root = Path(root)
        names = {
            "protests": "protests.csv",
            "roster": "roster.csv",
            "officers": "officers.csv",
            "classes": "classes.csv",
            "returns": "returns.csv",
            "index": "index.csv",
            "controls": "controls.csv",
            "industry": "industry.csv",
        }
        kwargs = {key: root / fname for key, fname in names.items()}
        for key, fname in (("calendar", "calendar.csv"), ("events", "events.csv")):
            candidate = root / fname
            kwargs[key] = candidate if candidate.exists() else None
        return cls(**kwargs)


@dataclass(frozen=True)
class RunConfig:
    study_start: dt.date = dt.date(2019, 6, 6)
    study_end: dt.date = dt.date(2020, 1, 17)
    estimation_start: dt.date = dt.date(2018, 1, 1)
    estimation_end: dt.date = dt.date(2018, 12, 31)
    occupy_est_start: dt.date = dt.date(2014, 1, 1)
    occupy_est_end: dt.date = dt.date(2014, 6, 30)
    occupy_start: dt.date = dt.date(2014, 9, 26)
    occupy_end: dt.date = dt.date(2014, 12, 15)
    split_date: dt.date = dt.date(2019, 10, 5)
    listing_cutoff: dt.date = dt.date(2018, 1, 1)
    min_obs: int = 60
    occupy_min_obs: int = 30
    se_type: str = "classical"
    divisor: str = "population"
    subtract_alpha: bool = False
    winsorize_ar: float = 0.0  # 0 disables; else symmetric tail quantile
    market_index: str = "MSCI_HK"
    threads: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.estimation_end >= self.study_start:
            raise ValueError("estimation window must end before the study window starts")
        if not (self.study_start <= self.split_date <= self.study_end):
            raise ValueError("split_date must fall inside the study window")
        if self.occupy_est_end >= self.occupy_start:
            raise ValueError("occupy estimation window must precede the occupy window")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")
        if not 0.0 <= self.winsorize_ar < 0.5:
            raise ValueError("winsorize_ar must be in [0, 0.5)")

    def to_dict(self):
        out = asdict(self)
        for key in _DATE_FIELDS:
            out[key] = out[key].isoformat()
        return out

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config key(s): {', '.join(sorted(unknown))}")
        kwargs = dict(data)
        for key in _DATE_FIELDS:
            if key in kwargs and isinstance(kwargs[key], str):
                kwargs[key] = dt.date.fromisoformat(kwargs[key])
        return cls(**kwargs)

    @classmethod
    def from_json_file(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))
