"""Load, validate and assemble every input file into one dataset.

All files are UTF-8 CSV with a header row (RFC-4180 quoting).  Validation
errors carry file and row so a bad record is a one-line fix.  Ingestion is
single-threaded so those row numbers are deterministic; the assembled arrays
are immutable inputs for the estimation modules.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from ..errors import CalendarMismatch, DataError, SchemaViolation
from .protests import ProtestSeries, align_to_trading_days, build_protest_series, load_protest_events
from .rosters import load_officers, load_roster, match_rosters
from .trading_calendar import TradingCalendar

INDEX_SERIES = ("MSCI_HK", "MSCI_WORLD", "SH_COMP")
FLAG_COLUMNS = ("proestablish", "pandemo", "H", "red", "centralcontrol", "chinaasset")
CLASS_COLUMNS = ("H", "red", "centralcontrol", "chinaasset")
CONTROL_COLUMNS = ("size", "leverage", "inverse_pe", "turnover")


def _read_table(path, required):
    path = Path(path)
    if not path.exists():
        raise SchemaViolation(path, "file not found")
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    except Exception as err:  # malformed CSV structure
        raise SchemaViolation(path, f"unreadable CSV: {err}") from None
    missing = [c for c in required if c not in frame.columns]
    if missing:
        raise SchemaViolation(path, f"missing column(s): {', '.join(missing)}")
    return frame


def _parse_dates(values, path, column="date"):
    out = np.empty(len(values), dtype=object)
    cache = {}
    for i, raw in enumerate(values):
        raw = raw.strip()
        day = cache.get(raw)
        if day is None:
            try:
                day = dt.date.fromisoformat(raw)
            except ValueError:
                raise SchemaViolation(path, f"bad date {raw!r} in {column}", row=i + 2) from None
            cache[raw] = day
        out[i] = day
    return out


def _parse_floats(series, path, column, allow_blank=False):
    # numpy's string-to-float conversion is correctly rounded; pandas
    # to_numeric is not, which would break canonical round-trips by one ulp
    raw = series.str.strip()
    blank = (raw == "").to_numpy()
    if blank.any() and not allow_blank:
        row = int(np.flatnonzero(blank)[0])
        raise SchemaViolation(path, f"blank value in {column}", row=row + 2)
    cells = np.where(blank, "nan", raw.to_numpy(dtype=object))
    try:
        return cells.astype(np.float64)
    except ValueError:
        for i, cell in enumerate(cells):
            try:
                float(cell)
            except ValueError:
                raise SchemaViolation(
                    path, f"bad number {raw.iloc[i]!r} in {column}", row=i + 2
                ) from None
        raise


def _parse_flags(series, path, column):
    raw = series.str.strip()
    ok = raw.isin(["0", "1"])
    if not ok.all():
        row = int(np.flatnonzero((~ok).to_numpy())[0])
        raise SchemaViolation(path, f"flag {column} must be 0/1, got {raw.iloc[row]!r}", row=row + 2)
    return raw.astype(np.int8).to_numpy()


def _check_calendar(dates, calendar, path):
    known = set(calendar.dates)
    bad = {d for d in pd.unique(dates) if d not in known}
    if bad:
        for i, day in enumerate(dates):  # recover the first offending row
            if day in bad:
                raise CalendarMismatch(f"{path}:{i + 2}: {day} is not a trading day")


@dataclass(frozen=True)
class WindowData:
    """One estimation or study window: trading days, wide returns, indices."""

    days: tuple
    returns: np.ndarray  # (n_tickers, n_days), NaN where the stock did not trade
    index: dict  # series name -> (n_days,) array, NaN where missing


@dataclass
class Dataset:
    tickers: tuple
    study_cal: TradingCalendar
    windows: dict
    protest_series: ProtestSeries
    connections: pd.DataFrame  # index ticker, FLAG_COLUMNS, int8
    industry: pd.Series
    controls: dict  # control name -> (n_tickers, n_study_days)
    occupy_counts: np.ndarray | None
    report: dict
    frames: dict = field(repr=False, default_factory=dict)

    @property
    def has_occupy(self):
        return "occupy" in self.windows and self.occupy_counts is not None


def _wide(frame, tickers, days, path):
    """Pivot a (ticker, date, value) long frame onto a tickers x days grid."""
    idx = {t: i for i, t in enumerate(tickers)}
    col = {d: j for j, d in enumerate(days)}
    t_codes = frame["ticker"].map(idx)
    d_codes = frame["date"].map(col)
    keep = (t_codes.notna() & d_codes.notna()).to_numpy()
    if not keep.any():
        return np.full((len(tickers), len(days)), np.nan)
    ti = t_codes.to_numpy()[keep].astype(np.int64)
    di = d_codes.to_numpy()[keep].astype(np.int64)
    flat = ti * len(days) + di
    if len(np.unique(flat)) != len(flat):
        order = np.argsort(flat, kind="stable")
        dup = order[np.flatnonzero(np.diff(flat[order]) == 0)[0] + 1]
        pos = np.flatnonzero(keep)[dup]
        raise SchemaViolation(
            path,
            f"duplicate row for {frame['ticker'].iloc[pos]} on {frame['date'].iloc[pos]}",
        )
    out = np.full((len(tickers), len(days)), np.nan)
    out.flat[flat] = frame["value"].to_numpy()[keep]
    return out


def _index_vectors(index_frame, days, path):
    col = {d: j for j, d in enumerate(days)}
    out = {name: np.full(len(days), np.nan) for name in INDEX_SERIES}
    for name, day, value in index_frame.itertuples(index=False):
        j = col.get(day)
        if j is None:
            continue
        if not np.isnan(out[name][j]):
            raise SchemaViolation(path, f"duplicate index row for {name} on {day}")
        out[name][j] = value
    return out


def load_dataset(paths, config):
    """Ingest every input file and assemble the analysis dataset.

    Applies the sample filters (listing/delisting cutoffs, leverage > 1 rows
    dropped, turnover > 1 values dropped) and reports per-filter drop counts
    alongside the connection-flag marginals.
    """
    report = {}
    calendar = (
        TradingCalendar.from_csv(paths.calendar)
        if paths.calendar is not None
        else TradingCalendar.bundled()
    )
    study_cal = calendar.window(config.study_start, config.study_end)
    report["study_trading_days"] = len(study_cal)

    # protest events, restricted to the study window before alignment
    events = load_protest_events(paths.protests)
    study_events = [e for e in events if config.study_start <= e.date <= config.study_end]
    report["protest_events_total"] = len(events)
    report["protest_events_in_study_window"] = len(study_events)
    protest_series = build_protest_series(study_events, study_cal, divisor=config.divisor)

    # returns: validate, then apply the listing filters
    ret_raw = _read_table(paths.returns, ["ticker", "date", "return_pct"])
    ret = pd.DataFrame(
        {
            "ticker": ret_raw["ticker"].str.strip(),
            "date": _parse_dates(ret_raw["date"].to_numpy(), paths.returns),
            "value": _parse_floats(ret_raw["return_pct"], paths.returns, "return_pct"),
        }
    )
    _check_calendar(ret["date"].to_numpy(), calendar, paths.returns)

    first = ret.groupby("ticker")["date"].min()
    last = ret.groupby("ticker")["date"].max()
    cut_idx = calendar.first_on_or_after(config.listing_cutoff)
    if cut_idx is None:
        raise DataError("listing cutoff falls after the calendar ends")
    cutoff_day = calendar.dates[cut_idx]
    listed = first[first <= cutoff_day].index
    alive = last[last >= study_cal.end].index
    tickers = tuple(sorted(set(listed) & set(alive)))
    if not tickers:
        raise DataError("no stock passes the listing/delisting filters")
    all_tickers = set(first.index)
    report["stocks_in_returns_file"] = len(all_tickers)
    report["dropped_listed_after_cutoff"] = len(all_tickers - set(listed))
    report["dropped_delisted_early"] = len((all_tickers & set(listed)) - set(alive))
    report["stocks_in_universe"] = len(tickers)

    # index series
    idx_raw = _read_table(paths.index, ["date", "series", "return_pct"])
    series_names = idx_raw["series"].str.strip()
    bad_series = ~series_names.isin(INDEX_SERIES)
    if bad_series.any():
        row = int(np.flatnonzero(bad_series.to_numpy())[0])
        raise SchemaViolation(
            paths.index,
            f"series must be one of {INDEX_SERIES}, got {series_names.iloc[row]!r}",
            row=row + 2,
        )
    idx = pd.DataFrame(
        {
            "series": series_names,
            "date": _parse_dates(idx_raw["date"].to_numpy(), paths.index),
            "value": _parse_floats(idx_raw["return_pct"], paths.index, "return_pct"),
        }
    )
    _check_calendar(idx["date"].to_numpy(), calendar, paths.index)
    idx = idx[["series", "date", "value"]]

    windows = {}
    spans = {
        "estimation": (config.estimation_start, config.estimation_end),
        "study": (config.study_start, config.study_end),
    }
    occupy_possible = ret["date"].min() <= config.occupy_end
    if occupy_possible:
        spans["occupy_estimation"] = (config.occupy_est_start, config.occupy_est_end)
        spans["occupy"] = (config.occupy_start, config.occupy_end)
    for name, (start, end) in spans.items():
        try:
            sub_cal = calendar.window(start, end)
        except ValueError:
            if name.startswith("occupy"):
                continue
            raise
        days = sub_cal.dates
        sub = ret[(ret["date"] >= start) & (ret["date"] <= end)]
        windows[name] = WindowData(
            days=days,
            returns=_wide(sub, tickers, days, paths.returns),
            index=_index_vectors(idx[(idx["date"] >= start) & (idx["date"] <= end)], days, paths.index),
        )
    report["occupy_data_present"] = "occupy" in windows and "occupy_estimation" in windows

    occupy_counts = None
    if report["occupy_data_present"]:
        occupy_cal = calendar.window(config.occupy_start, config.occupy_end)
        occupy_events = [e for e in events if config.occupy_start <= e.date <= config.occupy_end]
        report["protest_events_in_occupy_window"] = len(occupy_events)
        occupy_counts = align_to_trading_days(occupy_events, occupy_cal)

    # controls: leverage > 1 drops the row, turnover > 1 drops the value
    ctl_raw = _read_table(paths.controls, ["ticker", "date"] + list(CONTROL_COLUMNS))
    ctl = pd.DataFrame(
        {
            "ticker": ctl_raw["ticker"].str.strip(),
            "date": _parse_dates(ctl_raw["date"].to_numpy(), paths.controls),
        }
    )
    for name in CONTROL_COLUMNS:
        ctl[name] = _parse_floats(ctl_raw[name], paths.controls, name, allow_blank=True)
    _check_calendar(ctl["date"].to_numpy(), calendar, paths.controls)
    lev_bad = ctl["leverage"] > 1.0
    report["dropped_leverage_rows"] = int(lev_bad.sum())
    ctl = ctl[~lev_bad].reset_index(drop=True)
    to_bad = ctl["turnover"] > 1.0
    report["dropped_turnover_values"] = int(to_bad.sum())
    ctl.loc[to_bad, "turnover"] = np.nan

    study_days = windows["study"].days
    controls = {}
    for name in CONTROL_COLUMNS:
        long = ctl[["ticker", "date", name]].rename(columns={name: "value"}).dropna(subset=["value"])
        controls[name] = _wide(long, tickers, study_days, paths.controls)

    # classification flags
    cls_raw = _read_table(paths.classes, ["ticker"] + list(CLASS_COLUMNS))
    cls_tickers = cls_raw["ticker"].str.strip()
    dup = cls_tickers.duplicated()
    if dup.any():
        row = int(np.flatnonzero(dup.to_numpy())[0])
        raise SchemaViolation(paths.classes, f"duplicate ticker {cls_tickers.iloc[row]!r}", row=row + 2)
    cls = pd.DataFrame({"ticker": cls_tickers})
    for name in CLASS_COLUMNS:
        cls[name] = _parse_flags(cls_raw[name], paths.classes, name)
    both = (cls["H"] == 1) & (cls["chinaasset"] == 1)
    if both.any():
        row = int(np.flatnonzero(both.to_numpy())[0])
        raise SchemaViolation(
            paths.classes,
            f"{cls['ticker'].iloc[row]}: H and chinaasset are mutually exclusive",
            row=row + 2,
        )
    cls = cls.set_index("ticker")
    report["classes_not_in_universe"] = int(len(set(cls.index) - set(tickers)))
    report["universe_missing_classes"] = int(len(set(tickers) - set(cls.index)))

    # roster matching
    members = load_roster(paths.roster)
    officers = load_officers(paths.officers)
    party_flags, provenance = match_rosters(officers, members)
    report["roster_members_deduped"] = len({m.name for m in members})

    connections = pd.DataFrame(
        0, index=pd.Index(tickers, name="ticker"), columns=list(FLAG_COLUMNS), dtype="int8"
    )
    shared_party = party_flags.index.intersection(connections.index)
    connections.loc[shared_party, ["proestablish", "pandemo"]] = party_flags.loc[
        shared_party, ["proestablish", "pandemo"]
    ].astype("int8")
    shared_cls = cls.index.intersection(connections.index)
    connections.loc[shared_cls, list(CLASS_COLUMNS)] = cls.loc[shared_cls, list(CLASS_COLUMNS)].astype("int8")
    report["flag_counts"] = {name: int(connections[name].sum()) for name in FLAG_COLUMNS}

    # industry labels
    ind_raw = _read_table(paths.industry, ["ticker", "industry"])
    ind = pd.Series(
        ind_raw["industry"].str.strip().to_numpy(),
        index=ind_raw["ticker"].str.strip(),
        name="industry",
    )
    ind = ind[~ind.index.duplicated()]
    industry = pd.Series("unclassified", index=pd.Index(tickers, name="ticker"), name="industry")
    shared_ind = ind.index.intersection(industry.index)
    industry.loc[shared_ind] = ind.loc[shared_ind]
    report["stocks_without_industry"] = int((industry == "unclassified").sum())
    report["industries"] = int(industry.nunique())

    frames = {
        "returns": ret[ret["ticker"].isin(tickers)].sort_values(["ticker", "date"]).reset_index(drop=True),
        "index": idx.sort_values(["series", "date"]).reset_index(drop=True),
        "controls": ctl[ctl["ticker"].isin(tickers)].sort_values(["ticker", "date"]).reset_index(drop=True),
        "events": events,
        "roster": members,
        "officers": officers,
        "classes": cls,
        "industry": industry,
        "provenance": provenance,
        "calendar": calendar,
    }

    return Dataset(
        tickers=tickers,
        study_cal=study_cal,
        windows=windows,
        protest_series=protest_series,
        connections=connections,
        industry=industry,
        controls=controls,
        occupy_counts=occupy_counts,
        report=report,
        frames=frames,
    )


def _fmt(value):
    """Shortest round-trip float formatting for canonical emission."""
    if isinstance(value, float):
        if np.isnan(value):
            return ""
        return repr(value)
    return str(value)


def emit_canonical(dataset, out_dir):
    """Write the validated dataset back out as canonical CSV files.

    Re-ingesting the emitted files reproduces the in-memory dataset exactly:
    rows are sorted, floats use shortest round-trip formatting.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    frames = dataset.frames

    with open(out / "calendar.csv", "w", encoding="utf-8") as fh:
        fh.write("date\n")
        for day in frames["calendar"].dates:
            fh.write(day.isoformat() + "\n")

    with open(out / "returns.csv", "w", encoding="utf-8") as fh:
        fh.write("ticker,date,return_pct\n")
        for t, d, v in frames["returns"].itertuples(index=False):
            fh.write(f"{t},{d.isoformat()},{_fmt(v)}\n")

    with open(out / "index.csv", "w", encoding="utf-8") as fh:
        fh.write("date,series,return_pct\n")
        for s, d, v in frames["index"].itertuples(index=False):
            fh.write(f"{d.isoformat()},{s},{_fmt(v)}\n")

    with open(out / "controls.csv", "w", encoding="utf-8") as fh:
        fh.write("ticker,date," + ",".join(CONTROL_COLUMNS) + "\n")
        for row in frames["controls"].itertuples(index=False):
            vals = ",".join(_fmt(getattr(row, c)) for c in CONTROL_COLUMNS)
            fh.write(f"{row.ticker},{row.date.isoformat()},{vals}\n")

    with open(out / "protests.csv", "w", encoding="utf-8") as fh:
        fh.write("date,raw_count,police_estimate,organizer_estimate\n")
        for e in sorted(frames["events"], key=lambda e: (e.date, e.raw_count or "")):
            police = "" if e.police_estimate is None else str(e.police_estimate)
            org = "" if e.organizer_estimate is None else str(e.organizer_estimate)
            fh.write(f"{e.date.isoformat()},{e.raw_count or ''},{police},{org}\n")

    with open(out / "roster.csv", "w", encoding="utf-8") as fh:
        fh.write("name,body,camp\n")
        for m in sorted(frames["roster"], key=lambda m: (m.name, m.body)):
            fh.write(f"{m.name},{m.body},{m.camp}\n")

    with open(out / "officers.csv", "w", encoding="utf-8") as fh:
        fh.write("ticker,officer_name\n")
        for ticker in sorted(frames["officers"]):
            for name in frames["officers"][ticker]:
                fh.write(f"{ticker},{name}\n")

    with open(out / "classes.csv", "w", encoding="utf-8") as fh:
        fh.write("ticker," + ",".join(CLASS_COLUMNS) + "\n")
        cls = frames["classes"].sort_index()
        for ticker, row in cls.iterrows():
            fh.write(f"{ticker}," + ",".join(str(int(row[c])) for c in CLASS_COLUMNS) + "\n")

    with open(out / "industry.csv", "w", encoding="utf-8") as fh:
        fh.write("ticker,industry\n")
        for ticker, label in frames["industry"].items():
            fh.write(f"{ticker},{label}\n")

    provenance = frames["provenance"]
    provenance.to_csv(out / "match_provenance.csv", index=False)
    return out
