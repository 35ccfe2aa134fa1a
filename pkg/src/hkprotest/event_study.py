"""Cross-sectional event studies on windowed CARs with industry effects.

Events are data, not code: the default list of eight political events ships
as a CSV the user can edit.  Day indices count trading days from the study
start (day 0), windows are inclusive.
"""

from __future__ import annotations

import csv
import datetime as dt
from pathlib import Path
import warnings
from dataclasses import dataclass
from importlib import resources

import numpy as np
import pandas as pd

from . import kernels
from .core_stats import DesignMatrix, absorb_groups, ols_fit
from .errors import DateAfterWindow, EmptySpecification, EstimationError, SchemaViolation
from .market_model import car_cross_section
from .tables import RegressionRow, RegressionTable

DEFAULT_FLAG_SETS = (
    ("proestablish", "pandemo"),
    ("H", "red"),
    ("centralcontrol", "chinaasset"),
)
DEFAULT_CONTROLS = ("worldbeta", "size", "leverage")


@dataclass(frozen=True)
class EventSpec:
    """A named calendar event and the CAR half-widths to evaluate."""

    name: str
    date: dt.date
    halfwidths: tuple = (1, 2)

    def __post_init__(self):
        object.__setattr__(self, "halfwidths", tuple(int(h) for h in self.halfwidths))
        if any(h < 0 for h in self.halfwidths):
            raise ValueError("halfwidths must be non-negative")


@dataclass(frozen=True)
class EventRegressionResult:
    event: str
    event_date: dt.date
    window: tuple  # (a, b) day indices
    flag_set: tuple
    table: RegressionTable


def anchor_event(date, cal):
    """Trading-day index of the first trading day on/after ``date``.

    Monotone in the date: later dates never anchor earlier.
    """
    idx = cal.first_on_or_after(date)
    if idx is None:
        raise DateAfterWindow(f"{date} falls after the final trading day {cal.end}")
    return idx


def load_events(path):
    if not Path(path).exists():
        raise SchemaViolation(path, "file not found")
    events = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in ("name", "date", "halfwidths") if reader.fieldnames is None or c not in reader.fieldnames]
        if missing:
            raise SchemaViolation(path, f"missing column(s): {', '.join(missing)}")
        for lineno, row in enumerate(reader, start=2):
            try:
                date = dt.date.fromisoformat(row["date"].strip())
            except ValueError:
                raise SchemaViolation(path, f"bad date {row['date']!r}", row=lineno) from None
            raw = (row.get("halfwidths") or "").strip()
            try:
                halfwidths = tuple(int(part) for part in raw.split(";") if part != "")
            except ValueError:
                raise SchemaViolation(path, f"bad halfwidths {raw!r}", row=lineno) from None
            if not halfwidths:
                raise SchemaViolation(path, "empty halfwidths", row=lineno)
            name = row["name"].strip()
            if not name:
                raise SchemaViolation(path, "empty event name", row=lineno)
            events.append(EventSpec(name=name, date=date, halfwidths=halfwidths))
    return events


def default_events():
    """The bundled eight-event list."""
    ref = resources.files("hkprotest").joinpath("data", "default_events.csv")
    with resources.as_file(ref) as path:
        return load_events(path)


def event_regression(car_frame, flags, flag_set, controls, industry, name, se_type="classical"):
    """Cross-sectional OLS of per-stock CAR on connection flags and controls.

    Industry dummies are absorbed (within transformation), not reported; the
    constant is reported as the derived grand-mean adjustment (no inference,
    since the absorbed effects subsume the intercept).  Stocks missing the
    CAR or any control drop out, counted in ``n_dropped``.
    """
    flag_set = tuple(flag_set)
    if not flag_set:
        raise EmptySpecification("event regression declares no connection flags")
    for f in flag_set:
        if f not in flags.columns:
            raise KeyError(f"unknown connection flag {f!r}")

    data = car_frame.set_index("ticker")
    data = data[data["n_days"] > 0]
    cross = pd.DataFrame(index=data.index)
    cross["car"] = data["car"]
    for f in flag_set:
        cross[f] = flags[f].reindex(cross.index).astype(np.float64)
    for c in controls.columns:
        cross[c] = controls[c].reindex(cross.index)
    cross["industry"] = industry.reindex(cross.index)

    usable = cross.dropna()
    n_dropped = len(cross) - len(usable)
    y = usable["car"].to_numpy(dtype=np.float64)
    labels = list(flag_set) + list(controls.columns)
    try:
        x = DesignMatrix.build(
            {lab: usable[lab].to_numpy(dtype=np.float64) for lab in labels}, intercept=True
        )
        absorbed = absorb_groups(x, y, usable["industry"].to_numpy())
        fit = ols_fit(absorbed.x, absorbed.y, se_type=se_type, df_absorbed=absorbed.df_absorbed)
    except EstimationError as err:
        raise EstimationError(f"event regression {name!r}: {err}") from err

    rows = [
        RegressionRow(
            label=lab,
            estimate=fit.coef(lab),
            se=fit.se(lab),
            t_stat=fit.t(lab),
            p_value=fit.p(lab),
        )
        for lab in labels
    ]
    # derived constant: grand mean of y net of the slope contributions
    col_means = {lab: kernels.stable_sum(usable[lab].to_numpy(dtype=np.float64)) / len(usable) for lab in labels}
    const = kernels.stable_sum(y) / len(usable) - sum(col_means[lab] * fit.coef(lab) for lab in labels)
    rows.append(RegressionRow(label="const", estimate=const))

    table = RegressionTable(
        name=name,
        rows=tuple(rows),
        n_obs=fit.n_obs,
        r_squared=fit.r_squared,
        df_resid=fit.df_resid,
        se_type=se_type,
        n_groups=absorbed.n_groups,
        n_entities=fit.n_obs,
        n_dropped=n_dropped,
    )
    return table


def run_event_suite(
    events,
    panel,
    flags,
    controls,
    industry,
    cal,
    flag_sets=DEFAULT_FLAG_SETS,
    se_type="classical",
):
    """One regression per event x window x flag set.

    Events whose window sticks out of the study range are skipped with a
    warning.  Output order is canonical: event date, then window size, then
    flag-set order.
    """
    if not events:
        raise EmptySpecification("no events supplied")
    last = len(panel.days) - 1
    results = []
    for event in sorted(events, key=lambda e: (e.date, e.name)):
        idx = anchor_event(event.date, cal)
        for h in sorted(event.halfwidths):
            a, b = idx - h, idx + h
            if a < 0 or b > last:
                warnings.warn(
                    f"event {event.name!r}: window [{a}, {b}] exceeds the study range, skipped"
                )
                continue
            car_frame = car_cross_section(panel, a, b)
            for flag_set in flag_sets:
                name = f"{event.name} CAR[{a},{b}] {'+'.join(flag_set)}"
                table = event_regression(
                    car_frame, flags, flag_set, controls, industry, name, se_type=se_type
                )
                results.append(
                    EventRegressionResult(
                        event=event.name,
                        event_date=event.date,
                        window=(a, b),
                        flag_set=tuple(flag_set),
                        table=table,
                    )
                )
    return results


def period_car_regressions(
    panel,
    flags,
    controls,
    industry,
    split_index,
    flag_sets=DEFAULT_FLAG_SETS,
    se_type="classical",
):
    """Full / pre-split / post-split CAR cross-sections (three panels)."""
    last = len(panel.days) - 1
    windows = [
        ("full", 0, last),
        ("pre-split", 0, split_index - 1),
        ("post-split", split_index, last),
    ]
    results = []
    for label, a, b in windows:
        car_frame = car_cross_section(panel, a, b)
        for flag_set in flag_sets:
            name = f"{label} CAR[{a},{b}] {'+'.join(flag_set)}"
            table = event_regression(
                car_frame, flags, flag_set, controls, industry, name, se_type=se_type
            )
            results.append(
                EventRegressionResult(
                    event=label,
                    event_date=panel.days[a],
                    window=(a, b),
                    flag_set=tuple(flag_set),
                    table=table,
                )
            )
    return results
