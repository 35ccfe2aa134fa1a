"""Stock-day panel: assembly, interaction regressions, sensitivity variants.

The panel regressions are pooled OLS with industry dummies absorbed.  The
connection flags are time-invariant, therefore entity fixed effects would
annihilate every level term; entity FE is still offered as an option and
legally drops those columns (with a note) rather than failing.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd

from . import kernels
from .core_stats import DesignMatrix, absorb_groups, ols_fit
from .errors import EmptyPeriod, EmptySpecification
from .ingest.dataset import FLAG_COLUMNS
from .market_model import AbnormalPanel
from .tables import RegressionRow, RegressionTable

PERIODS = ("full", "pre", "post")
FE_CHOICES = ("industry", "entity", "none")
MARKET_CONTROLS = ("worldchange", "shindex")
BASE_CONTROLS = ("size", "leverage", "inverse_pe", "turnover", "ar_lag1", "ar_lag2")

DEFAULT_COLUMN_SPECS = (
    ("intensity", (), ()),
    ("party-levels", ("proestablish", "pandemo"), ()),
    ("party-interactions", ("proestablish", "pandemo"), ("proestablish", "pandemo")),
    ("mainland-levels", ("H", "red"), ()),
    ("mainland-interactions", ("H", "red"), ("H", "red")),
    ("state-levels", ("centralcontrol", "chinaasset"), ()),
    ("state-interactions", ("centralcontrol", "chinaasset"), ("centralcontrol", "chinaasset")),
)


@dataclass(frozen=True)
class PanelModelSpec:
    """Which regressors enter one panel column, and how it is estimated."""

    name: str
    flag_levels: tuple = ()
    interactions: tuple = ()
    market_control: str = "worldchange"
    period: str = "full"
    fe: str = "industry"
    se_type: str = "classical"
    allow_standalone_interactions: bool = False
    extra_controls: tuple = ()
    extra_interactions: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "flag_levels", tuple(self.flag_levels))
        object.__setattr__(self, "interactions", tuple(self.interactions))
        object.__setattr__(self, "extra_controls", tuple(self.extra_controls))
        object.__setattr__(self, "extra_interactions", tuple(self.extra_interactions))
        if self.market_control not in MARKET_CONTROLS:
            raise ValueError(f"market_control must be one of {MARKET_CONTROLS}")
        if self.period not in PERIODS:
            raise ValueError(f"period must be one of {PERIODS}")
        if self.fe not in FE_CHOICES:
            raise ValueError(f"fe must be one of {FE_CHOICES}")
        if not self.allow_standalone_interactions:
            orphans = [f for f in self.interactions if f not in self.flag_levels]
            if orphans:
                raise ValueError(
                    f"interaction(s) without level term: {', '.join(orphans)} "
                    "(set allow_standalone_interactions to permit)"
                )

    def regressor_labels(self):
        labels = ["stdprotests"]
        labels += list(self.flag_levels)
        labels += [f"stdprotests*{f}" for f in self.interactions]
        labels += list(self.extra_controls)
        labels += [f"stdprotests*{c}" for c in self.extra_interactions]
        labels += [self.market_control] + list(BASE_CONTROLS)
        return labels


def default_column_specs(period="full", market_control="worldchange", se_type="classical"):
    """The seven standard panel columns (levels and interaction pairs)."""
    specs = []
    for name, levels, inter in DEFAULT_COLUMN_SPECS:
        specs.append(
            PanelModelSpec(
                name=f"{period}:{name}" if period != "full" else name,
                flag_levels=levels,
                interactions=inter,
                market_control=market_control,
                period=period,
                se_type=se_type,
            )
        )
    return specs


def build_panel(ar_panel: AbnormalPanel, protest_series, connections, controls, market, industry):
    """Assemble the long stock-day panel.

    One row per stock-day with a defined abnormal return; lags reference the
    same stock's previous trading days on the study grid, so the first two
    study days carry missing lags.  Returns ``(frame, reconciliation)`` where
    the frame is canonically sorted by (ticker, date).
    """
    tickers = np.asarray(ar_panel.tickers)
    days = list(ar_panel.days)
    n_stocks, n_days = ar_panel.values.shape
    if len(protest_series.stdprotests) != n_days:
        raise ValueError("protest series length does not match the AR grid")

    ar = ar_panel.values
    lag1 = np.full_like(ar, np.nan)
    lag2 = np.full_like(ar, np.nan)
    lag1[:, 1:] = ar[:, :-1]
    lag2[:, 2:] = ar[:, :-2]

    stock_idx = np.repeat(np.arange(n_stocks), n_days)
    day_idx = np.tile(np.arange(n_days), n_stocks)
    keep = np.isfinite(ar.ravel())

    stock_idx = stock_idx[keep]
    day_idx = day_idx[keep]

    flags = connections.reindex(tickers).to_numpy(dtype=np.int8)
    data = {
        "ticker": tickers[stock_idx],
        "date": np.asarray(days, dtype=object)[day_idx],
        "day_index": day_idx.astype(np.int64),
        "ar": ar.ravel()[keep],
        "stdprotests": protest_series.stdprotests[day_idx],
    }
    for j, name in enumerate(FLAG_COLUMNS):
        data[name] = flags[stock_idx, j].astype(np.float64)
    for name, series in market.items():
        series = np.asarray(series, dtype=np.float64)
        if series.shape[0] != n_days:
            raise ValueError(f"market control {name!r} length does not match the grid")
        data[name] = series[day_idx]
    for name, grid in controls.items():
        grid = np.asarray(grid, dtype=np.float64)
        if grid.shape != ar.shape:
            raise ValueError(f"control {name!r} grid does not match the AR grid")
        data[name] = grid.ravel()[keep]
    data["ar_lag1"] = lag1.ravel()[keep]
    data["ar_lag2"] = lag2.ravel()[keep]
    data["industry"] = industry.reindex(tickers).to_numpy(dtype=object)[stock_idx]

    frame = pd.DataFrame(data)
    frame = frame.sort_values(["ticker", "date"], kind="mergesort").reset_index(drop=True)
    reconciliation = {
        "grid_cells": int(n_stocks * n_days),
        "rows_with_ar": int(len(frame)),
        "rows_with_both_lags": int(
            (np.isfinite(frame["ar_lag1"]) & np.isfinite(frame["ar_lag2"])).sum()
        ),
    }
    return frame, reconciliation


def _period_mask(frame, period, split_index):
    if period == "full":
        return np.ones(len(frame), dtype=bool)
    if split_index is None:
        raise ValueError("pre/post periods require split_index")
    if period == "pre":
        return frame["day_index"].to_numpy() < split_index
    return frame["day_index"].to_numpy() >= split_index


def run_panel_model(frame, spec: PanelModelSpec, split_index=None):
    """Estimate one panel column on the assembled frame.

    Rows missing any active regressor are dropped for this model only and
    counted.  Extra (sensitivity) columns that are degenerate on the
    estimation sample are omitted with a note instead of poisoning the rank
    check; core regressors still fail loudly.
    """
    mask = _period_mask(frame, spec.period, split_index)
    sub = frame[mask]
    if len(sub) == 0:
        raise EmptyPeriod(f"period {spec.period!r} leaves no rows")

    work = pd.DataFrame(index=sub.index)
    work["ar"] = sub["ar"]
    work["stdprotests"] = sub["stdprotests"]
    for f in spec.flag_levels:
        work[f] = sub[f]
    for f in spec.interactions:
        work[f"stdprotests*{f}"] = sub["stdprotests"] * sub[f]
    for c in spec.extra_controls:
        work[c] = sub[c]
    for c in spec.extra_interactions:
        work[f"stdprotests*{c}"] = sub["stdprotests"] * sub[c]
    work[spec.market_control] = sub[spec.market_control]
    for c in BASE_CONTROLS:
        work[c] = sub[c]
    work["_group"] = sub["ticker"] if spec.fe == "entity" else sub["industry"]
    work["_ticker"] = sub["ticker"]

    usable = work.dropna(subset=[c for c in work.columns if c not in ("_group", "_ticker")])
    n_dropped = len(work) - len(usable)
    if len(usable) == 0:
        raise EmptyPeriod(f"model {spec.name!r}: no usable rows after missing-data drops")

    labels = spec.regressor_labels()
    notes = []

    # sensitivity add-ons with no variance in the sample are omitted, noted
    droppable = set(spec.extra_controls) | {f"stdprotests*{c}" for c in spec.extra_interactions}
    for lab in list(labels):
        if lab in droppable:
            col = usable[lab].to_numpy(dtype=np.float64)
            if col.size and col.max() == col.min():
                labels.remove(lab)
                notes.append(f"omitted {lab}: no variation in sample")

    if spec.fe == "entity":
        # time-invariant columns are annihilated by entity demeaning
        for lab in list(labels):
            within = usable.groupby("_ticker", sort=False)[lab].transform("mean")
            if np.allclose(usable[lab].to_numpy(dtype=np.float64), within.to_numpy(), atol=1e-12):
                labels.remove(lab)
                notes.append(f"omitted {lab}: constant within entity")

    if not labels:
        raise EmptySpecification(f"model {spec.name!r} has no identifiable regressors")

    y = usable["ar"].to_numpy(dtype=np.float64)
    x = DesignMatrix.build(
        {lab: usable[lab].to_numpy(dtype=np.float64) for lab in labels}, intercept=True
    )

    cluster = usable["_ticker"].to_numpy() if spec.se_type == "cluster" else None
    if spec.fe == "none":
        fit = ols_fit(x, y, se_type=spec.se_type, cluster=cluster)
        n_groups = 0
    else:
        absorbed = absorb_groups(x, y, usable["_group"].to_numpy())
        fit = ols_fit(
            absorbed.x,
            y=absorbed.y,
            se_type=spec.se_type,
            cluster=cluster,
            df_absorbed=absorbed.df_absorbed,
        )
        n_groups = absorbed.n_groups

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
    return RegressionTable(
        name=spec.name,
        rows=tuple(rows),
        n_obs=fit.n_obs,
        r_squared=fit.r_squared,
        df_resid=fit.df_resid,
        se_type=spec.se_type,
        n_groups=n_groups,
        n_entities=int(usable["_ticker"].nunique()),
        n_dropped=n_dropped,
        notes=tuple(notes),
    )


@dataclass(frozen=True)
class SensitivityBetas:
    """Per-stock slope of occupy-window AR on raw protest head counts.

    ``occupybeta_prime`` zero-fills stocks that could not be fitted, so the
    full universe stays usable as a control.
    """

    frame: pd.DataFrame  # ticker, occupybeta, fitted, occupybeta_prime

    def __post_init__(self):
        expected = ["ticker", "occupybeta", "fitted", "occupybeta_prime"]
        if list(self.frame.columns) != expected:
            raise ValueError(f"sensitivity frame must have columns {expected}")

    @property
    def n_fitted(self):
        return int(self.frame["fitted"].sum())


def occupy_sensitivity(occupy_ar: AbnormalPanel, occupy_counts, min_obs=30):
    """Per-stock OLS slope of occupy-period AR on raw daily head counts.

    Stocks without enough occupy-period data come back unfitted (never
    fatal); their zero-filled value is 0 by construction.
    """
    counts = np.asarray(occupy_counts, dtype=np.float64)
    if counts.shape[0] != len(occupy_ar.days):
        raise ValueError("occupy counts length does not match the AR grid")
    _, beta, _, _, fitted = kernels.batch_simple_ols(occupy_ar.values, counts, min_obs)
    prime = np.where(fitted, beta, 0.0)
    frame = pd.DataFrame(
        {
            "ticker": list(occupy_ar.tickers),
            "occupybeta": np.where(fitted, beta, np.nan),
            "fitted": fitted,
            "occupybeta_prime": prime,
        }
    )
    return SensitivityBetas(frame=frame)


def attach_sensitivity(frame, sens: SensitivityBetas):
    """Join the sensitivity columns onto the panel by ticker."""
    merged = frame.merge(sens.frame, on="ticker", how="left", sort=False)
    merged["occupybeta_prime"] = merged["occupybeta_prime"].fillna(0.0)
    merged["fitted"] = merged["fitted"].fillna(False).astype(bool)
    return merged


def sensitivity_models(frame, sens: SensitivityBetas, variant, split_index=None,
                       market_control="worldchange", se_type="classical"):
    """Sensitivity regressions; returns a list of tables.

    ``fitted_only`` restricts to stocks with a fitted slope and uses the raw
    ``occupybeta``; ``zero_filled`` keeps every stock with the zero-filled
    variant; both produce a level-only and a level-plus-interaction column.
    ``as_control`` re-runs every standard panel column with the zero-filled
    slope appended as a control.
    """
    if variant not in ("fitted_only", "zero_filled", "as_control"):
        raise ValueError(f"unknown sensitivity variant {variant!r}")
    merged = attach_sensitivity(frame, sens)

    if variant == "as_control":
        tables = []
        for spec in default_column_specs(market_control=market_control, se_type=se_type):
            spec_aug = PanelModelSpec(
                name=f"{spec.name}+occupybeta_prime",
                flag_levels=spec.flag_levels,
                interactions=spec.interactions,
                market_control=market_control,
                period=spec.period,
                se_type=se_type,
                extra_controls=("occupybeta_prime",),
            )
            tables.append(run_panel_model(merged, spec_aug, split_index=split_index))
        return tables

    if variant == "fitted_only":
        subset = merged[merged["fitted"]]
        column = "occupybeta"
        if len(subset) == 0:
            raise EmptyPeriod("no fitted stocks for the fitted_only variant")
    else:
        subset = merged
        column = "occupybeta_prime"

    tables = []
    for with_interaction in (False, True):
        spec = PanelModelSpec(
            name=f"{variant}:{column}" + ("+interaction" if with_interaction else ""),
            market_control=market_control,
            se_type=se_type,
            extra_controls=(column,),
            extra_interactions=(column,) if with_interaction else (),
        )
        tables.append(run_panel_model(subset, spec, split_index=split_index))
    return tables
