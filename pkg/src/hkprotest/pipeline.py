"""End-to-end wiring: dataset -> market models -> AR -> event/panel tables.

The CLI is a thin shell over these functions; tests drive them directly.
Per-stock and per-model work is independent, so a thread pool only changes
wall time, never results; output assembly is always in canonical order.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import pandas as pd

from . import market_model, panel as panel_mod
from .errors import DataError, EstimationError
from .event_study import (
    anchor_event,
    default_events,
    load_events,
    period_car_regressions,
    run_event_suite,
)
from .panel import (
    PanelModelSpec,
    default_column_specs,
    occupy_sensitivity,
    run_panel_model,
    sensitivity_models,
)

PRESETS = (
    "events",
    "panel-full",
    "panel-pre",
    "panel-post",
    "sensitivity",
    "robustness-shindex",
    "all",
)


@dataclass
class MarketModels:
    """Estimation-window fits and the study-window abnormal returns."""

    hkbeta: pd.DataFrame
    worldbeta: pd.DataFrame
    ar_panel: market_model.AbnormalPanel
    occupy_ar: market_model.AbnormalPanel | None


def compute_market_models(dataset, config):
    """Fit per-stock betas and build the AR grids.

    The study AR uses the configured market index (default MSCI_HK) with the
    beta from the pre-event estimation window; the occupy AR, when occupy
    data is present, uses the 2014 estimation window the same way.
    """
    est = dataset.windows["estimation"]
    study = dataset.windows["study"]
    market = est.index[config.market_index]
    if not np.isfinite(market).any():
        raise DataError(f"market index {config.market_index} has no estimation-window data")

    hkbeta = market_model.estimate_betas(
        dataset.tickers, est.returns, market, (est.days[0], est.days[-1]), min_obs=config.min_obs
    )
    worldbeta = market_model.estimate_betas(
        dataset.tickers,
        est.returns,
        est.index["MSCI_WORLD"],
        (est.days[0], est.days[-1]),
        min_obs=config.min_obs,
    )
    ar_panel = market_model.abnormal_panel(
        hkbeta,
        dataset.tickers,
        study.days,
        study.returns,
        study.index[config.market_index],
        subtract_alpha=config.subtract_alpha,
    )
    if config.winsorize_ar > 0.0:
        ar_panel = market_model.winsorize_ar(ar_panel, config.winsorize_ar)

    occupy_ar = None
    if dataset.has_occupy:
        occ_est = dataset.windows["occupy_estimation"]
        occ = dataset.windows["occupy"]
        occ_beta = market_model.estimate_betas(
            dataset.tickers,
            occ_est.returns,
            occ_est.index[config.market_index],
            (occ_est.days[0], occ_est.days[-1]),
            min_obs=config.occupy_min_obs,
        )
        occupy_ar = market_model.abnormal_panel(
            occ_beta,
            dataset.tickers,
            occ.days,
            occ.returns,
            occ.index[config.market_index],
            subtract_alpha=config.subtract_alpha,
        )
    return MarketModels(hkbeta=hkbeta, worldbeta=worldbeta, ar_panel=ar_panel, occupy_ar=occupy_ar)


def split_day_index(dataset, config):
    """Trading-day index where the post-split period starts."""
    return anchor_event(config.split_date, dataset.study_cal)


def build_study_panel(dataset, config, models):
    study = dataset.windows["study"]
    market = {
        "worldchange": study.index["MSCI_WORLD"],
        "shindex": study.index["SH_COMP"],
    }
    return panel_mod.build_panel(
        models.ar_panel,
        dataset.protest_series,
        dataset.connections,
        dataset.controls,
        market,
        dataset.industry,
    )


def event_controls(dataset, models):
    """Per-stock cross-sectional controls: worldbeta, size, leverage."""
    wb = models.worldbeta.set_index("ticker")
    controls = pd.DataFrame(index=pd.Index(dataset.tickers, name="ticker"))
    controls["worldbeta"] = wb["beta"].where(wb["fitted"]).reindex(controls.index)
    with np.errstate(invalid="ignore"):
        controls["size"] = np.nanmean(dataset.controls["size"], axis=1)
        controls["leverage"] = np.nanmean(dataset.controls["leverage"], axis=1)
    return controls


def _run_models(specs, frame, split_index, threads):
    def _one(spec):
        try:
            return run_panel_model(frame, spec, split_index=split_index)
        except EstimationError as err:
            raise EstimationError(f"model {spec.name!r}: {err}") from err

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(_one, specs))
    return [_one(spec) for spec in specs]


def run_preset(preset, dataset, config, models, frame, events=None):
    """Execute one preset; returns dict of artifact name -> object."""
    if preset == "all":
        out = {}
        for name in PRESETS[:-1]:
            if name == "sensitivity" and not dataset.has_occupy:
                out["sensitivity_skipped"] = "no occupy-window data in the returns file"
                continue
            out.update(run_preset(name, dataset, config, models, frame, events=events))
        return out

    split_index = split_day_index(dataset, config)
    se_type = config.se_type

    if preset == "events":
        event_list = events if events is not None else default_events()
        controls = event_controls(dataset, models)
        suite = run_event_suite(
            event_list,
            models.ar_panel,
            dataset.connections,
            controls,
            dataset.industry,
            dataset.study_cal,
            se_type=se_type,
        )
        periods = period_car_regressions(
            models.ar_panel,
            dataset.connections,
            controls,
            dataset.industry,
            split_index,
            se_type=se_type,
        )
        return {"event_results": suite + periods}

    if preset in ("panel-full", "panel-pre", "panel-post"):
        period = preset.split("-")[1]
        specs = default_column_specs(period=period, se_type=se_type)
        return {f"panel_{period}": _run_models(specs, frame, split_index, config.threads)}

    if preset == "robustness-shindex":
        specs = default_column_specs(period="full", market_control="shindex", se_type=se_type)
        specs = [
            PanelModelSpec(
                name=f"shindex:{s.name}",
                flag_levels=s.flag_levels,
                interactions=s.interactions,
                market_control="shindex",
                period="full",
                se_type=se_type,
            )
            for s in specs
        ]
        return {"panel_shindex": _run_models(specs, frame, split_index, config.threads)}

    if preset == "sensitivity":
        if not dataset.has_occupy or models.occupy_ar is None:
            raise DataError("sensitivity preset requires occupy-window returns and protests")
        sens = occupy_sensitivity(models.occupy_ar, dataset.occupy_counts, min_obs=config.occupy_min_obs)
        tables = []
        for variant in ("fitted_only", "zero_filled", "as_control"):
            tables.extend(
                sensitivity_models(
                    frame, sens, variant, split_index=split_index, se_type=se_type
                )
            )
        return {"panel_sensitivity": tables, "sensitivity_betas": sens}

    raise ValueError(f"unknown preset {preset!r}")


def load_event_list(paths):
    if paths.events is not None:
        return load_events(paths.events)
    return default_events()
