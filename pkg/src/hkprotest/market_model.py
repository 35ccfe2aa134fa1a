"""Market-model betas, abnormal returns and cumulative abnormal returns.

Betas come from a pre-event estimation window.  Abnormal returns follow the
working definition AR_t = R_t - beta * R_Mt, which deliberately leaves the
intercept in; ``subtract_alpha=True`` switches to the textbook variant so the
difference is visible rather than hidden.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd

from . import kernels
from .core_stats import DesignMatrix, ols_fit
from .errors import InsufficientObservations, WindowOutOfRange

DEFAULT_MIN_OBS = 60


@dataclass(frozen=True)
class MarketModelFit:
    """Per-stock market-model parameters from the estimation window."""

    ticker: str
    alpha: float  # % per day
    beta: float
    window: tuple  # (first, last) estimation dates
    n_obs: int
    r_squared: float


@dataclass(frozen=True)
class AbnormalPanel:
    """Stock x trading-day grid of abnormal returns (%), NaN where missing."""

    tickers: tuple
    days: tuple
    values: np.ndarray  # (n_tickers, n_days)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.shape != (len(self.tickers), len(self.days)):
            raise ValueError("AR grid shape does not match tickers x days")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "_row", {t: i for i, t in enumerate(self.tickers)})

    def series(self, ticker):
        return self.values[self._row[ticker]]

    def to_frame(self):
        """Long (ticker, date, ar) frame, missing days dropped."""
        s, t = np.where(np.isfinite(self.values))
        return pd.DataFrame(
            {
                "ticker": np.asarray(self.tickers, dtype=object)[s],
                "date": np.asarray(self.days, dtype=object)[t],
                "ar": self.values[s, t],
            }
        )


def estimate_beta(stock_returns, market_returns, window, ticker="", min_obs=DEFAULT_MIN_OBS):
    """Single-stock market-model fit over the estimation window.

    ``stock_returns`` and ``market_returns`` are aligned day vectors (NaN for
    non-traded days); only days where both are present enter the regression.
    Row order of the inputs is irrelevant: OLS on (market, stock) pairs is
    permutation invariant.
    """
    stock = np.asarray(stock_returns, dtype=np.float64)
    market = np.asarray(market_returns, dtype=np.float64)
    if stock.shape != market.shape:
        raise ValueError("stock and market series must be aligned")
    mask = np.isfinite(stock) & np.isfinite(market)
    n = int(mask.sum())
    if n < max(min_obs, 3):
        raise InsufficientObservations(
            f"{ticker or 'stock'}: {n} overlapping days < min_obs {min_obs}"
        )
    x = DesignMatrix.build({"market": market[mask]}, intercept=True)
    fit = ols_fit(x, stock[mask])
    return MarketModelFit(
        ticker=ticker,
        alpha=fit.coef("const"),
        beta=fit.coef("market"),
        window=window,
        n_obs=n,
        r_squared=fit.r_squared,
    )


def estimate_betas(tickers, returns, market, window, min_obs=DEFAULT_MIN_OBS):
    """Market-model fits for every stock at once.

    Returns a DataFrame (ticker, alpha, beta, n_obs, r2, fitted) in ticker
    order.  Stocks with fewer than ``min_obs`` usable days, or a degenerate
    regressor, are marked unfitted instead of raising; per-stock results are
    independent, so any parallel or batched evaluation is deterministic.
    """
    alpha, beta, n_used, r2, fitted = kernels.batch_simple_ols(returns, market, min_obs)
    return pd.DataFrame(
        {
            "ticker": list(tickers),
            "alpha": alpha,
            "beta": beta,
            "n_obs": n_used,
            "r2": r2,
            "fitted": fitted,
        }
    )


def abnormal_returns(fit, stock_returns, market_returns, subtract_alpha=False):
    """AR_t = R_t - beta * R_Mt (optionally minus alpha); NaN propagates."""
    stock = np.asarray(stock_returns, dtype=np.float64)
    market = np.asarray(market_returns, dtype=np.float64)
    ar = stock - fit.beta * market
    if subtract_alpha:
        ar = ar - fit.alpha
    return ar


def abnormal_panel(beta_frame, tickers, days, returns, market, subtract_alpha=False):
    """AR grid for all fitted stocks; unfitted stocks stay all-NaN."""
    betas = beta_frame.set_index("ticker")
    values = np.full((len(tickers), len(days)), np.nan)
    for i, ticker in enumerate(tickers):
        if ticker not in betas.index or not bool(betas.loc[ticker, "fitted"]):
            continue
        b = float(betas.loc[ticker, "beta"])
        ar = returns[i] - b * market
        if subtract_alpha:
            ar = ar - float(betas.loc[ticker, "alpha"])
        values[i] = ar
    return AbnormalPanel(tickers=tuple(tickers), days=tuple(days), values=values)


def winsorize_ar(panel, quantile=0.01):
    """Symmetric winsorization of the AR grid at the given tail quantile.

    Off by default in every pipeline; whether extreme-value handling should
    touch the abnormal returns themselves is a judgement call, so the option
    is visible and explicit.  Clips to the [q, 1-q] cross-panel quantiles,
    leaving missing cells missing.
    """
    if not 0.0 < quantile < 0.5:
        raise ValueError("quantile must be in (0, 0.5)")
    finite = panel.values[np.isfinite(panel.values)]
    if finite.size == 0:
        return panel
    lo, hi = np.quantile(finite, [quantile, 1.0 - quantile])
    clipped = np.clip(panel.values, lo, hi)
    clipped[~np.isfinite(panel.values)] = np.nan
    return AbnormalPanel(panel.tickers, panel.days, clipped)


def car(ar_series, a, b):
    """Cumulative abnormal return over the inclusive day window [a, b].

    Day indices count trading days from the window start (day 0).  Missing
    days are skipped and the count of summed days is returned alongside the
    sum.  An upper bound past the final day clamps to it (window labels in
    day-count form, e.g. [85, 155] on a 155-day window, mean "through the
    end"); a lower bound outside the data raises.
    """
    ar = np.asarray(ar_series, dtype=np.float64)
    last = ar.shape[0] - 1
    if a < 0 or a > last or b < a:
        raise WindowOutOfRange(f"window [{a}, {b}] does not fit in 0..{last}")
    b = min(b, last)
    segment = ar[a : b + 1]
    finite = segment[np.isfinite(segment)]
    return kernels.stable_sum(finite), int(finite.shape[0])


def car_cross_section(panel, a, b):
    """Per-stock CAR over [a, b] as a DataFrame (ticker, car, n_days)."""
    values = []
    for ticker in panel.tickers:
        total, n_days = car(panel.series(ticker), a, b)
        values.append((ticker, total, n_days))
    return pd.DataFrame(values, columns=["ticker", "car", "n_days"])
