"""Synthetic datasets with planted coefficients, plus independent oracles.

The generator emits a complete, schema-conformant input-file set whose
data-generating constants are recorded in ``truth.csv``; with the noise
switched off the full pipeline recovers every planted coefficient to
near machine precision.  The oracles re-derive estimates through deliberately
different numerics (normal equations with full pivoting, naive loops) and
share no solver code with ``core_stats``.

Randomness: numpy PCG64, seeded explicitly; the generator name is recorded
in the truth file and in run manifests.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import pandas as pd

from .config import RunConfig
from .core_stats import standardize
from .event_study import default_events
from .ingest.dataset import FLAG_COLUMNS
from .ingest.trading_calendar import TradingCalendar

GENERATOR_NAME = "numpy-PCG64"

_DEFAULT_FLAG_PROBS = {
    "proestablish": 0.158,
    "pandemo": 0.0367,
    "H": 0.123,
    "red": 0.0806,
    "centralcontrol": 0.141,
    "chinaasset": 0.275,
}
_DEFAULT_LEVELS = {
    "proestablish": 0.021,
    "pandemo": -0.037,
    "H": -0.126,
    "red": 0.045,
    "centralcontrol": -0.029,
    "chinaasset": -0.018,
}
_DEFAULT_GAMMAS = {
    "proestablish": -0.021,
    "pandemo": -0.065,
    "H": 0.003,
    "red": -0.040,
    "centralcontrol": -0.026,
    "chinaasset": -0.044,
}
_DEFAULT_CONTROLS = {
    "worldchange": -0.156,
    "size": -0.012,
    "leverage": -0.045,
    "inverse_pe": 0.022,
    "turnover": 1.308,
    "ar_lag1": 0.05,
    "ar_lag2": 0.02,
}


@dataclass(frozen=True)
class PlantedDGP:
    """Constants of the synthetic data-generating process."""

    n_stocks: int = 200
    flag_probs: dict = field(default_factory=lambda: dict(_DEFAULT_FLAG_PROBS))
    intercept: float = 0.089
    beta_protest: float = -0.035
    level_coefs: dict = field(default_factory=lambda: dict(_DEFAULT_LEVELS))
    gamma_coefs: dict = field(default_factory=lambda: dict(_DEFAULT_GAMMAS))
    control_coefs: dict = field(default_factory=lambda: dict(_DEFAULT_CONTROLS))
    noise_sd: float = 1.0
    est_noise_sd: float = 0.5
    industry_effect_sd: float = 0.05
    n_industries: int = 8
    spike_prob: float = 0.35
    spike_log_mean: float = 9.2
    spike_log_sd: float = 1.7
    missing_frac: float = 0.0  # study stock-days knocked out of the returns file
    n_filtered_stocks: int = 0  # extra stocks that fail the listing filters
    include_occupy: bool = True
    occupy_fraction: float = 0.75
    occupy_slope_sd: float = 2e-5
    occupy_noise_sd: float = 0.0

    def __post_init__(self):
        for name, p in self.flag_probs.items():
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"flag probability {name}={p} outside [0, 1]")
        if self.noise_sd < 0:
            raise ValueError("noise_sd must be >= 0")


SCENARIOS = {
    "small": PlantedDGP(n_stocks=40, noise_sd=0.5, est_noise_sd=0.2, missing_frac=0.02, n_filtered_stocks=2),
    "paper-shaped": PlantedDGP(n_stocks=1961, noise_sd=1.0, est_noise_sd=0.5, missing_frac=0.02, n_filtered_stocks=3),
    "exact": PlantedDGP(n_stocks=2000, noise_sd=0.0, est_noise_sd=0.0, occupy_noise_sd=0.0, missing_frac=0.0),
}


def scenario_dgp(name, n_stocks=None):
    if name not in SCENARIOS:
        raise ValueError(f"unknown scenario {name!r}; choose from {sorted(SCENARIOS)}")
    dgp = SCENARIOS[name]
    if n_stocks is not None:
        dgp = replace(dgp, n_stocks=int(n_stocks))
    return dgp


# ----------------------------------------------------------------------
# in-memory draws (shared by the file generator and the Monte Carlo tests)

def draw_protest_counts(dgp, rng, n_days):
    """Zero-inflated lognormal spike train; long right tail by design."""
    spikes = rng.random(n_days) < dgp.spike_prob
    sizes = np.round(rng.lognormal(dgp.spike_log_mean, dgp.spike_log_sd, n_days)).astype(np.int64)
    counts = np.where(spikes, sizes, 0).astype(np.int64)
    if counts.max() == counts.min():  # vanishing chance; keep standardize well-posed
        counts[0] += 100_000
    return counts


def draw_cross_section(dgp, rng):
    """Per-stock flags, industry, controls and true market betas."""
    n = dgp.n_stocks
    out = {}
    p = dgp.flag_probs
    out["proestablish"] = (rng.random(n) < p["proestablish"]).astype(np.int8)
    out["pandemo"] = (rng.random(n) < p["pandemo"]).astype(np.int8)
    out["H"] = (rng.random(n) < p["H"]).astype(np.int8)
    # chinaasset is defined among non-H stocks; keep the marginal on target
    cond = min(1.0, p["chinaasset"] / max(1e-12, 1.0 - p["H"]))
    out["chinaasset"] = ((rng.random(n) < cond) & (out["H"] == 0)).astype(np.int8)
    out["red"] = (rng.random(n) < p["red"]).astype(np.int8)
    out["centralcontrol"] = (rng.random(n) < p["centralcontrol"]).astype(np.int8)
    # a flag with positive probability must be estimable even in tiny draws
    for name in FLAG_COLUMNS:
        if p[name] > 0.0 and out[name].sum() == 0:
            free = np.flatnonzero(out["H" if name == "chinaasset" else "chinaasset"] == 0)
            pick = int(free[int(rng.integers(0, len(free)))]) if name in ("H", "chinaasset") else int(rng.integers(0, n))
            out[name][pick] = 1
    out["industry"] = rng.integers(0, dgp.n_industries, n)
    out["size"] = rng.normal(21.9, 2.36, n)
    out["leverage"] = rng.uniform(0.0004, 1.0, n)
    out["hkbeta_true"] = rng.normal(1.0, 0.3, n)
    out["alpha_true"] = rng.normal(0.0, 0.05, n)
    return out


def draw_study_exogenous(dgp, rng, n_days):
    """Time-varying pieces of the study window."""
    counts = draw_protest_counts(dgp, rng, n_days)
    z, stats = standardize(counts, divisor="population")
    return {
        "counts": counts,
        "stdprotests": z,
        "std_stats": stats,
        "hk_market": rng.normal(0.03, 1.15, n_days),
        "worldchange": rng.normal(0.09, 0.59, n_days),
        "shindex": rng.normal(0.03, 0.8, n_days),
    }


def draw_panel_controls(dgp, rng, n_days):
    n = dgp.n_stocks
    return {
        "inverse_pe": rng.normal(-0.149, 1.0, (n, n_days)),
        "turnover": rng.uniform(0.0, 0.3, (n, n_days)),
    }


def ar_recursion(dgp, cross, exog, panel_controls, industry_effects, noise):
    """Planted abnormal returns, generated sequentially so the lag terms are
    exactly the model's own lags."""
    n, n_days = noise.shape
    z = exog["stdprotests"]
    wc = exog["worldchange"]
    cc = dgp.control_coefs
    base = np.full(n, dgp.intercept)
    for flag, coef in dgp.level_coefs.items():
        base += coef * cross[flag]
    base += cc["size"] * cross["size"] + cc["leverage"] * cross["leverage"]
    base += industry_effects[cross["industry"]]
    gamma_load = np.zeros(n)
    for flag, coef in dgp.gamma_coefs.items():
        gamma_load += coef * cross[flag]

    ar = np.zeros((n, n_days))
    for t in range(n_days):
        value = base + dgp.beta_protest * z[t] + gamma_load * z[t] + cc["worldchange"] * wc[t]
        value = value + cc["inverse_pe"] * panel_controls["inverse_pe"][:, t]
        value = value + cc["turnover"] * panel_controls["turnover"][:, t]
        if t >= 1:
            value = value + cc["ar_lag1"] * ar[:, t - 1]
        if t >= 2:
            value = value + cc["ar_lag2"] * ar[:, t - 2]
        ar[:, t] = value + noise[:, t]
    return ar


def truth_record(dgp, seed):
    truth = {
        "generator": GENERATOR_NAME,
        "seed": seed,
        "n_stocks": dgp.n_stocks,
        "intercept": dgp.intercept,
        "beta_stdprotests": dgp.beta_protest,
        "noise_sd": dgp.noise_sd,
        "est_noise_sd": dgp.est_noise_sd,
    }
    for flag, v in dgp.level_coefs.items():
        truth[f"level_{flag}"] = v
    for flag, v in dgp.gamma_coefs.items():
        truth[f"gamma_{flag}"] = v
    for name, v in dgp.control_coefs.items():
        truth[f"control_{name}"] = v
    for name, v in dgp.flag_probs.items():
        truth[f"prob_{name}"] = v
    return truth


# ----------------------------------------------------------------------
# file generator

def _protest_events_for(counts, cal, rng, phrase_days):
    """Event rows whose resolution and roll-forward reproduce ``counts``."""
    rows = []
    dates = cal.dates
    for t, c in enumerate(counts):
        c = int(c)
        if c == 0:
            continue
        # place some events on non-trading days inside the preceding gap
        day = dates[t]
        if t > 0:
            prev = dates[t - 1]
            gap = (day - prev).days
            if gap > 1 and rng.random() < 0.3:
                day = prev + dt.timedelta(days=int(rng.integers(1, gap)))
        if t in phrase_days:
            rows.append((day, phrase_days[t], "", ""))
            continue
        pieces = [c]
        if c > 1 and rng.random() < 0.2:  # same-day multi-venue split
            cut = int(rng.integers(1, c))
            pieces = [cut, c - cut]
        for piece in pieces:
            style = rng.random()
            if style < 0.5 and piece > 0:
                d = int(rng.integers(0, piece + 1))
                rows.append((day, "", str(piece - d), str(piece + d)))
            elif style < 0.8:
                rows.append((day, "", str(piece), ""))
            else:
                rows.append((day, str(piece), "", ""))
    return rows


def generate(dgp, seed, out_dir):
    """Write a full synthetic input-file set plus ``truth.csv``.

    Same seed, same bytes: every draw comes from one seeded PCG64 stream and
    files are written in a fixed order with round-trip float formatting.
    """
    rng = np.random.default_rng(np.random.PCG64(seed))
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg = RunConfig()
    cal = TradingCalendar.bundled()
    study = cal.window(cfg.study_start, cfg.study_end)
    est = cal.window(cfg.estimation_start, cfg.estimation_end)
    n_days = len(study)
    n_est = len(est)
    n = dgp.n_stocks

    tickers = [f"{i:04d}" for i in range(1, n + 1)]
    cross = draw_cross_section(dgp, rng)
    exog = draw_study_exogenous(dgp, rng, n_days)
    panel_controls = draw_panel_controls(dgp, rng, n_days)
    industry_effects = rng.normal(0.0, dgp.industry_effect_sd, dgp.n_industries)
    world_est = rng.normal(0.09, 0.59, n_est)

    # a few quiet days get fixed phrase-table counts before anything depends
    # on the standardized series
    phrase_days = {}
    counts = exog["counts"].copy()
    quiet = [t for t in range(2, n_days - 1) if counts[t] == 0][:4]
    for t, (phrase, value) in zip(quiet, [("数以百计", 500), ("数千", 5000), ("过百", 100), ("上千", 1000)]):
        counts[t] = value
        phrase_days[t] = phrase
    z, std_stats = standardize(counts, divisor="population")
    exog = dict(exog, counts=counts, stdprotests=z, std_stats=std_stats)

    noise = (
        rng.normal(0.0, dgp.noise_sd, (n, n_days))
        if dgp.noise_sd > 0
        else np.zeros((n, n_days))
    )
    ar = ar_recursion(dgp, cross, exog, panel_controls, industry_effects, noise)
    returns_study = cross["hkbeta_true"][:, None] * exog["hk_market"][None, :] + ar

    est_noise = (
        rng.normal(0.0, dgp.est_noise_sd, (n, n_est))
        if dgp.est_noise_sd > 0
        else np.zeros((n, n_est))
    )
    hk_est = rng.normal(0.03, 1.15, n_est)
    returns_est = (
        cross["alpha_true"][:, None]
        + cross["hkbeta_true"][:, None] * hk_est[None, :]
        + est_noise
    )

    # returns long frame; optional knockouts never touch the window edges
    # (first/last day define the listing filter)
    frames = []
    est_dates = [d.isoformat() for d in est.dates]
    study_dates = [d.isoformat() for d in study.dates]

    occupy_mask = np.zeros(n, dtype=bool)
    occupy_truth_rows = []
    if dgp.include_occupy:
        occupy_mask = rng.random(n) < dgp.occupy_fraction
        occ_est = cal.window(cfg.occupy_est_start, cfg.occupy_est_end)
        occ = cal.window(cfg.occupy_start, cfg.occupy_end)
        occ_counts = draw_protest_counts(dgp, rng, len(occ))
        occ_hk_est = rng.normal(0.03, 1.0, len(occ_est))
        occ_hk = rng.normal(0.03, 1.0, len(occ))
        occ_slope = rng.normal(0.0, dgp.occupy_slope_sd, n)
        occ_noise = (
            rng.normal(0.0, dgp.occupy_noise_sd, (n, len(occ)))
            if dgp.occupy_noise_sd > 0
            else np.zeros((n, len(occ)))
        )
        r_occ_est = (
            cross["alpha_true"][:, None]
            + cross["hkbeta_true"][:, None] * occ_hk_est[None, :]
        )
        r_occ = (
            cross["hkbeta_true"][:, None] * occ_hk[None, :]
            + occ_slope[:, None] * occ_counts[None, :].astype(np.float64)
            + occ_noise
        )
        for i, ticker in enumerate(tickers):
            if occupy_mask[i]:
                occupy_truth_rows.append((ticker, occ_slope[i]))

    keep_study = np.ones((n, n_days), dtype=bool)
    if dgp.missing_frac > 0:
        keep_study = rng.random((n, n_days)) > dgp.missing_frac
        keep_study[:, 0] = True
        keep_study[:, -1] = True

    for i, ticker in enumerate(tickers):
        if dgp.include_occupy and occupy_mask[i]:
            frames.append(
                pd.DataFrame(
                    {
                        "ticker": ticker,
                        "date": [d.isoformat() for d in occ_est.dates],
                        "return_pct": r_occ_est[i],
                    }
                )
            )
            frames.append(
                pd.DataFrame(
                    {"ticker": ticker, "date": [d.isoformat() for d in occ.dates], "return_pct": r_occ[i]}
                )
            )
        frames.append(pd.DataFrame({"ticker": ticker, "date": est_dates, "return_pct": returns_est[i]}))
        mask = keep_study[i]
        frames.append(
            pd.DataFrame(
                {
                    "ticker": ticker,
                    "date": [d for d, k in zip(study_dates, mask) if k],
                    "return_pct": returns_study[i][mask],
                }
            )
        )

    # stocks that must fail the listing/delisting filters
    for j in range(dgp.n_filtered_stocks):
        ticker = f"X{j:03d}"
        if j % 2 == 0:  # listed too late
            late_days = study_dates[10:60]
            frames.append(
                pd.DataFrame(
                    {"ticker": ticker, "date": late_days, "return_pct": rng.normal(0, 1, len(late_days))}
                )
            )
        else:  # delisted before the window end
            early = est_dates + study_dates[:50]
            frames.append(
                pd.DataFrame({"ticker": ticker, "date": early, "return_pct": rng.normal(0, 1, len(early))})
            )
    returns_long = pd.concat(frames, ignore_index=True)
    returns_long = returns_long.sort_values(["ticker", "date"], kind="mergesort")
    returns_long.to_csv(out / "returns.csv", index=False)

    # index file
    idx_rows = []
    for d, v in zip(est_dates, hk_est):
        idx_rows.append((d, "MSCI_HK", v))
    for d, v in zip(est_dates, world_est):
        idx_rows.append((d, "MSCI_WORLD", v))
    for d, v in zip(study_dates, exog["hk_market"]):
        idx_rows.append((d, "MSCI_HK", v))
    for d, v in zip(study_dates, exog["worldchange"]):
        idx_rows.append((d, "MSCI_WORLD", v))
    for d, v in zip(study_dates, exog["shindex"]):
        idx_rows.append((d, "SH_COMP", v))
    if dgp.include_occupy:
        for d, v in zip([x.isoformat() for x in occ_est.dates], occ_hk_est):
            idx_rows.append((d, "MSCI_HK", v))
        for d, v in zip([x.isoformat() for x in occ.dates], occ_hk):
            idx_rows.append((d, "MSCI_HK", v))
    pd.DataFrame(idx_rows, columns=["date", "series", "return_pct"]).to_csv(out / "index.csv", index=False)

    # controls: size/leverage repeat per day, inverse_pe/turnover vary
    ctl = pd.DataFrame(
        {
            "ticker": np.repeat(tickers, n_days),
            "date": np.tile(study_dates, n),
            "size": np.repeat(cross["size"], n_days),
            "leverage": np.repeat(cross["leverage"], n_days),
            "inverse_pe": panel_controls["inverse_pe"].ravel(),
            "turnover": panel_controls["turnover"].ravel(),
        }
    )
    ctl.to_csv(out / "controls.csv", index=False)

    # protest events whose resolution reproduces the planted counts
    event_rows = _protest_events_for(counts, study, rng, phrase_days)
    if dgp.include_occupy:
        event_rows += _protest_events_for(occ_counts, occ, rng, {})
    ev = pd.DataFrame(event_rows, columns=["date", "raw_count", "police_estimate", "organizer_estimate"])
    ev = ev.sort_values(["date"], kind="mergesort")
    ev["date"] = [d.isoformat() for d in ev["date"]]
    ev.to_csv(out / "protests.csv", index=False)

    # roster and officers: planted exact-name matches
    roster_rows = []
    est_names = [f"est member {i:02d}" for i in range(30)]
    pan_names = [f"pan member {i:02d}" for i in range(30)]
    bodies = ["EC2016", "LegCo2016", "DC2019"]
    for i, name in enumerate(est_names):
        roster_rows.append((name, bodies[i % 3], "EST"))
    for i, name in enumerate(pan_names):
        roster_rows.append((name, bodies[i % 3], "PAN"))
    # a duplicated cross-body membership, deduplicated downstream
    roster_rows.append((est_names[0], bodies[1], "EST"))
    pd.DataFrame(roster_rows, columns=["name", "body", "camp"]).to_csv(out / "roster.csv", index=False)

    officer_rows = []
    for i, ticker in enumerate(tickers):
        officer_rows.append((ticker, f"plain officer {i:04d}"))
        if cross["proestablish"][i]:
            officer_rows.append((ticker, est_names[int(rng.integers(0, len(est_names)))]))
        if cross["pandemo"][i]:
            officer_rows.append((ticker, pan_names[int(rng.integers(0, len(pan_names)))]))
    pd.DataFrame(officer_rows, columns=["ticker", "officer_name"]).to_csv(out / "officers.csv", index=False)

    cls = pd.DataFrame(
        {
            "ticker": tickers,
            "H": cross["H"],
            "red": cross["red"],
            "centralcontrol": cross["centralcontrol"],
            "chinaasset": cross["chinaasset"],
        }
    )
    cls.to_csv(out / "classes.csv", index=False)

    pd.DataFrame(
        {"ticker": tickers, "industry": [f"IND{g}" for g in cross["industry"]]}
    ).to_csv(out / "industry.csv", index=False)

    with open(out / "calendar.csv", "w", encoding="utf-8") as fh:
        fh.write("date\n")
        for day in cal.dates:
            fh.write(day.isoformat() + "\n")

    events = default_events()
    with open(out / "events.csv", "w", encoding="utf-8") as fh:
        fh.write("name,date,halfwidths\n")
        for e in events:
            fh.write(f"{e.name},{e.date.isoformat()},{';'.join(str(h) for h in e.halfwidths)}\n")

    truth = truth_record(dgp, seed)
    truth["protest_mean"] = exog["std_stats"].mean
    truth["protest_sd_population"] = exog["std_stats"].sd_population
    with open(out / "truth.csv", "w", encoding="utf-8") as fh:
        fh.write("name,value\n")
        for key in truth:
            fh.write(f"{key},{truth[key]}\n")
        for ticker, slope in occupy_truth_rows:
            fh.write(f"occupybeta_{ticker},{slope!r}\n")
    return truth


# ----------------------------------------------------------------------
# oracles

def _gauss_jordan_full_pivot(a, rhs, n_for_tol):
    """Reduce ``a`` to diagonal with full pivoting; solves a @ x = rhs.

    ``rhs`` may have several columns.  Returns the solution with the column
    permutation undone.
    """
    k = a.shape[0]
    a = a.copy()
    rhs = rhs.copy()
    col_order = list(range(k))
    scale = np.abs(a).max() if k else 0.0
    tol = max(n_for_tol, k) * np.finfo(np.float64).eps * max(scale, 1e-300) * 8.0

    for step in range(k):
        sub = np.abs(a[step:, step:])
        flat = int(np.argmax(sub))
        i_rel, j_rel = divmod(flat, k - step)
        if sub[i_rel, j_rel] <= tol:
            raise np.linalg.LinAlgError("singular normal equations (collinear columns)")
        i_abs, j_abs = step + i_rel, step + j_rel
        if i_abs != step:
            a[[step, i_abs]] = a[[i_abs, step]]
            rhs[[step, i_abs]] = rhs[[i_abs, step]]
        if j_abs != step:
            a[:, [step, j_abs]] = a[:, [j_abs, step]]
            col_order[step], col_order[j_abs] = col_order[j_abs], col_order[step]
        pivot = a[step, step]
        for r in range(k):
            if r == step:
                continue
            factor = a[r, step] / pivot
            if factor != 0.0:
                a[r, :] -= factor * a[step, :]
                rhs[r] -= factor * rhs[step]

    solution = np.empty_like(rhs)
    for i in range(k):
        solution[col_order[i]] = rhs[i] / a[i, i]
    return solution, col_order


def oracle_ols(X, y):
    """Normal-equations solve with full pivoting; independent of core_stats.

    Small instances only (n <= 500, k <= 20).  Raises
    ``numpy.linalg.LinAlgError`` on a singular cross-product matrix, e.g. a
    duplicated column.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n, k = X.shape
    if n > 500 or k > 20:
        raise ValueError("oracle_ols is for small instances (n <= 500, k <= 20)")
    beta, _ = _gauss_jordan_full_pivot(X.T @ X, (X.T @ y).reshape(-1, 1), n)
    return beta[:, 0]


def oracle_ols_inference(X, y, centered_r2=True):
    """Coefficients, classical SEs and R-squared via the normal equations.

    The (X'X)^{-1} needed for the standard errors comes from the same
    full-pivot elimination, solving against the identity; nothing is shared
    with the QR path in core_stats.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n, k = X.shape
    if n > 500 or k > 20:
        raise ValueError("oracle instances must be small (n <= 500, k <= 20)")
    xtx = X.T @ X
    rhs = np.column_stack([X.T @ y, np.eye(k)])
    solution, _ = _gauss_jordan_full_pivot(xtx, rhs, n)
    beta = solution[:, 0]
    xtx_inv = solution[:, 1:]
    resid = y - X @ beta
    rss = float(resid @ resid)
    sigma2 = rss / (n - k)
    se = np.sqrt(np.clip(sigma2 * np.diag(xtx_inv), 0.0, None))
    if centered_r2:
        dev = y - y.mean()
        tss = float(dev @ dev)
    else:
        tss = float(y @ y)
    r2 = 1.0 - rss / tss if tss > 0 else 1.0
    return beta, se, r2


def oracle_event_pipeline(tiny):
    """Straight-line loop reimplementation of the event pipeline.

    Input: dict with ``est_market``, ``study_market`` (lists), ``est_returns``
    and ``study_returns`` (ticker -> list, None for missing), ``window``
    (a, b), and optionally ``flags`` / ``controls`` / ``industry`` per ticker
    for the cross-sectional regression.  Meant for <= 5 stocks x <= 20 days.
    """
    est_m = tiny["est_market"]
    study_m = tiny["study_market"]
    betas = {}
    alphas = {}
    for ticker, series in sorted(tiny["est_returns"].items()):
        xs, ys = [], []
        for r, m in zip(series, est_m):
            if r is None or m is None:
                continue
            xs.append(m)
            ys.append(r)
        n = len(xs)
        mx = sum(xs) / n
        my = sum(ys) / n
        sxx = sum((v - mx) ** 2 for v in xs)
        sxy = sum((xv - mx) * (yv - my) for xv, yv in zip(xs, ys))
        beta = sxy / sxx
        betas[ticker] = beta
        alphas[ticker] = my - beta * mx

    ar = {}
    for ticker, series in sorted(tiny["study_returns"].items()):
        row = []
        for r, m in zip(series, study_m):
            if r is None or m is None:
                row.append(None)
            else:
                row.append(r - betas[ticker] * m)
        ar[ticker] = row

    a, b = tiny["window"]
    car = {}
    for ticker, row in ar.items():
        total = 0.0
        for t in range(a, min(b, len(row) - 1) + 1):
            if row[t] is not None:
                total += row[t]
        car[ticker] = total

    coefs = None
    if "flags" in tiny:
        tickers = sorted(car)
        flag_names = sorted(next(iter(tiny["flags"].values())))
        control_names = sorted(next(iter(tiny["controls"].values()))) if "controls" in tiny else []
        industries = sorted({tiny["industry"][t] for t in tickers}) if "industry" in tiny else []
        columns = []
        labels = []
        columns.append([1.0] * len(tickers))
        labels.append("const")
        for name in flag_names:
            columns.append([float(tiny["flags"][t][name]) for t in tickers])
            labels.append(name)
        for name in control_names:
            columns.append([float(tiny["controls"][t][name]) for t in tickers])
            labels.append(name)
        for ind in industries[1:]:  # first industry is the baseline
            columns.append([1.0 if tiny["industry"][t] == ind else 0.0 for t in tickers])
            labels.append(f"industry:{ind}")
        X = np.array(columns).T
        y = np.array([car[t] for t in tickers])
        beta = oracle_ols(X, y)
        coefs = dict(zip(labels, beta))

    return {"betas": betas, "alphas": alphas, "ar": ar, "car": car, "coefs": coefs}
