"""Acceptance criteria, one test per criterion, at the stated tolerances.

Each test prints a single PASS line on success; tolerances and runtime
budgets are pinned here, not deferred.  Run with ``pytest tests/test_acceptance.py -v``.
"""

import datetime as dt
import time

import numpy as np
import pandas as pd
import pytest
from scipy import stats as sps

from hkprotest import pipeline, synthkit
from hkprotest.cli import main as cli_main
from hkprotest.config import InputPaths, RunConfig
from hkprotest.core_stats import DesignMatrix, absorb_groups, ols_fit, standardize, student_t_p
from hkprotest.event_study import anchor_event
from hkprotest.ingest import TradingCalendar, load_dataset
from hkprotest.ingest.dataset import FLAG_COLUMNS
from hkprotest.ingest.protests import ProtestEvent, ProtestSeries, parse_count_phrase, resolve_event_count
from hkprotest.ingest.trading_calendar import TradingCalendar as Cal
from hkprotest.market_model import AbnormalPanel, car
from hkprotest.panel import PanelModelSpec, build_panel, occupy_sensitivity, run_panel_model, sensitivity_models
from hkprotest.synthkit import oracle_ols_inference


def _report(n, text):
    print(f"PASS criterion {n}: {text}")


@pytest.fixture(scope="module")
def small_fixture(tmp_path_factory):
    out = tmp_path_factory.mktemp("accept_small")
    synthkit.generate(synthkit.scenario_dgp("small"), 314, out)
    return out


@pytest.fixture(scope="module")
def small_run(small_fixture):
    config = RunConfig()
    dataset = load_dataset(InputPaths.from_dir(small_fixture), config)
    models = pipeline.compute_market_models(dataset, config)
    frame, recon = pipeline.build_study_panel(dataset, config, models)
    return dataset, config, models, frame, recon


def test_criterion_01_standardization_arithmetic():
    n, mean, sd_samp = 155, 51_885.0, 157_177.0
    base = np.random.default_rng(0).normal(size=n)
    base = (base - base.mean()) / base.std(ddof=1)
    series = mean + sd_samp * base
    z, stats = standardize(series, divisor="population")
    assert stats.zscore(0.0) == pytest.approx(-0.331, abs=1e-3)
    assert stats.zscore(1_170_020.0) == pytest.approx(7.137, abs=5e-3)
    assert float(z.std(ddof=1)) == pytest.approx(1.003, abs=1e-3)
    _report(1, "population-divisor z-scores reconcile the reported summary stats")


def test_criterion_02_estimate_averaging():
    event = ProtestEvent(dt.date(2019, 6, 16), police_estimate=338_000, organizer_estimate=2_000_000)
    assert resolve_event_count(event) == 1_169_000
    _report(2, "police/organizer averaging gives 1,169,000 exactly")


def test_criterion_03_phrase_table():
    assert parse_count_phrase("数以百计") == 500
    assert parse_count_phrase("数千") == 5000
    assert parse_count_phrase("过百") == 100
    assert parse_count_phrase("上千") == 1000
    _report(3, "fixed phrase table resolves all four phrases exactly")


def test_criterion_04_ols_oracle_equivalence():
    start = time.monotonic()
    rng = np.random.default_rng(4)
    for _ in range(1000):
        n = int(rng.integers(12, 201))
        k = int(rng.integers(2, 11))  # intercept + up to 9 slopes
        cols = rng.normal(size=(n, k - 1)) * 10.0 ** rng.integers(-2, 3)
        x = DesignMatrix.build({f"x{j}": cols[:, j] for j in range(k - 1)}, intercept=True)
        y = rng.normal(size=n)
        fit = ols_fit(x, y)
        beta, se, r2 = oracle_ols_inference(x.values, y, centered_r2=True)
        np.testing.assert_allclose(fit.coefficients, beta, rtol=1e-8, atol=1e-12)
        np.testing.assert_allclose(fit.standard_errors, se, rtol=1e-8)
        assert fit.r_squared == pytest.approx(r2, abs=1e-8)
    elapsed = time.monotonic() - start
    assert elapsed < 10.0, f"took {elapsed:.1f}s"
    _report(4, f"1,000 random fits match the normal-equations oracle within 1e-8 ({elapsed:.1f}s)")


def test_criterion_05_fixed_effect_absorption():
    rng = np.random.default_rng(5)
    checked = 0
    while checked < 100:
        n = int(rng.integers(30, 120))
        n_groups = int(rng.integers(2, 7))
        groups = rng.integers(0, n_groups, size=n)
        if len(np.unique(groups)) < n_groups:
            continue
        k = int(rng.integers(1, 5))
        cols = rng.normal(size=(n, k))
        y = cols @ rng.normal(size=k) + groups * 1.5 + rng.normal(size=n)
        dummies = np.column_stack([(groups == g).astype(float) for g in range(1, n_groups)])
        ref, _, _ = oracle_ols_inference(
            np.column_stack([np.ones(n), cols, dummies]), y, centered_r2=True
        )
        x = DesignMatrix.build({f"x{j}": cols[:, j] for j in range(k)})
        absorbed = absorb_groups(x, y, groups)
        fit = ols_fit(absorbed.x, absorbed.y, df_absorbed=absorbed.df_absorbed)
        np.testing.assert_allclose(fit.coefficients, ref[1 : k + 1], rtol=1e-8, atol=1e-8)
        checked += 1
    _report(5, "absorbed fixed-effect slopes equal explicit-dummy slopes on 100 instances")


def test_criterion_06_t_distribution():
    assert student_t_p(1.96, 10**6) == pytest.approx(0.05, abs=1e-3)
    assert student_t_p(1.0, 1) == pytest.approx(0.5, abs=1e-4)
    for df in (1, 2, 7, 100, 10**6):
        assert student_t_p(0.0, df) == 1.0
    _report(6, "two-sided t p-values hit the pinned reference points")


def test_criterion_07_event_anchoring():
    cal = TradingCalendar.bundled()
    study = cal.window(dt.date(2019, 6, 6), dt.date(2020, 1, 17))
    assert len(study) == 155
    idx = anchor_event(dt.date(2019, 10, 5), study)
    assert idx == 85
    assert (idx - 1, idx + 1) == (84, 86)
    _report(7, "155 study trading days; 2019-10-05 anchors at 85, +/-1 window [84,86]")


def test_criterion_08_exact_pipeline_recovery(tmp_path):
    start = time.monotonic()
    dgp = synthkit.scenario_dgp("exact")  # 2,000 stocks, all noise off
    truth = synthkit.generate(dgp, 2024, tmp_path / "exact")
    config = RunConfig()
    dataset = load_dataset(InputPaths.from_dir(tmp_path / "exact"), config)
    models = pipeline.compute_market_models(dataset, config)
    frame, _ = pipeline.build_study_panel(dataset, config, models)
    spec = PanelModelSpec(name="saturated", flag_levels=FLAG_COLUMNS, interactions=FLAG_COLUMNS)
    table = run_panel_model(frame, spec)
    assert table.row("stdprotests").estimate == pytest.approx(truth["beta_stdprotests"], abs=1e-10)
    for flag in FLAG_COLUMNS:
        assert table.row(f"stdprotests*{flag}").estimate == pytest.approx(
            truth[f"gamma_{flag}"], abs=1e-10
        )
    elapsed = time.monotonic() - start
    assert elapsed < 60.0, f"took {elapsed:.1f}s"
    _report(8, f"noise-free 2,000x155 pipeline recovers beta2 and all gammas to 1e-10 ({elapsed:.1f}s)")


def test_criterion_09_monte_carlo_inference():
    start = time.monotonic()
    n_stocks, n_days, n_reps = 800, 155, 200
    truth_beta2, truth_gamma = -0.035, 0.1

    levels = {k: 0.0 for k in FLAG_COLUMNS}
    levels.update(proestablish=0.021, pandemo=-0.037)
    gammas = {k: 0.0 for k in FLAG_COLUMNS}
    gammas.update(proestablish=-0.021, pandemo=truth_gamma)
    controls = dict(synthkit._DEFAULT_CONTROLS)
    controls.update(ar_lag1=0.0, ar_lag2=0.0)  # lags stay in the model, truth is zero
    dgp = synthkit.PlantedDGP(
        n_stocks=n_stocks, noise_sd=1.0, beta_protest=truth_beta2,
        level_coefs=levels, gamma_coefs=gammas, control_coefs=controls,
    )

    rng = np.random.default_rng(909)
    cross = synthkit.draw_cross_section(dgp, rng)
    exog = synthkit.draw_study_exogenous(dgp, rng, n_days)
    pcs = synthkit.draw_panel_controls(dgp, rng, n_days)
    eta = rng.normal(0, dgp.industry_effect_sd, dgp.n_industries)
    structural = synthkit.ar_recursion(dgp, cross, exog, pcs, eta, np.zeros((n_stocks, n_days)))

    tickers = tuple(f"T{i:04d}" for i in range(n_stocks))
    days = tuple(dt.date(2019, 6, 6) + dt.timedelta(days=i) for i in range(n_days))
    cal = Cal(days)
    series = ProtestSeries(cal, exog["counts"], exog["stdprotests"], exog["std_stats"])
    connections = pd.DataFrame(
        {k: cross[k] for k in FLAG_COLUMNS}, index=pd.Index(tickers, name="ticker"), dtype="int8"
    )
    ctl = {
        "size": np.repeat(cross["size"][:, None], n_days, 1),
        "leverage": np.repeat(cross["leverage"][:, None], n_days, 1),
        "inverse_pe": pcs["inverse_pe"],
        "turnover": pcs["turnover"],
    }
    market = {"worldchange": exog["worldchange"], "shindex": exog["shindex"]}
    industry = pd.Series([f"IND{g}" for g in cross["industry"]], index=pd.Index(tickers, name="ticker"))
    spec = PanelModelSpec(
        name="mc", flag_levels=("proestablish", "pandemo"), interactions=("proestablish", "pandemo")
    )

    covered = 0
    beta2_errors = []
    for _ in range(n_reps):
        ar = structural + rng.normal(0.0, dgp.noise_sd, (n_stocks, n_days))
        frame, _ = build_panel(
            AbnormalPanel(tickers, days, ar), series, connections, ctl, market, industry
        )
        table = run_panel_model(frame, spec)
        row = table.row("stdprotests*pandemo")
        t_crit = sps.t.ppf(0.975, table.df_resid)
        if abs(row.estimate - truth_gamma) <= t_crit * row.se:
            covered += 1
        beta2_errors.append(abs(table.row("stdprotests").estimate - truth_beta2))

    coverage = covered / n_reps
    mae = float(np.mean(beta2_errors))
    elapsed = time.monotonic() - start
    assert 0.91 <= coverage <= 0.99, f"coverage {coverage:.3f}"
    assert mae < 0.005, f"MAE {mae:.4f}"
    assert elapsed < 600.0, f"took {elapsed:.0f}s"
    _report(
        9,
        f"{n_reps} reps: 95% CI coverage of gamma {coverage:.1%}, "
        f"beta2 MAE {mae:.4f} < 0.005 ({elapsed:.0f}s)",
    )


def test_criterion_10_car_additivity_and_partition(small_run):
    dataset, config, models, frame, _ = small_run
    panel = models.ar_panel
    split = pipeline.split_day_index(dataset, config)
    assert split == 85
    for ticker in panel.tickers:
        series = panel.series(ticker)
        pre, _ = car(series, 0, split - 1)
        post, _ = car(series, split, 155)  # day-count label: clamps to the last day
        full, _ = car(series, 0, 155)
        assert pre + post == pytest.approx(full, abs=1e-10)

    full_rows = run_panel_model(frame, PanelModelSpec(name="f"), split_index=split).n_obs
    pre_rows = run_panel_model(frame, PanelModelSpec(name="p", period="pre"), split_index=split).n_obs
    post_rows = run_panel_model(frame, PanelModelSpec(name="q", period="post"), split_index=split).n_obs
    assert pre_rows + post_rows == full_rows
    _report(10, "CAR[0,84] + CAR[85,155] = CAR[0,155] per stock; panel rows partition")


def test_criterion_11_cli_determinism(small_fixture, tmp_path):
    import hashlib

    digests = []
    for name in ("d1", "d2"):
        out = tmp_path / name
        rc = cli_main([
            "run", "--preset", "all", "--data-dir", str(small_fixture),
            "--out", str(out), "--threads", "8",
        ])
        assert rc == 0
        digest = {}
        for p in sorted(out.iterdir()):
            if p.is_file():
                digest[p.name] = hashlib.sha256(p.read_bytes()).hexdigest()
        digests.append(digest)
    assert digests[0] == digests[1]
    _report(11, f"two `run all --threads 8` runs byte-identical across {len(digests[0])} files")


def test_criterion_12_occupybeta_prime_semantics(small_run):
    dataset, config, models, frame, _ = small_run
    assert models.occupy_ar is not None
    sens = occupy_sensitivity(models.occupy_ar, dataset.occupy_counts, min_obs=config.occupy_min_obs)
    unfitted = sens.frame[~sens.frame["fitted"]]
    assert len(unfitted) > 0, "fixture should include stocks without occupy data"
    assert (unfitted["occupybeta_prime"] == 0.0).all()

    # an all-zero sensitivity column must leave the base model untouched
    from hkprotest.panel import SensitivityBetas

    zeros = SensitivityBetas(
        pd.DataFrame(
            {
                "ticker": sorted(frame["ticker"].unique()),
                "occupybeta": 0.0,
                "fitted": True,
                "occupybeta_prime": 0.0,
            }
        )
    )
    from hkprotest.panel import default_column_specs

    base_tables = [run_panel_model(frame, spec) for spec in default_column_specs()]
    aug_tables = sensitivity_models(frame, zeros, "as_control")
    for base, aug in zip(base_tables, aug_tables):
        assert aug.n_obs == base.n_obs
        for row in base.rows:
            assert aug.row(row.label).estimate == pytest.approx(row.estimate, abs=1e-10)
    _report(12, "unfitted stocks carry 0; all-zero sensitivity column leaves base models unchanged")
