"""CLI: subcommands, exit codes, manifest, determinism."""

import json
from pathlib import Path

import pytest

from hkprotest.cli import main


@pytest.fixture(scope="module")
def fixture_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("cli_fixture")
    assert main(["synth", "--scenario", "small", "--seed", "21", "--out", str(out)]) == 0
    return out


def _hash_dir(path):
    import hashlib

    out = {}
    for p in sorted(Path(path).iterdir()):
        if p.is_file():
            out[p.name] = hashlib.sha256(p.read_bytes()).hexdigest()
    return out


class TestSynth:
    def test_seed_reproducible(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        assert main(["synth", "--scenario", "small", "--seed", "5", "--out", str(a)]) == 0
        assert main(["synth", "--scenario", "small", "--seed", "5", "--out", str(b)]) == 0
        assert _hash_dir(a) == _hash_dir(b)

    def test_truth_file_written(self, fixture_dir):
        assert (fixture_dir / "truth.csv").exists()

    def test_unknown_scenario_is_usage_error(self, tmp_path):
        assert main(["synth", "--scenario", "nope", "--out", str(tmp_path)]) == 1


class TestIngest:
    def test_ok_run(self, fixture_dir, tmp_path, capsys):
        rc = main(["ingest", "--data-dir", str(fixture_dir), "--out", str(tmp_path / "o")])
        assert rc == 0
        captured = capsys.readouterr()
        assert "ingest OK" in captured.out
        report = json.loads((tmp_path / "o" / "ingest_report.json").read_text())
        assert report["stocks_in_universe"] == 40
        assert (tmp_path / "o" / "canon" / "returns.csv").exists()

    def test_missing_file_exits_2(self, tmp_path):
        assert main(["ingest", "--data-dir", str(tmp_path), "--out", str(tmp_path / "o")]) == 2

    def test_schema_violation_exits_2(self, fixture_dir, tmp_path):
        import shutil

        broken = tmp_path / "broken"
        shutil.copytree(fixture_dir, broken)
        lines = (broken / "classes.csv").read_text().splitlines()
        lines[1] = lines[1].rsplit(",", 1)[0] + ",7"
        (broken / "classes.csv").write_text("\n".join(lines) + "\n")
        assert main(["ingest", "--data-dir", str(broken), "--out", str(tmp_path / "o")]) == 2


class TestRun:
    def test_unknown_preset_is_usage_error(self, fixture_dir, tmp_path):
        rc = main(["run", "--preset", "bogus", "--data-dir", str(fixture_dir), "--out", str(tmp_path)])
        assert rc == 1

    def test_no_inputs_is_usage_level_data_error(self, tmp_path):
        rc = main(["run", "--preset", "panel-full"])
        assert rc == 2

    def test_panel_preset_outputs(self, fixture_dir, tmp_path):
        out = tmp_path / "run"
        rc = main(["run", "--preset", "panel-full", "--data-dir", str(fixture_dir), "--out", str(out)])
        assert rc == 0
        for name in ("model_results.csv", "panel_report.md", "panel.csv", "betas.csv",
                     "ar_panel.csv", "manifest.json", "ingest_report.json"):
            assert (out / name).exists(), name
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["tool"] == "hkprotest"
        assert manifest["presets"] == ["panel-full"]
        assert "returns" in manifest["inputs"]
        assert len(manifest["inputs"]["returns"]["sha256"]) == 64
        report = (out / "panel_report.md").read_text()
        assert "pval in parentheses" in report
        assert "*** p<0.01, ** p<0.05, * p<0.1" in report

    def test_events_preset_outputs(self, fixture_dir, tmp_path):
        out = tmp_path / "ev"
        rc = main(["run", "--preset", "events", "--data-dir", str(fixture_dir), "--out", str(out)])
        assert rc == 0
        assert (out / "event_results.csv").exists()
        assert (out / "events_report.md").exists()

    def test_estimation_failure_exits_3(self, fixture_dir, tmp_path, capsys):
        # every stock an H share: the H column is constant, the model cannot fit
        import shutil

        broken = tmp_path / "degenerate"
        shutil.copytree(fixture_dir, broken)
        lines = (broken / "classes.csv").read_text().splitlines()
        fixed = [lines[0]]
        for ln in lines[1:]:
            ticker, _h, red, central, _china = ln.split(",")
            fixed.append(",".join([ticker, "1", red, central, "0"]))
        (broken / "classes.csv").write_text("\n".join(fixed) + "\n")
        rc = main(["run", "--preset", "panel-full", "--data-dir", str(broken), "--out", str(tmp_path / "o")])
        assert rc == 3
        err = capsys.readouterr().err
        assert "estimation failed" in err
        assert "mainland-levels" in err  # names the model

    def test_run_all_deterministic_with_threads(self, fixture_dir, tmp_path):
        import time

        out1, out2 = tmp_path / "r1", tmp_path / "r2"
        for out in (out1, out2):
            start = time.monotonic()
            rc = main([
                "run", "--preset", "all", "--data-dir", str(fixture_dir),
                "--out", str(out), "--threads", "8",
            ])
            assert rc == 0
            assert time.monotonic() - start < 60.0
        assert _hash_dir(out1) == _hash_dir(out2)

    def test_config_file_with_overrides(self, fixture_dir, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"data_dir": str(fixture_dir), "se_type": "robust"}))
        out = tmp_path / "cfgrun"
        rc = main(["run", "--preset", "panel-full", "--config", str(cfg), "--out", str(out)])
        assert rc == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["config"]["se_type"] == "robust"

    def test_bad_config_key_rejected(self, fixture_dir, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"data_dir": str(fixture_dir), "banana": 1}))
        rc = main(["run", "--preset", "panel-full", "--config", str(cfg), "--out", str(tmp_path / "o")])
        assert rc == 2


class TestReport:
    def test_report_after_run(self, fixture_dir, tmp_path):
        out = tmp_path / "rep"
        assert main(["run", "--preset", "panel-full", "--data-dir", str(fixture_dir), "--out", str(out)]) == 0
        assert main(["report", "--data-dir", str(fixture_dir), "--out", str(out)]) == 0
        assert (out / "report.md").exists()
        series = (out / "protest_index_series.csv").read_text().splitlines()
        assert series[0] == "date,protests,stdprotests,market_return,world_return"
        assert len(series) == 156  # header + study trading days
