"""Command-line entry point: ingest, run, synth, report.

Exit codes: 0 success, 1 usage, 2 data problem, 3 estimation failure.
Every run writes a manifest recording the config hash, input hashes, kernel
backend and tool version, so identical configuration and inputs give
byte-identical outputs.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

import pandas as pd

from . import __version__, kernels, pipeline, synthkit
from .config import InputPaths, RunConfig
from .errors import DataError, EstimationError, HkprotestError
from .ingest import emit_canonical, load_dataset
from .tables import render_report, write_results_csv

_CONFIG_PATH_KEYS = (
    "protests",
    "roster",
    "officers",
    "classes",
    "returns",
    "index",
    "controls",
    "industry",
    "calendar",
    "events",
)


class _Parser(argparse.ArgumentParser):
    """argparse with the package's exit-code contract (usage errors -> 1)."""

    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(1)


def _sha256(path):
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _load_config(args):
    """Merge the declarative config file with CLI flag overrides."""
    raw = {}
    if getattr(args, "config", None):
        with open(args.config, encoding="utf-8") as fh:
            raw = json.load(fh)
    data_dir = getattr(args, "data_dir", None) or raw.get("data_dir")
    out_dir = getattr(args, "out", None) or raw.get("out_dir") or "out"

    path_overrides = raw.get("paths", {})
    if data_dir is None and not path_overrides:
        raise DataError("no input location: pass --data-dir or a config with data_dir/paths")
    if data_dir is not None:
        paths = InputPaths.from_dir(data_dir)
        if path_overrides:
            merged = {k: getattr(paths, k) for k in _CONFIG_PATH_KEYS}
            merged.update({k: Path(v) for k, v in path_overrides.items()})
            paths = InputPaths(**merged)
    else:
        missing = [k for k in _CONFIG_PATH_KEYS[:8] if k not in path_overrides]
        if missing:
            raise DataError(f"config paths missing required file(s): {', '.join(missing)}")
        full = {k: Path(v) for k, v in path_overrides.items()}
        for opt in ("calendar", "events"):
            full.setdefault(opt, None)
        paths = InputPaths(**full)

    options = {k: v for k, v in raw.items() if k not in ("data_dir", "out_dir", "paths")}
    for flag in ("se_type", "threads", "seed"):
        value = getattr(args, flag.replace("-", "_"), None)
        if value is not None:
            options[flag] = value
    try:
        config = RunConfig.from_dict(options)
    except (ValueError, TypeError) as err:
        raise DataError(f"bad config: {err}") from None
    return paths, config, Path(out_dir)


def _write_json(path, payload):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")


def _manifest(paths, config, presets, outputs, models):
    inputs = {}
    for key in _CONFIG_PATH_KEYS:
        p = getattr(paths, key)
        if p is not None and Path(p).exists():
            inputs[key] = {"file": Path(p).name, "sha256": _sha256(p)}
    config_json = config.to_json()
    return {
        "tool": "hkprotest",
        "version": __version__,
        "kernel_backend": kernels.BACKEND,
        "rng": synthkit.GENERATOR_NAME,
        "config": config.to_dict(),
        "config_sha256": hashlib.sha256(config_json.encode()).hexdigest(),
        "inputs": inputs,
        "presets": list(presets),
        "models": sorted(models),  # every result row's `model` column points here
        "outputs": sorted(outputs),
    }


def cmd_ingest(args):
    paths, config, out_dir = _load_config(args)
    dataset = load_dataset(paths, config)
    out_dir.mkdir(parents=True, exist_ok=True)
    canon = emit_canonical(dataset, out_dir / "canon")
    _write_json(out_dir / "ingest_report.json", dataset.report)
    print(f"ingest OK: {dataset.report['stocks_in_universe']} stocks, "
          f"{dataset.report['study_trading_days']} study trading days")
    for key in ("dropped_listed_after_cutoff", "dropped_delisted_early",
                "dropped_leverage_rows", "dropped_turnover_values"):
        print(f"  {key}: {dataset.report[key]}")
    print(f"  flag counts: {dataset.report['flag_counts']}")
    print(f"canonical dataset: {canon}")
    return 0


def _flatten_event_results(results):
    return [r.table for r in results]


def cmd_run(args):
    paths, config, out_dir = _load_config(args)
    presets = [args.preset]
    dataset = load_dataset(paths, config)
    models = pipeline.compute_market_models(dataset, config)
    frame, reconciliation = pipeline.build_study_panel(dataset, config, models)
    events = pipeline.load_event_list(paths)

    artifacts = pipeline.run_preset(args.preset, dataset, config, models, frame, events=events)

    out_dir.mkdir(parents=True, exist_ok=True)
    outputs = []
    model_names = []

    def _save_csv(name, writer):
        writer(out_dir / name)
        outputs.append(name)

    # market-model surfaces are part of every run
    betas = models.hkbeta.loc[models.hkbeta["fitted"], ["ticker", "alpha", "beta", "n_obs", "r2"]]
    _save_csv("betas.csv", lambda p: betas.to_csv(p, index=False))
    _save_csv("ar_panel.csv", lambda p: models.ar_panel.to_frame().to_csv(p, index=False))

    panel_tables = []
    for key in sorted(artifacts):
        value = artifacts[key]
        if key == "event_results":
            tables = _flatten_event_results(value)
            model_names += [t.name for t in tables]
            _save_csv("event_results.csv", lambda p: write_results_csv(p, tables))
            with open(out_dir / "events_report.md", "w", encoding="utf-8") as fh:
                fh.write(render_report("Event-study regressions", tables))
            outputs.append("events_report.md")
        elif key.startswith("panel_"):
            panel_tables.extend(value)
        elif key == "sensitivity_betas":
            _save_csv("sensitivity_betas.csv", lambda p: value.frame.to_csv(p, index=False))
        elif key == "sensitivity_skipped":
            print(f"note: sensitivity skipped: {value}")

    if panel_tables:
        model_names += [t.name for t in panel_tables]
        _save_csv("model_results.csv", lambda p: write_results_csv(p, panel_tables))
        doc = render_report("Panel regressions", panel_tables)
        doc += (
            "\nLagged abnormal returns enter as regressors in a pooled OLS; with the"
            "\nshort per-stock time dimension this carries the usual dynamic-panel"
            "\nbias, reproduced as specified rather than corrected.\n"
        )
        with open(out_dir / "panel_report.md", "w", encoding="utf-8") as fh:
            fh.write(doc)
        outputs.append("panel_report.md")
        _save_csv("panel.csv", lambda p: frame.to_csv(p, index=False))

    _write_json(out_dir / "ingest_report.json", {**dataset.report, "panel": reconciliation})
    outputs.append("ingest_report.json")
    _write_json(out_dir / "manifest.json", _manifest(paths, config, presets, outputs, model_names))
    print(f"run {args.preset!r} complete: {len(outputs)} artifact(s) in {out_dir}")
    return 0


def cmd_synth(args):
    dgp = synthkit.scenario_dgp(args.scenario, n_stocks=args.stocks)
    out = Path(args.out)
    truth = synthkit.generate(dgp, args.seed, out)
    print(f"synthetic dataset ({args.scenario}, seed {args.seed}) in {out}")
    print(f"  stocks: {dgp.n_stocks}, noise sd: {dgp.noise_sd}")
    print(f"  truth file: {out / 'truth.csv'} ({len(truth)} planted constants)")
    return 0


def cmd_report(args):
    paths, config, out_dir = _load_config(args)
    dataset = load_dataset(paths, config)
    study = dataset.windows["study"]
    series = pd.DataFrame(
        {
            "date": [d.isoformat() for d in study.days],
            "protests": dataset.protest_series.counts,
            "stdprotests": dataset.protest_series.stdprotests,
            "market_return": study.index[config.market_index],
            "world_return": study.index["MSCI_WORLD"],
        }
    )
    out_dir.mkdir(parents=True, exist_ok=True)
    series.to_csv(out_dir / "protest_index_series.csv", index=False)

    lines = ["# Run report", ""]
    lines.append(f"- universe: {dataset.report['stocks_in_universe']} stocks")
    lines.append(f"- study trading days: {dataset.report['study_trading_days']}")
    lines.append(f"- protest events in window: {dataset.report['protest_events_in_study_window']}")
    lines.append(f"- flag counts: {dataset.report['flag_counts']}")
    stats = dataset.protest_series.stats
    lines.append(
        f"- protest series: mean {stats.mean:.0f}, sd (sample) {stats.sd_sample:.0f}, "
        f"max z {dataset.protest_series.stdprotests.max():.3f}"
    )
    lines.append("")
    for name in ("event_results.csv", "model_results.csv"):
        path = out_dir / name
        if path.exists():
            n = max(0, sum(1 for _ in open(path, encoding="utf-8")) - 1)
            lines.append(f"- {name}: {n} coefficient rows")
    lines.append("")
    with open(out_dir / "report.md", "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines))
    print(f"report written to {out_dir / 'report.md'}")
    return 0


def build_parser():
    parser = _Parser(prog="hkprotest", description=__doc__)
    parser.add_argument("--version", action="version", version=f"hkprotest {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="declarative JSON config file")
    common.add_argument("--data-dir", help="directory holding the input CSVs")
    common.add_argument("--out", help="output directory (default: out)")

    p_ingest = sub.add_parser("ingest", parents=[common], help="validate inputs, emit canonical dataset")
    p_ingest.set_defaults(func=cmd_ingest)

    p_run = sub.add_parser("run", parents=[common], help="run an analysis preset")
    p_run.add_argument("--preset", default="all", choices=pipeline.PRESETS)
    p_run.add_argument("--se-type", dest="se_type", choices=("classical", "robust", "cluster"))
    p_run.add_argument("--threads", type=int)
    p_run.add_argument("--seed", type=int)
    p_run.set_defaults(func=cmd_run)

    p_synth = sub.add_parser("synth", help="generate a synthetic dataset with planted truths")
    p_synth.add_argument("--scenario", default="small", choices=sorted(synthkit.SCENARIOS))
    p_synth.add_argument("--seed", type=int, default=42)
    p_synth.add_argument("--stocks", type=int, default=None, help="override the scenario stock count")
    p_synth.add_argument("--out", required=True)
    p_synth.set_defaults(func=cmd_synth)

    p_report = sub.add_parser("report", parents=[common], help="summarize a finished run")
    p_report.set_defaults(func=cmd_report)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except SystemExit as err:
        return err.code if isinstance(err.code, int) else 1
    except DataError as err:
        print(f"data error: {err}", file=sys.stderr)
        return 2
    except EstimationError as err:
        print(f"estimation failed: {err}", file=sys.stderr)
        return 3
    except HkprotestError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except FileNotFoundError as err:
        print(f"data error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
