"""Command-line front end: gen-data, run, report.

Exit codes: 0 success, 1 validation error (bad config, missing files),
2 unexpected runtime failure.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from .config import ConfigError, RunConfig, dump_run_config, load_run_config
from .evaluation import run_repeated
from .reporting import (
    format_summary_table,
    read_summary_csv,
    write_experiment_csvs,
    write_summary_csv,
)
from .synth import generate
from .types import load_dataset, save_dataset

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="coupdate",
        description="Generate multi-modal datasets, run template co-updating "
        "experiments, and print run summaries.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen-data", help="write a synthetic dataset file")
    gen.add_argument("--config", required=True, help="flat key=value config file")
    gen.add_argument("--out", help="dataset path (default: run.dataset from the config)")
    gen.add_argument("--seed-override", type=int, help="replace data.seed")

    run = sub.add_parser("run", help="run the configured modes and write CSV reports")
    run.add_argument("--config", required=True, help="flat key=value config file")
    run.add_argument("--out", help="output directory (default: run.output_dir)")
    run.add_argument("--jobs", type=int, default=1, help="parallel repetitions (default 1)")
    run.add_argument("--seed-override", type=int, help="replace run.base_seed")

    rep = sub.add_parser("report", help="print the summary table of a finished run")
    rep.add_argument("rundir", help="directory written by the run command")
    return parser


def _load_or_generate(config: RunConfig):
    if config.dataset_path is not None:
        path = Path(config.dataset_path)
        if not path.exists():
            raise ConfigError(f"dataset not found: {path}")
        return load_dataset(path)
    if config.stream is None:
        raise ConfigError("no run.dataset path and no data.* generator section")
    return generate(config.stream)


def cmd_gen_data(args) -> int:
    config = load_run_config(args.config)
    if config.stream is None:
        raise ConfigError("gen-data needs the data.* section (at least data.n_classes)")
    stream = config.stream
    if args.seed_override is not None:
        stream = replace(stream, seed=args.seed_override)
    out = args.out or config.dataset_path
    if out is None:
        raise ConfigError("gen-data needs --out or run.dataset to name the output file")
    dataset = generate(stream)
    save_dataset(dataset, out)
    print(f"wrote {len(dataset)} sequences to {out}")
    return EXIT_OK


def cmd_run(args) -> int:
    config = load_run_config(args.config)
    if args.seed_override is not None:
        config = replace(
            config,
            base_seed=args.seed_override,
            raw={**config.raw, "run.base_seed": args.seed_override},
        )
    dataset = _load_or_generate(config)
    outdir = Path(args.out or config.output_dir)
    repeated = run_repeated(
        dataset,
        modes=config.modes,
        repetitions=config.repetitions,
        base_seed=config.base_seed,
        config=config.experiment,
        jobs=max(1, args.jobs),
    )
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / "config.txt").write_text(dump_run_config(config), encoding="utf-8")
    for mode, reports in repeated.reports.items():
        for i, report in enumerate(reports):
            write_experiment_csvs(report, outdir / mode / f"rep{i}")
    write_summary_csv(repeated, outdir / "summary.csv")
    print(format_summary_table(read_summary_csv(outdir / "summary.csv")))
    print(f"reports written to {outdir}")
    return EXIT_OK


def cmd_report(args) -> int:
    summary_path = Path(args.rundir) / "summary.csv"
    if not summary_path.exists():
        raise ConfigError(f"no summary.csv under {args.rundir}")
    print(format_summary_table(read_summary_csv(summary_path)))
    return EXIT_OK


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    handlers = {"gen-data": cmd_gen_data, "run": cmd_run, "report": cmd_report}
    try:
        return handlers[args.command](args)
    except (ConfigError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except Exception as exc:  # noqa: BLE001 - last-resort CLI boundary
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def entry_point() -> None:
    raise SystemExit(main())
