"""CSV emission for experiment reports and the run summary table.

All floats are written with repr, so equal runs produce byte-identical
files and parsing a report back recovers the exact values.
"""

from __future__ import annotations

import csv
from pathlib import Path

from .evaluation import ExperimentReport, RepeatedReport

SUMMARY_COLUMNS = [
    "mode",
    "channel",
    "initial_precision",
    "initial_recall",
    "final_precision",
    "final_recall",
    "initial_precision_std",
    "initial_recall_std",
    "final_precision_std",
    "final_recall_std",
]


def _write_rows(path: Path, rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as fh:
        csv.writer(fh).writerows(rows)


def write_experiment_csvs(report: ExperimentReport, outdir) -> None:
    """Confusion matrices, per-class metrics, trend and events for one run."""
    outdir = Path(outdir)
    named = [(name, report.initial.confusions[name], report.final.confusions[name])
             for name in report.channel_names]
    named.append(("fused", report.initial.fused_confusion, report.final.fused_confusion))
    for name, initial, final in named:
        _write_rows(outdir / f"confusion_initial_{name}.csv", [[str(v) for v in row] for row in initial])
        _write_rows(outdir / f"confusion_final_{name}.csv", [[str(v) for v in row] for row in final])

    for stage_name, snapshot in (("initial", report.initial), ("final", report.final)):
        header = ["class"]
        for name in report.channel_names:
            header += [f"{name}_precision", f"{name}_recall"]
        header += ["fused_precision", "fused_recall"]
        rows = [header]
        for cls in range(report.n_classes):
            row = [str(cls)]
            for name in report.channel_names:
                metrics = snapshot.metrics[name]
                row += [repr(float(metrics.precision[cls])), repr(float(metrics.recall[cls]))]
            row += [
                repr(float(snapshot.fused_metrics.precision[cls])),
                repr(float(snapshot.fused_metrics.recall[cls])),
            ]
            rows.append(row)
        _write_rows(outdir / f"perclass_{stage_name}.csv", rows)

    trend_rows = [["update_count"] + [f"acc_{n}" for n in report.channel_names] + ["acc_fused"]]
    for point in report.trend:
        trend_rows.append(
            [str(point.update_count)]
            + [repr(point.accuracies[n]) for n in report.channel_names]
            + [repr(point.fused_accuracy)]
        )
    _write_rows(outdir / "trend.csv", trend_rows)

    event_rows = [
        ["sequence_id", "phase", "decision", "branch"]
        + [f"cre_{n}" for n in report.channel_names]
        + [f"buffer_{n}" for n in report.channel_names]
        + ["update_count"]
    ]
    for event in report.events:
        decision = "none" if event["decision"] is None else str(event["decision"])
        event_rows.append(
            [event["sequence_id"], event["phase"], decision, event["branch"]]
            + [repr(event["cre"][n]) for n in report.channel_names]
            + [str(event["buffer_sizes"][n]) for n in report.channel_names]
            + [str(event["update_count"])]
        )
    _write_rows(outdir / "events.csv", event_rows)


def write_summary_csv(repeated: RepeatedReport, path) -> None:
    """Channel-by-mode table of mean/std macro precision and recall.

    The batch mode never updates, so its final columns stay empty (shown
    as // by the report command).
    """
    rows = [SUMMARY_COLUMNS]
    modes = list(repeated.reports)
    channel_names = list(repeated.reports[modes[0]][0].channel_names) + ["fused"]
    for name in channel_names:
        for mode in modes:
            summary = repeated.summary[mode]
            row = [mode, name]
            for stage in ("initial", "final"):
                if mode == "batch" and stage == "final":
                    row += ["", ""]
                else:
                    row += [
                        repr(summary[f"{stage}.{name}.macro_precision"][0]),
                        repr(summary[f"{stage}.{name}.macro_recall"][0]),
                    ]
            for stage in ("initial", "final"):
                if mode == "batch" and stage == "final":
                    row += ["", ""]
                else:
                    row += [
                        repr(summary[f"{stage}.{name}.macro_precision"][1]),
                        repr(summary[f"{stage}.{name}.macro_recall"][1]),
                    ]
            rows.append(row)
    _write_rows(Path(path), rows)


def read_summary_csv(path) -> list[dict[str, str]]:
    with Path(path).open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != SUMMARY_COLUMNS:
            raise ValueError(f"{path} is not a summary file")
        return [dict(zip(header, row)) for row in reader]


def format_summary_table(rows: list[dict[str, str]]) -> str:
    """Fixed-width channel-by-mode table; values printed exactly as stored."""
    columns = ["channel", "mode", "initial_precision", "initial_recall",
               "final_precision", "final_recall"]
    display = [["channel", "mode", "initial P", "initial R", "final P", "final R"]]
    for row in rows:
        display.append([row[c] if row[c] else "//" for c in columns])
    widths = [max(len(line[i]) for line in display) for i in range(len(columns))]
    lines = []
    for idx, line in enumerate(display):
        lines.append("  ".join(cell.ljust(widths[i]) for i, cell in enumerate(line)).rstrip())
        if idx == 0:
            lines.append("  ".join("-" * widths[i] for i in range(len(columns))))
    return "\n".join(lines)
