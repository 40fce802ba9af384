"""Flatten per-iteration metrics into a stable CSV."""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path


class EmptyRun(ValueError):
    pass


COLUMNS = (
    "iteration",
    "win_rate",
    "loss_rate",
    "tie_rate",
    "avg_return",
    "accuracy",
    "parse_failure_rate",
    "fallback_rate",
)


def export_metrics(run_dir) -> str:
    """CSV text, one row per iteration; accuracy stays blank for game-play runs."""
    run_dir = Path(run_dir)
    rows = []
    for it_dir in sorted(run_dir.glob("iteration_*"),
                         key=lambda p: int(p.name.split("_")[1])):
        metrics_file = it_dir / "metrics.json"
        if metrics_file.exists():
            rows.append(json.loads(metrics_file.read_text()))
    if not rows:
        raise EmptyRun(f"{run_dir} contains no completed iterations")
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(COLUMNS)
    for row in rows:
        writer.writerow([
            row.get("iteration"),
            row.get("win_rate"),
            row.get("loss_rate"),
            row.get("tie_rate"),
            row.get("avg_return"),
            "" if row.get("accuracy") is None else row.get("accuracy"),
            row.get("parse_failure_rate"),
            row.get("fallback_rate"),
        ])
    return buffer.getvalue()


def write_metrics_csv(run_dir, out_path) -> None:
    Path(out_path).write_text(export_metrics(run_dir))
