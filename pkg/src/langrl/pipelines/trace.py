"""Machine-readable run traces mirroring the evaluate/improve cycle.

Every pipeline appends one record per step with a phase label from the
canonical cycle (rollout, evaluate, aggregate, improve, emit); the
validator asserts labels never move backwards within one unit of work.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable, Optional

PHASES = ("rollout", "evaluate", "aggregate", "improve", "emit")
_PHASE_INDEX = {name: i for i, name in enumerate(PHASES)}


class TraceError(ValueError):
    pass


class TraceWriter:
    def __init__(self):
        self.records: list[dict] = []

    def add(self, iteration: int, unit: str, phase: str, **detail) -> None:
        if phase not in _PHASE_INDEX:
            raise TraceError(f"unknown phase {phase!r}")
        record = {"iteration": iteration, "unit": unit, "phase": phase}
        record.update(detail)
        self.records.append(record)

    def to_jsonl(self) -> str:
        return "".join(json.dumps(r, sort_keys=True) + "\n" for r in self.records)

    def write(self, path) -> None:
        Path(path).write_text(self.to_jsonl())


def validate_trace(records: Iterable[dict]) -> int:
    """Check phase ordering per (iteration, unit); returns records seen."""
    last: dict[tuple, int] = {}
    count = 0
    for record in records:
        count += 1
        phase = record.get("phase")
        if phase not in _PHASE_INDEX:
            raise TraceError(f"record {count}: unknown phase {phase!r}")
        key = (record.get("iteration"), record.get("unit"))
        idx = _PHASE_INDEX[phase]
        if key in last and idx < last[key]:
            raise TraceError(
                f"record {count}: phase {phase} after {PHASES[last[key]]} in unit {key}"
            )
        last[key] = idx
    return count


def read_trace(path) -> list[dict]:
    return [
        json.loads(line)
        for line in Path(path).read_text().splitlines()
        if line.strip()
    ]
