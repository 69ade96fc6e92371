"""Reading and writing the JSON documents used by the command line tools.

Output is canonical (sorted keys, fixed indentation) so equal inputs give
byte-identical files.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

from .cantor_core import CantorBuild, CantorSchedule, LevelCollection, RemovalLedger

__all__ = [
    "InputError",
    "dumps",
    "levels_document",
    "read_json",
    "read_levels",
    "read_schedule",
    "write_json",
]


class InputError(ValueError):
    """A malformed input file; ``where`` locates the problem."""

    def __init__(self, path: str, where: str, message: str):
        self.path, self.where = path, where
        super().__init__(f"{path}:{where}: {message}")


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def read_json(path: str | Path):
    """Parse a JSON file, turning syntax errors into :class:`InputError` with line and column."""
    path = str(path)
    text = sys.stdin.read() if path == "-" else Path(path).read_text()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(path, f"{exc.lineno}:{exc.colno}", exc.msg) from None


def write_json(obj, path: str | Path | None):
    text = dumps(obj)
    if path is None or str(path) == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _field(path: str, what: str, fn, obj):
    try:
        return fn(obj)
    except (KeyError, TypeError, ValueError, ZeroDivisionError) as exc:
        detail = f"missing key {exc}" if isinstance(exc, KeyError) else str(exc)
        raise InputError(path, what, detail) from None


def read_schedule(path: str | Path) -> CantorSchedule:
    obj = read_json(path)
    if isinstance(obj, dict) and "schedule" in obj:
        obj = obj["schedule"]
    return _field(str(path), "schedule", CantorSchedule.from_json, obj)


def levels_document(schedule: CantorSchedule, levels, ledgers=(), horizon: int | None = None) -> dict:
    levels = list(levels)
    horizon = horizon if horizon is not None else max(len(levels) - 1, schedule.horizon or 0)
    return {
        "kind": "levels",
        "schedule": schedule.to_json(horizon),
        "counts": [len(level) for level in levels],
        "levels": [level.to_json() for level in levels],
        "ledgers": [ledger.to_json() for ledger in ledgers],
    }


def read_levels(path: str | Path) -> tuple[CantorSchedule, list[LevelCollection], list[RemovalLedger]]:
    obj = read_json(path)
    p = str(path)
    if not isinstance(obj, dict) or "levels" not in obj or "schedule" not in obj:
        raise InputError(p, "top level", "expected an object with 'schedule' and 'levels'")
    schedule = _field(p, "schedule", CantorSchedule.from_json, obj["schedule"])
    levels = [_field(p, f"levels[{i}]", LevelCollection.from_json, x) for i, x in enumerate(obj["levels"])]
    ledgers = [_field(p, f"ledgers[{i}]", RemovalLedger.from_json, x)
               for i, x in enumerate(obj.get("ledgers", []))]
    return schedule, levels, ledgers


def build_document(b: CantorBuild) -> dict:
    doc = levels_document(b.schedule, b.levels, b.ledgers, horizon=b.schedule.horizon)
    doc["empty_at"] = b.empty_at
    return doc
