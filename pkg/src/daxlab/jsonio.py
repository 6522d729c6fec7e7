"""Canonical JSON serialization shared by every file format.

All documents are written with sorted keys and fixed separators so that
equal inputs produce byte-identical files.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any


def dumps(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=True)


def dumps_pretty(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=True)


def write(path: str | Path, obj: Any) -> None:
    Path(path).write_text(dumps_pretty(obj) + "\n", encoding="utf-8")


def read(path: str | Path) -> Any:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def write_lines(path: str | Path, objs) -> None:
    """One compact JSON document per line (sessions, logs)."""
    with open(path, "w", encoding="utf-8") as fh:
        for obj in objs:
            fh.write(dumps(obj) + "\n")


def read_lines(path: str | Path) -> list[Any]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(json.loads(line))
    return out
