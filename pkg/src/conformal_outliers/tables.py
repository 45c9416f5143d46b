"""CSV and JSON run-manifest IO.

All numeric CSV output uses shortest round-trip decimal formatting  (header
row, comma separators, '.' decimal, UTF-8, LF line endings), so re-running a
command with the same inputs and seed reproduces byte-identical files.
"""

from __future__ import annotations

import json
import math
import time
from pathlib import Path
from typing import Any, Iterable, Sequence


def format_value(x: Any) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return repr(x)
    return str(x)


def write_csv(path: str | Path, header: Sequence[str],
              rows: Iterable[Sequence[Any]]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(format_value(x) for x in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
    return path


def read_score_column(path: str | Path) -> "np.ndarray":
    """One score per line; a single header line is tolerated and skipped."""
    import numpy as np

    text = Path(path).read_text(encoding="utf-8").strip()
    if not text:
        return np.empty(0)
    lines = text.splitlines()
    start = 0
    try:
        float(lines[0].split(",")[0])
    except ValueError:
        start = 1
    vals = [float(ln.split(",")[0]) for ln in lines[start:] if ln.strip()]
    return np.asarray(vals, dtype=np.float64)


def read_csv_columns(path: str | Path) -> dict[str, list[str]]:
    """Small CSV reader: header row required, returns raw string columns."""
    lines = Path(path).read_text(encoding="utf-8").strip().splitlines()
    if not lines:
        raise ValueError(f"{path}: empty CSV")
    header = [h.strip() for h in lines[0].split(",")]
    cols: dict[str, list[str]] = {h: [] for h in header}
    for ln in lines[1:]:
        if not ln.strip():
            continue
        parts = ln.split(",")
        if len(parts) != len(header):
            raise ValueError(f"{path}: ragged row {ln!r}")
        for h, v in zip(header, parts):
            cols[h].append(v)
    return cols


ARTIFACT_VERSION = "0.1.0"


def write_manifest(path: str | Path, subcommand: str, params: dict[str, Any],
                   seed: int, outputs: list[str],
                   started_at: float, extra: dict[str, Any] | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    doc = {
        "subcommand": subcommand,
        "params": params,
        "seed": seed,
        "artifact_version": ARTIFACT_VERSION,
        "started_at": started_at,
        "finished_at": time.time(),
        "outputs": outputs,
    }
    if extra:
        doc.update(extra)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")
    return path
