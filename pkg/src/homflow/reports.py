"""Deterministic report writers.

CSV uses '.' decimals and no locale; JSON emits floats with 17 significant
digits so re-runs of the same configuration are byte-identical and numbers
round-trip exactly. No timestamps or environment state enter the output.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np


def format_value(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    if isinstance(v, np.integer):
        return str(int(v))
    return str(v)


def write_csv(path, header, rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(format_value(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def _round_floats(obj):
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (float, np.floating)):
        # round-trip through the fixed 17-digit representation
        return float(f"{float(obj):.17g}")
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, dict):
        return {k: _round_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round_floats(v) for v in obj]
    return obj


def json_dumps(obj) -> str:
    return json.dumps(_round_floats(obj), indent=2, sort_keys=True,
                      allow_nan=False)


def write_json(path, obj) -> None:
    Path(path).write_text(json_dumps(obj) + "\n")
