"""CSV and JSON writers with reproducible formatting."""
from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Sequence

import numpy as np


def fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return ""
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


def write_csv(path: Path, header: Sequence[str], columns: Sequence, meta: dict) -> Path:
    """Header row plus columns; a leading '#' line carries the run metadata."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    n = len(columns[0]) if columns else 0
    lines = ["# " + " ".join(f"{k}={meta[k]}" for k in sorted(meta)), ",".join(header)]
    for i in range(n):
        lines.append(",".join(fmt(col[i]) for col in columns))
    path.write_text("\n".join(lines) + "\n")
    return path


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return None
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return obj


def write_json(path: Path, payload: dict, meta: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    doc = dict(payload)
    doc.update(meta)
    path.write_text(json.dumps(_clean(doc), sort_keys=True, indent=2) + "\n")
    return path
