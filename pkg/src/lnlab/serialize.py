"""Profile CSV and report JSON."""
from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

PROFILE_HEADER = "# r,u"


def _fmt(x: float) -> str:
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.17g}"


def profile_csv(mesh, u) -> str:
    """Two columns ``r,u`` with 17 significant digits; blow-up nodes read ``inf``."""
    lines = [PROFILE_HEADER]
    lines += [f"{_fmt(r)},{_fmt(v)}" for r, v in zip(np.asarray(mesh, float), np.asarray(u, float))]
    return "\n".join(lines) + "\n"


def write_profile(path, profile) -> None:
    Path(path).write_text(profile_csv(profile.mesh, profile.u))


def read_profile(path) -> tuple[np.ndarray, np.ndarray]:
    text = Path(path).read_text().splitlines()
    if not text or text[0].strip() != PROFILE_HEADER:
        raise ValueError(f"{path}: missing '{PROFILE_HEADER}' header")
    data = np.array([[float(v) for v in line.split(",")] for line in text[1:] if line.strip()])
    return data[:, 0], data[:, 1]


def _clean(obj):
    # JSON has no inf/nan; numpy scalars are not serializable as-is
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    return obj


def report_json(doc: dict) -> str:
    return json.dumps(_clean(doc), indent=2, sort_keys=True) + "\n"


def write_report(path, doc: dict) -> None:
    Path(path).write_text(report_json(doc))
