"""Machine-readable run reports (JSON and CSV)."""

from __future__ import annotations

import csv
import io
import json
import math

from .machine import Clo
from .pretty import pretty
from .semantics import readback


def encode_value(v):
    """Runtime value -> JSON-compatible structure."""
    if type(v) is float:
        return v
    if type(v) is tuple:
        return [encode_value(x) for x in v]
    if type(v) is dict:
        return {k: encode_value(x) for k, x in v.items()}
    if type(v) is Clo:
        return {"closure": pretty(readback(v))}
    raise TypeError(f"not a runtime value: {v!r}")


def _key(enc) -> str:
    return json.dumps(enc, sort_keys=True)


def aggregate(posterior) -> list:
    """Merge equal values, keeping first-appearance order."""
    out: dict = {}
    for v, w in posterior:
        enc = encode_value(v)
        k = _key(enc)
        if k in out:
            out[k][1] += w
        else:
            out[k] = [enc, w]
    return [{"value": enc, "weight": w} for enc, w in out.values()]


def _finite(x):
    return x if math.isfinite(x) else None


def build_report(model: str, result, wall_ms: float) -> dict:
    cfg = result.config.as_dict()
    return {
        "model": model,
        "config": cfg,
        "posterior": aggregate(result.posterior()),
        "log_norm_const": _finite(result.log_z),
        "rounds": result.rounds,
        "ess_history": [float(x) for x in result.ess_history],
        "dead_count": result.dead_count,
        "termination": result.termination,
        "all_dead": result.termination == "all-dead",
        "wall_ms": round(wall_ms, 3),
    }


def to_json(report: dict) -> str:
    return json.dumps(report, indent=2, allow_nan=False) + "\n"


def to_csv(report: dict) -> str:
    """Summary fields as ``# key=value`` comment lines, then ``value,weight`` rows."""
    buf = io.StringIO()
    for k in ("model", "log_norm_const", "rounds", "dead_count", "termination", "wall_ms"):
        buf.write(f"# {k}={report[k]}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["value", "weight"])
    for row in report["posterior"]:
        v = row["value"]
        w.writerow([v if isinstance(v, float) else json.dumps(v, sort_keys=True), repr(row["weight"])])
    return buf.getvalue()


def stable_part(report: dict) -> dict:
    """Everything but the wall-clock time, which is the only field allowed to vary."""
    return {k: v for k, v in report.items() if k != "wall_ms"}
