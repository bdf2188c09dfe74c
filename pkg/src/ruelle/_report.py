"""Deterministic report assembly and atomic output.

Reports with identical command, config and seed serialize byte-identically:
keys are sorted, floats use repr round-tripping, non-finite values become
strings, and volatile data (wall time) goes to stderr instead of the report.
"""

from __future__ import annotations

import hashlib
import json
import os
import sys
import tempfile

import numpy as np


def _sanitize(obj):
    if isinstance(obj, dict):
        return {str(k): _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_sanitize(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        if v != v:
            return "nan"
        if v in (float("inf"), float("-inf")):
            return "inf" if v > 0 else "-inf"
        return v
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def canonical_json(obj):
    return json.dumps(_sanitize(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def config_hash(config):
    return hashlib.sha256(canonical_json(config).encode()).hexdigest()


def quantity(value, provenance, error=None):
    out = {"value": _sanitize(value), "provenance": provenance}
    if error is not None:
        out["error"] = _sanitize(error)
    return out


def make_report(command, config, quantities, checks=None, extra=None):
    report = {
        "command": command,
        "config": _sanitize(config),
        "input_hash": config_hash(config),
        "quantities": _sanitize(quantities),
        "checks": _sanitize(checks or []),
    }
    if extra:
        report.update(_sanitize(extra))
    return report


def report_to_csv(report):
    lines = ["section,name,field,value"]

    def emit(section, name, payload):
        if isinstance(payload, dict):
            for k in sorted(payload):
                lines.append(f"{section},{name},{k},{payload[k]}")
        else:
            lines.append(f"{section},{name},,{payload}")

    for name in sorted(report.get("quantities", {})):
        emit("quantity", name, report["quantities"][name])
    for check in report.get("checks", []):
        emit("check", check.get("name", "?"), check)
    return "\n".join(lines) + "\n"


def write_output(text, out_path=None):
    """Write the finished report atomically, or to stdout."""
    if out_path is None:
        sys.stdout.write(text)
        return
    directory = os.path.dirname(os.path.abspath(out_path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".ruelle-")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, out_path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
