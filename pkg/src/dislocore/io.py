"""Deterministic writers for trajectories, events, reports and sweep tables.

Every file starts with a header naming the tool version and the scenario
hash.  Floats are written with 17 significant digits so that identical runs
give byte-identical files.
"""

from __future__ import annotations

import hashlib
import json
import math
from pathlib import Path

import numpy as np

from . import __version__

TOOL = "dislocore"


def scenario_hash(data):
    """First 16 hex digits of the SHA-256 of the canonical JSON form."""
    blob = json.dumps(data, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def header(digest):
    return {"tool": TOOL, "version": __version__, "scenario_hash": digest}


def fmt(x):
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


def _plain(obj):
    """Convert numpy scalars/arrays and non-finite floats for JSON output."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else fmt(x)
    return obj


def write_trajectory_csv(path, trajectory, digest):
    """Columns ``t,x1,y1,...``; event rows follow as ``#`` comment lines."""
    n = trajectory.positions.shape[1]
    cols = ["t"] + [f"{c}{i + 1}" for i in range(n) for c in ("x", "y")]
    h = header(digest)
    lines = [f"# {h['tool']} {h['version']} scenario {digest}", ",".join(cols)]
    for t, pos in zip(trajectory.times, trajectory.positions):
        lines.append(",".join([fmt(t)] + [fmt(v) for v in pos.ravel()]))
    for ev in trajectory.events:
        lines.append(f"# event {ev.kind}, t={ev.time:.3e}")
    Path(path).write_text("\n".join(lines) + "\n")


def write_events_jsonl(path, events, digest):
    records = [{"header": header(digest)}] + [_plain(e.to_dict()) for e in events]
    Path(path).write_text("".join(json.dumps(r, sort_keys=True) + "\n" for r in records))


def write_report(path, report, digest):
    body = {"header": header(digest), **_plain(report)}
    Path(path).write_text(json.dumps(body, sort_keys=True, indent=2) + "\n")


def write_table_csv(path, rows, columns, digest):
    h = header(digest)
    lines = [f"# {h['tool']} {h['version']} scenario {digest}", ",".join(columns)]
    for row in rows:
        cells = []
        for c in columns:
            v = row[c]
            if isinstance(v, (bool, np.bool_)):
                cells.append("true" if v else "false")
            elif isinstance(v, (int, float, np.integer, np.floating)):
                cells.append(fmt(v))
            else:
                cells.append(str(v))
        lines.append(",".join(cells))
    Path(path).write_text("\n".join(lines) + "\n")


def read_trajectory_csv(path):
    """Return ``(times, positions)`` from a trajectory CSV."""
    data = np.loadtxt(path, delimiter=",", comments="#", skiprows=2, ndmin=2)
    return data[:, 0], data[:, 1:].reshape(len(data), -1, 2)
