"""Report envelopes, CSV writers and bundle merging.

Every JSON artifact is an *envelope*::

    {"schema_version": 1, "command": ..., "config": {...}, "config_hash": ...,
     "seed": ..., "network_fingerprint": ..., "result": {...},
     "checks": {name: {"status": ..., "detail": ...}}, "artifacts": [...]}

serialised with sorted keys and a fixed float format, so identical inputs
give byte-identical files.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .stability import CheckResult, stability_verdict

SCHEMA_VERSION = 1


class UsageError(ValueError):
    """Bad command-line input or an unusable set of artifacts."""


def jsonable(obj: Any) -> Any:
    """Convert numpy scalars/arrays and non-finite floats into plain JSON values.

    Infinities become the strings ``"inf"``/``"-inf"`` and NaN becomes
    ``"nan"`` so the output stays strict JSON.
    """
    if isinstance(obj, Mapping):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if obj is None or isinstance(obj, str):
        return obj
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def canonical_json(obj: Any) -> str:
    return json.dumps(jsonable(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def config_hash(config: Mapping[str, Any]) -> str:
    blob = json.dumps(jsonable(config), sort_keys=True, separators=(",", ":"), allow_nan=False)
    return hashlib.sha256(blob.encode()).hexdigest()


def envelope(
    command: str,
    config: Mapping[str, Any],
    seed: int | None,
    fingerprint: str | None,
    result: Mapping[str, Any],
    *,
    checks: Iterable[CheckResult] = (),
    artifacts: Sequence[str] = (),
) -> dict[str, Any]:
    return {
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "config": dict(config),
        "config_hash": config_hash(config),
        "seed": seed,
        "network_fingerprint": fingerprint,
        "result": dict(result),
        "checks": {c.name: c.to_dict() for c in checks},
        "artifacts": list(artifacts),
    }


def write_text(path: str | Path | None, text: str, stdout=None) -> None:
    if path is None or str(path) == "-":
        import sys

        (stdout or sys.stdout).write(text)
        return
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _cell(v: Any) -> str:
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def csv_text(header: Sequence[str], rows: Iterable[Sequence[Any] | Mapping[str, Any]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        if isinstance(row, Mapping):
            row = [row.get(h) for h in header]
        w.writerow([_cell(v) for v in row])
    return buf.getvalue()


MEASURE_COLUMNS = ("node", "eps", "delta", "ratio", "half_width", "bound", "n", "seed")
OMEGA_COLUMNS = ("loop", "x_norm", "wedge_defect", "dist_to_y_plus")


def section_point_csv(points) -> str:
    """``node,x1..xU,y1..yS`` rows; cells beyond a node's own dimensions stay empty."""
    points = list(points)
    umax = max((p.x.size for p in points), default=0)
    smax = max((p.y.size for p in points), default=0)
    header = ["node"] + [f"x{i + 1}" for i in range(umax)] + [f"y{i + 1}" for i in range(smax)]
    rows = []
    for p in points:
        xs = list(p.x) + [None] * (umax - p.x.size)
        ys = list(p.y) + [None] * (smax - p.y.size)
        rows.append([p.node, *xs, *ys])
    return csv_text(header, rows)


def trajectory_csv(traj) -> str:
    n = traj.states.shape[1]
    return csv_text(["t"] + [f"x{i + 1}" for i in range(n)], traj.to_rows())


def load_artifact(path: str | Path) -> dict[str, Any]:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as err:
        raise UsageError(f"cannot read artifact {path}: {err}") from err
    if not isinstance(data, dict) or "command" not in data or "schema_version" not in data:
        raise UsageError(f"{path} is not a hetnet report")
    return data


def report_bundle(paths: Sequence[str | Path]) -> dict[str, Any]:
    """Merge run artifacts for one network into a summary with a verdict.

    Artifacts without a network fingerprint (network-independent checks)
    merge with anything. Later artifacts override earlier ones for a check
    of the same name.

    Raises
    ------
    UsageError
        If ``paths`` is empty, an artifact is unreadable, or the artifacts
        carry different network fingerprints.
    """
    if not paths:
        raise UsageError("report needs at least one artifact")
    artifacts = [(str(p), load_artifact(p)) for p in paths]
    prints = sorted({a["network_fingerprint"] for _, a in artifacts if a.get("network_fingerprint")})
    if len(prints) > 1:
        raise UsageError(f"artifacts describe different networks: {prints}")

    checks: dict[str, CheckResult] = {}
    for _, art in artifacts:
        for name, c in art.get("checks", {}).items():
            checks[name] = CheckResult(name, c["status"], c.get("detail", ""))
    verdict = stability_verdict(checks)
    return {
        "schema_version": SCHEMA_VERSION,
        "command": "report",
        "network_fingerprint": prints[0] if prints else None,
        "runs": [
            {
                "path": path,
                "command": art["command"],
                "config_hash": art.get("config_hash"),
                "seed": art.get("seed"),
                "artifacts": art.get("artifacts", []),
            }
            for path, art in artifacts
        ],
        "verdict": verdict.to_dict(),
    }
