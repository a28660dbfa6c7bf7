"""On-disk formats: signal JSON, trace CSV with a JSON sidecar, run reports.

All numbers are written with 17 significant digits and ``\\n`` line endings
so that identical inputs give byte-identical files.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .core import FrogTrace, TraceGeometry, as_pulse

FLOAT_FMT = "%.17g"


def fmt(x: float) -> str:
    return FLOAT_FMT % float(x)


def _clean(obj):
    """Convert numpy scalars/arrays and non-finite floats for JSON output."""
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
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def write_json(path, obj) -> None:
    text = json.dumps(_clean(obj), indent=2, sort_keys=True, allow_nan=False)
    Path(path).write_text(text + "\n", encoding="utf-8", newline="\n")


def read_json(path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))


# -- signals --------------------------------------------------------------------

def write_signal(path, x, label: str | None = None) -> None:
    x = as_pulse(x)
    doc = {"n": int(x.size), "samples": [[float(v.real), float(v.imag)] for v in x]}
    if label is not None:
        doc["label"] = label
    write_json(path, doc)


def read_signal(path) -> np.ndarray:
    """Load a signal file; raises ``ValueError`` on malformed content."""
    doc = read_json(path)
    try:
        n = int(doc["n"])
        samples = np.asarray(doc["samples"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"{path}: malformed signal file ({exc})") from None
    if samples.ndim != 2 or samples.shape[1] != 2:
        raise ValueError(f"{path}: samples must be [re, im] pairs")
    if samples.shape[0] != n:
        raise ValueError(f"{path}: {samples.shape[0]} samples but n={n}")
    return as_pulse(samples[:, 0] + 1j * samples[:, 1])


# -- traces ---------------------------------------------------------------------

def write_matrix_csv(path, values, header: list[str]) -> None:
    lines = [",".join(header)]
    for k, row in enumerate(np.asarray(values, dtype=float)):
        lines.append(",".join([str(k)] + [fmt(v) for v in row]))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def write_trace(prefix, t: FrogTrace, provenance: dict | None = None) -> tuple[Path, Path]:
    """Write ``<prefix>.csv`` and ``<prefix>.json``; returns both paths."""
    prefix = Path(prefix)
    csv_path = prefix.with_name(prefix.name + ".csv")
    side_path = prefix.with_name(prefix.name + ".json")
    header = ["k\\m"] + [str(m) for m in range(t.geometry.m_count)]
    write_matrix_csv(csv_path, t.values, header)
    write_json(side_path, {"geometry": t.geometry.to_dict(),
                           "provenance": provenance or {}})
    return csv_path, side_path


def read_trace(csv_path, sidecar=None) -> FrogTrace:
    csv_path = Path(csv_path)
    sidecar = Path(sidecar) if sidecar else csv_path.with_suffix(".json")
    meta = read_json(sidecar)
    g = TraceGeometry.from_dict(meta["geometry"])
    lines = csv_path.read_text(encoding="utf-8").splitlines()
    if not lines or not lines[0].startswith("k\\m"):
        raise ValueError(f"{csv_path}: missing 'k\\m' header")
    rows = [line.split(",")[1:] for line in lines[1:] if line]
    try:
        z = np.asarray(rows, dtype=float)
    except ValueError as exc:
        raise ValueError(f"{csv_path}: {exc}") from None
    if z.shape != (g.n, g.m_count):
        raise ValueError(f"{csv_path}: shape {z.shape} does not match sidecar "
                         f"({g.n}, {g.m_count})")
    return FrogTrace(z, g)


def write_columns_csv(path, columns: dict) -> None:
    """CSV with one named column per key; all columns share a length."""
    names = list(columns)
    cols = [list(columns[n]) for n in names]
    lengths = {len(c) for c in cols}
    if len(lengths) > 1:
        raise ValueError("columns differ in length")
    lines = [",".join(names)]
    for row in zip(*cols):
        lines.append(",".join(str(v) if isinstance(v, (int, np.integer, str)) else fmt(v)
                              for v in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def read_columns_csv(path) -> dict:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    names = lines[0].split(",")
    data = [line.split(",") for line in lines[1:] if line]
    return {n: [row[i] for row in data] for i, n in enumerate(names)}


def run_report(command: str, inputs: dict, options: dict, metrics: dict,
               seed, timings: dict | None = None) -> dict:
    """RunReport document; ``timings`` is included only when given."""
    doc = {"command": command, "inputs": inputs, "options": options,
           "metrics": metrics, "seed": seed}
    if timings is not None:
        doc["timings"] = timings
    return doc
