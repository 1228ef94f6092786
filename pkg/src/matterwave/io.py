"""Delimited text files with ``# key = value`` headers, written atomically."""
from __future__ import annotations

import hashlib
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .wavefield import ComplexWavefield, IntensityPattern


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def atomic_write(path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise
    return path


def format_table(header: dict, columns: list[str], rows) -> str:
    lines = [f"# {k} = {_fmt(v)}" for k, v in header.items()]
    lines.append("# columns = " + ", ".join(columns))
    for row in rows:
        lines.append(", ".join(_fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def write_table(path, header: dict, columns: list[str], rows) -> Path:
    return atomic_write(path, format_table(header, columns, rows))


def read_table(path) -> tuple[dict, list[str], list[list[str]]]:
    header, columns, rows = {}, [], []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.startswith("#"):
            key, _, val = line[1:].partition("=")
            key, val = key.strip(), val.strip()
            if key == "columns":
                columns = [c.strip() for c in val.split(",")]
            else:
                header[key] = val
        elif line.strip():
            rows.append([c.strip() for c in line.split(",")])
    return header, columns, rows


def write_pattern(path, pattern: IntensityPattern, header: dict | None = None) -> Path:
    cols = ["x", "intensity"] + (["stderr"] if pattern.stderr is not None else [])
    arrays = [pattern.x, pattern.intensity] + ([pattern.stderr] if pattern.stderr is not None else [])
    return write_table(path, header or {}, cols, zip(*arrays))


def read_pattern(path) -> tuple[dict, IntensityPattern]:
    header, cols, rows = read_table(path)
    data = np.array(rows, dtype=float).reshape(-1, len(cols))
    err = data[:, cols.index("stderr")] if "stderr" in cols else None
    return header, IntensityPattern(data[:, cols.index("x")], data[:, cols.index("intensity")], err)


def write_field(path, field: ComplexWavefield, header: dict | None = None) -> Path:
    h = {"wavelength_m": field.wavelength, **(header or {})}
    a = field.amplitude
    return write_table(path, h, ["x", "re", "im"], zip(field.x, a.real, a.imag))


def read_field(path) -> tuple[dict, ComplexWavefield]:
    header, cols, rows = read_table(path)
    data = np.array(rows, dtype=float).reshape(-1, 3)
    x = data[:, 0]
    dx = float(x[1] - x[0]) if x.size > 1 else 1.0
    amp = data[:, 1] + 1j * data[:, 2]
    return header, ComplexWavefield(float(x[0]), dx, amp, float(header["wavelength_m"]))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        return float(obj) if np.isfinite(obj) else str(float(obj))
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def manifest_hash(manifest: dict) -> str:
    """SHA-256 over the canonical JSON of the manifest without its timing block."""
    body = {k: v for k, v in manifest.items() if k != "timing"}
    blob = json.dumps(_jsonable(body), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def write_manifest(path, manifest: dict) -> Path:
    m = dict(_jsonable(manifest))
    m["manifest_hash"] = manifest_hash(manifest)
    return atomic_write(path, json.dumps(m, indent=2, sort_keys=True) + "\n")
