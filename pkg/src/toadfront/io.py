"""File formats: commented CSV tables and binary field snapshots."""
from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

import numpy as np
import scipy

from . import __version__

SNAPSHOT_MAGIC = b"TOADFRONT-SNAPSHOT 1\n"


def canonical_hash(obj):
    """Short sha256 of the canonical JSON form of ``obj``."""
    text = json.dumps(obj, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def module_versions():
    return {"toadfront": __version__, "numpy": np.__version__, "scipy": scipy.__version__}


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path, columns, meta=None):
    """Write equal-length ``columns`` (name -> array) with ``# key: value`` comments."""
    path = Path(path)
    names = list(columns)
    data = [np.asarray(columns[k]) for k in names]
    n = {len(d) for d in data}
    if len(n) > 1:
        raise ValueError("columns must have equal length")
    meta = dict(meta or {})
    meta.setdefault("versions", " ".join(f"{k}={v}" for k, v in module_versions().items()))
    with path.open("w", newline="") as fh:
        for k, v in meta.items():
            fh.write(f"# {k}: {_fmt(v)}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names)
        for row in zip(*data):
            w.writerow([_fmt(v) for v in row])
    return path


def read_csv(path):
    """Inverse of :func:`write_csv`; returns ``(meta, columns)`` with float columns."""
    meta, lines = {}, []
    with Path(path).open() as fh:
        for line in fh:
            if line.startswith("#"):
                key, _, val = line[1:].strip().partition(":")
                meta[key.strip()] = val.strip()
            elif line.strip():
                lines.append(line)
    rows = list(csv.reader(lines))
    names, body = rows[0], rows[1:]
    cols = {}
    for j, name in enumerate(names):
        vals = [r[j] for r in body]
        try:
            cols[name] = np.array([float(v) for v in vals])
        except ValueError:
            cols[name] = np.array(vals)
    return meta, cols


def write_snapshot(path, field, config_hash=""):
    """One self-describing file: magic line, JSON header line, row-major float64 values."""
    g = field.grid
    header = {
        "time": float(field.time),
        "grid": g.to_dict(),
        "shape": list(field.values.shape),
        "dtype": "<f8",
        "order": "row-major (x, theta)",
        "config_hash": config_hash,
    }
    with Path(path).open("wb") as fh:
        fh.write(SNAPSHOT_MAGIC)
        fh.write(json.dumps(header, sort_keys=True).encode() + b"\n")
        fh.write(np.ascontiguousarray(field.values, dtype="<f8").tobytes())
    return Path(path)


def read_snapshot(path):
    """Return ``(Field2D, header)``."""
    from .pde import Field2D, GridSpec

    with Path(path).open("rb") as fh:
        if fh.readline() != SNAPSHOT_MAGIC:
            raise ValueError(f"{path} is not a snapshot file")
        header = json.loads(fh.readline())
        values = np.frombuffer(fh.read(), dtype="<f8").reshape(header["shape"]).copy()
    return Field2D(GridSpec(**header["grid"]), values, header["time"]), header
