"""Serialization helpers: CSV tables with a metadata header, JSON records, cache.

CSV files start with ``# key: value`` comment lines holding JSON-encoded
metadata (configuration, tool version, certificates), followed by a header
row and data rows.  Floats are written with ``repr`` so that a rerun with the
same inputs reproduces the file byte for byte.
"""
from __future__ import annotations

import csv
import hashlib
import io as _io
import json
import os
from pathlib import Path

import numpy as np

_SOURCE_FILES = ("kernels.py", "lattice.py", "sites.py", "principal.py",
                 "expansion.py", "_pathdfs.py", "dos.py", "io.py", "cli.py")


def tool_version() -> str:
    """Content hash of the package sources (git-style short id)."""
    here = Path(__file__).resolve().parent
    h = hashlib.sha1()
    for name in _SOURCE_FILES:
        f = here / name
        if f.exists():
            h.update(name.encode())
            h.update(f.read_bytes())
    return h.hexdigest()[:12]


def to_jsonable(obj):
    """Recursively convert numpy and complex values into JSON-friendly types."""
    if hasattr(obj, "to_dict"):
        return to_jsonable(obj.to_dict())
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": float(obj.real), "im": float(obj.imag)}
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if np.isfinite(x) else repr(x)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def dumps(obj) -> str:
    return json.dumps(to_jsonable(obj), sort_keys=True, indent=2)


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def format_csv(rows, columns, metadata=None) -> str:
    """Render rows (dicts) as CSV text with a ``#`` metadata preamble."""
    buf = _io.StringIO()
    for key, value in sorted((metadata or {}).items()):
        buf.write(f"# {key}: {json.dumps(to_jsonable(value), sort_keys=True)}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_cell(row[c]) for c in columns])
    return buf.getvalue()


def write_csv(path, rows, columns, metadata=None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(format_csv(rows, columns, metadata))
    return path


def read_csv(path):
    """Return ``(metadata, rows)``; values stay strings except metadata."""
    meta, body = {}, []
    for line in Path(path).read_text().splitlines():
        if line.startswith("# "):
            key, _, value = line[2:].partition(": ")
            meta[key] = json.loads(value)
        else:
            body.append(line)
    rows = list(csv.DictReader(body))
    return meta, rows


def write_json(path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(obj) + "\n")
    return path


class ResultCache:
    """Content-addressed JSON store with checksum verification.

    Entries live in ``<root>/<key>.json`` and hold the payload together with
    its sha256.  A checksum mismatch is treated as a miss.
    """

    def __init__(self, root):
        self.root = Path(root)

    @staticmethod
    def key(config_slice, operation: str) -> str:
        blob = json.dumps({"op": operation, "cfg": to_jsonable(config_slice)},
                          sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()

    def _path(self, key):
        return self.root / f"{key}.json"

    def get(self, key):
        path = self._path(key)
        if not path.exists():
            return None
        try:
            entry = json.loads(path.read_text())
            payload = entry["payload"]
        except (ValueError, KeyError):
            return None
        digest = hashlib.sha256(payload.encode()).hexdigest()
        if digest != entry.get("sha256"):
            return None
        return json.loads(payload)

    def put(self, key, value):
        self.root.mkdir(parents=True, exist_ok=True)
        payload = json.dumps(to_jsonable(value), sort_keys=True)
        entry = {"sha256": hashlib.sha256(payload.encode()).hexdigest(), "payload": payload}
        tmp = self._path(key).with_suffix(".tmp")
        tmp.write_text(json.dumps(entry))
        os.replace(tmp, self._path(key))
        return json.loads(payload)
