"""Persistence: JSON-lines trajectories, the run manifest and CSV exports.

Floats go through ``json`` which writes the shortest repr, so a snapshot read
back from disk is bit-identical to the one that was written.
"""

from __future__ import annotations

import csv
import json
import os
import tempfile
from dataclasses import fields
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError
from .flow import Snapshot

SNAPSHOT_FILE = "snapshots.jsonl"
MANIFEST_FILE = "manifest.json"
_SCALARS = [f.name for f in fields(Snapshot) if f.name not in ("step", "t", "values")]


def snapshot_to_dict(s: Snapshot) -> dict:
    out = {"step": s.step, "t": s.t}
    out.update({k: getattr(s, k) for k in _SCALARS})
    out["values"] = s.values.tolist()
    return out


def snapshot_from_dict(d: dict) -> Snapshot:
    return Snapshot(step=int(d["step"]), t=float(d["t"]), values=np.asarray(d["values"], dtype=float),
                    **{k: float(d[k]) for k in _SCALARS})


def write_snapshots(path, snaps: Iterable[Snapshot]) -> list[dict]:
    """Write one snapshot per line; returns the index (line, step, t) for the manifest."""
    index = []
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for line, s in enumerate(snaps):
            fh.write(json.dumps(snapshot_to_dict(s), separators=(",", ":")))
            fh.write("\n")
            index.append({"line": line, "step": s.step, "t": s.t})
    return index


def read_snapshots(path) -> list[Snapshot]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                out.append(snapshot_from_dict(json.loads(line)))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise ConfigError(f"{path}:{lineno}: bad snapshot record ({exc})") from None
    return out


def write_json_atomic(path, data) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(prefix=path.name, suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            json.dump(data, fh, indent=2, allow_nan=True)
            fh.write("\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_manifest(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read manifest {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"manifest {path} is not valid JSON: {exc}") from None
    for key in ("config", "checks", "snapshots"):
        if key not in data:
            raise ConfigError(f"manifest {path} has no {key!r} entry")
    return data


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row])


def read_csv_columns(path) -> dict[str, np.ndarray]:
    """Numeric CSV with a header row, returned column-wise."""
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = [h.strip() for h in next(reader)]
            rows = [r for r in reader if r and any(c.strip() for c in r)]
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    except StopIteration:
        raise ConfigError(f"{path} is empty") from None
    try:
        table = np.array([[float(c) for c in r] for r in rows], dtype=float)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    if table.ndim != 2 or table.shape[1] != len(header):
        raise ConfigError(f"{path}: every row needs {len(header)} columns")
    return {name: table[:, i] for i, name in enumerate(header)}
