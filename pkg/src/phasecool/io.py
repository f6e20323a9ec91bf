"""Flat-file output: comma-separated tables plus key-value summary sidecars.

Floats are written with 17 significant digits, which round-trips every
double exactly. A data file ``x.csv`` gets the sidecar ``x.summary.txt``
holding one ``key = value`` pair per line, values as JSON text. Nothing
time-dependent is written, so identical runs give identical bytes.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .core import EnsembleStats, TrajectoryRecord

TRAJECTORY_COLUMNS = ("t", "q", "p", "n", "phi")
ENSEMBLE_COLUMNS = ("t", "mean_n", "var_n", "mean_q2", "mean_p2")
FLOAT_FMT = "%.17g"


class OutputError(OSError):
    """A file could not be written or read; the message names the path."""


def summary_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.stem + ".summary.txt")


def _write_table(path: Path, header, columns) -> None:
    data = np.column_stack([np.asarray(c, dtype=float) for c in columns])
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="\n") as fh:
            np.savetxt(fh, data, fmt=FLOAT_FMT, delimiter=",", header=",".join(header), comments="")
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc.strerror or exc}") from exc


def _read_table(path: Path, header) -> np.ndarray:
    try:
        with open(path) as fh:
            first = fh.readline().strip()
            if first != ",".join(header):
                raise ValueError(f"{path}: header {first!r} does not match {','.join(header)!r}")
            data = np.loadtxt(fh, delimiter=",", ndmin=2)
    except OSError as exc:
        raise OutputError(f"cannot read {path}: {exc.strerror or exc}") from exc
    if data.size == 0:
        data = np.empty((0, len(header)))
    return data


def write_summary(path, entries: dict) -> Path:
    """Write ``key = json-value`` lines in the given order."""
    path = Path(path)
    lines = [f"{key} = {json.dumps(value, allow_nan=True, default=_jsonable)}" for key, value in entries.items()]
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text("\n".join(lines) + "\n")
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc.strerror or exc}") from exc
    return path


def read_summary(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise OutputError(f"cannot read {path}: {exc.strerror or exc}") from exc
    out = {}
    for line in text.splitlines():
        if not line.strip():
            continue
        key, _, value = line.partition(" = ")
        out[key] = json.loads(value)
    return out


def _jsonable(value):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f"cannot serialize {type(value).__name__}")


def write_trajectory(record: TrajectoryRecord, path, summary: dict | None = None) -> Path:
    """Write columns t, q, p, n, phi and a sidecar with the seed and metadata.

    ``summary`` entries (config manifest, fitted quantities) come first in
    the sidecar, followed by ``seed`` and the record's ``meta.*``.
    """
    path = Path(path)
    _write_table(path, TRAJECTORY_COLUMNS, (record.t, record.q, record.p, record.n, record.phi))
    entries = dict(summary or {})
    entries.setdefault("seed", record.seed)
    entries["samples"] = len(record)
    entries["dt"] = record.dt
    for key, value in record.meta.items():
        entries[f"meta.{key}"] = value
    write_summary(summary_path(path), entries)
    return path


def read_trajectory(path) -> TrajectoryRecord:
    path = Path(path)
    data = _read_table(path, TRAJECTORY_COLUMNS)
    side = summary_path(path)
    info = read_summary(side) if side.exists() else {}
    meta = {k[5:]: v for k, v in info.items() if k.startswith("meta.")}
    return TrajectoryRecord(t=data[:, 0], q=data[:, 1], p=data[:, 2], phi=data[:, 4],
                            dt=info.get("dt", float("nan")), seed=info.get("seed"), meta=meta)


def write_ensemble(stats: EnsembleStats, path, summary: dict | None = None) -> Path:
    """Write per-bin columns t, mean_n, var_n, mean_q2, mean_p2 plus a sidecar."""
    path = Path(path)
    _write_table(path, ENSEMBLE_COLUMNS, (stats.time_bins, stats.mean_n, stats.var_n, stats.mean_q2, stats.mean_p2))
    entries = dict(summary or {})
    entries.setdefault("seed", stats.master_seed)
    entries["count"] = stats.count
    entries["bins"] = len(stats.time_bins)
    write_summary(summary_path(path), entries)
    return path


def read_ensemble(path) -> EnsembleStats:
    path = Path(path)
    data = _read_table(path, ENSEMBLE_COLUMNS)
    info = read_summary(summary_path(path))
    return EnsembleStats(time_bins=data[:, 0], mean_n=data[:, 1], var_n=data[:, 2], mean_q2=data[:, 3],
                         mean_p2=data[:, 4], count=int(info["count"]), master_seed=int(info["seed"]))


def write_table(path, header, columns, summary: dict | None = None) -> Path:
    """Generic comma-separated table with an optional sidecar."""
    path = Path(path)
    _write_table(path, header, columns)
    if summary is not None:
        write_summary(summary_path(path), summary)
    return path


def read_table(path, header) -> np.ndarray:
    return _read_table(Path(path), header)
