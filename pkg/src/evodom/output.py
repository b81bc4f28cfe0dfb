"""Byte-stable CSV/JSON writers and the trajectory-schema CSV reader.

Floats are written as Python's shortest round-trip ``repr``, lines end in
``\\n``, and nothing time- or locale-dependent is emitted, so identical runs
produce identical files.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError

TRAJECTORY_HEADER = ("t", "y", "v1", "v2", "x", "u1", "u2")


def fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) for v in row) + "\n")


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, Path):
        return str(obj)
    return obj


def write_json(path: Path, doc: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(json.dumps(_plain(doc), indent=2) + "\n")


def read_trajectory_csv(path: Path) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Read a trajectory-schema CSV into ``(times, y, v1, v2)``.

    ``v1``/``v2`` are ``(len(times), len(y))``; every snapshot must list the
    same nodes in ascending order.
    """
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read: {exc.strerror}") from None
    if not lines or tuple(h.strip() for h in lines[0].split(",")) != TRAJECTORY_HEADER:
        raise ConfigError(f"{path}:1: header must be {','.join(TRAJECTORY_HEADER)}")
    rows = []
    for number, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != len(TRAJECTORY_HEADER):
            raise ConfigError(f"{path}:{number}: expected {len(TRAJECTORY_HEADER)} fields, got {len(parts)}")
        try:
            rows.append([float(p) for p in parts])
        except ValueError:
            raise ConfigError(f"{path}:{number}: non-numeric field") from None
    if not rows:
        raise ConfigError(f"{path}: no data rows")
    data = np.array(rows)
    times = np.unique(data[:, 0])
    nodes = data[data[:, 0] == times[0], 1]
    S, J = times.size, nodes.size
    if data.shape[0] != S * J:
        raise ConfigError(f"{path}: snapshots do not all have {J} nodes")
    data = data.reshape(S, J, len(TRAJECTORY_HEADER))
    if np.any(data[:, :, 0] != times[:, None]) or np.any(data[:, :, 1] != nodes[None, :]):
        raise ConfigError(f"{path}: rows must be grouped by time with the same ascending nodes")
    if np.any(np.diff(nodes) <= 0):
        raise ConfigError(f"{path}: nodes must be strictly ascending")
    return times, nodes, data[:, :, 2], data[:, :, 3]
