"""On-disk formats for signals, results and run manifests.

Text tables start with a ``# scobul-<kind> v<N>`` line, then a commented
``key=value`` metadata line, then a CSV header. JSON files are written with
sorted keys and no timestamps, so identical runs give identical bytes.
"""

from __future__ import annotations

import hashlib
import io
import json
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from scobul.config import SCHEMA_VERSION
from scobul.siggen import GroundTruthLog

TRAJECTORY_COLUMNS = ("t", "x", "y", "vx", "vy")


class SchemaError(ValueError):
    """A file is not in the expected format or has an unsupported version."""


def _default(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, default=_default) + "\n"


def write_json(path, obj) -> Path:
    path = Path(path)
    path.write_text(dumps(obj))
    return path


def read_json(path, kind: str | None = None) -> dict:
    data = json.loads(Path(path).read_text())
    if data.get("schema") != SCHEMA_VERSION:
        raise SchemaError(f"{path}: schema {data.get('schema')!r}, expected {SCHEMA_VERSION}")
    if kind is not None and data.get("kind") != kind:
        raise SchemaError(f"{path}: expected a {kind} file, found {data.get('kind')!r}")
    return data


# -- delimited tables ---------------------------------------------------------


def _write_table(path, kind: str, meta: dict, columns: Iterable[str], rows: np.ndarray, fmt) -> Path:
    buf = io.StringIO()
    buf.write(f"# scobul-{kind} v{SCHEMA_VERSION}\n")
    buf.write("# " + " ".join(f"{k}={v}" for k, v in meta.items()) + "\n")
    buf.write(",".join(columns) + "\n")
    if len(rows):
        np.savetxt(buf, rows, fmt=fmt, delimiter=",")
    path = Path(path)
    path.write_text(buf.getvalue())
    return path


def _read_table(path, kind: str, columns: Iterable[str]) -> tuple[dict, np.ndarray]:
    with open(path) as fh:
        magic = fh.readline().rstrip("\n")
        if not magic.startswith(f"# scobul-{kind} "):
            raise SchemaError(f"{path}: not a {kind} file")
        if magic != f"# scobul-{kind} v{SCHEMA_VERSION}":
            raise SchemaError(f"{path}: schema mismatch ({magic!r})")
        meta = dict(kv.split("=", 1) for kv in fh.readline().lstrip("# ").split())
        header = fh.readline().strip()
        if header != ",".join(columns):
            raise SchemaError(f"{path}: unexpected columns {header!r}")
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", UserWarning)  # empty body
            rows = np.loadtxt(fh, delimiter=",", ndmin=2)
    return meta, rows.reshape(-1, len(tuple(columns)))


def write_trajectory(path, trajectory: np.ndarray, start: int = 0) -> Path:
    traj = np.asarray(trajectory, dtype=float)
    t = np.arange(start, start + len(traj))
    rows = np.column_stack([t, traj]) if len(traj) else np.zeros((0, 5))
    return _write_table(path, "trajectory", {"start": start, "steps": len(traj)}, TRAJECTORY_COLUMNS, rows,
                        ["%d"] + ["%.17g"] * 4)


def read_trajectory(path) -> np.ndarray:
    _, rows = _read_table(path, "trajectory", TRAJECTORY_COLUMNS)
    return rows[:, 1:]


def write_intervals(path, truth: GroundTruthLog) -> Path:
    rows = [(i, a, b) for i, iv in enumerate(truth.intervals) for a, b in iv]
    return _write_table(path, "intervals", {"clusters": len(truth.intervals)}, ("cluster", "start", "stop"),
                        np.array(rows, dtype=np.int64).reshape(-1, 3), "%d")


def read_intervals(path) -> GroundTruthLog:
    meta, rows = _read_table(path, "intervals", ("cluster", "start", "stop"))
    rows = rows.astype(np.int64)
    return GroundTruthLog([rows[rows[:, 0] == i, 1:] for i in range(int(meta["clusters"]))])


HISTORY_COLUMNS = ("generation", "best", "mean", "worst", "best_so_far", "n_penalized")


def write_history(path, history, arm: str, compat: str = "-") -> Path:
    """One row per generation; ``compat`` tags which runs may be compared."""
    rows = np.array([tuple(h) for h in history], dtype=float).reshape(-1, len(HISTORY_COLUMNS))
    meta = {"arm": arm, "compat": compat, "generations": len(rows)}
    return _write_table(path, "history", meta, HISTORY_COLUMNS, rows,
                        ["%d", "%.17g", "%.17g", "%.17g", "%.17g", "%d"])


def read_history(path) -> tuple[dict, np.ndarray]:
    return _read_table(path, "history", HISTORY_COLUMNS)


# -- manifests ----------------------------------------------------------------


@dataclass
class RunManifest:
    """Everything needed to replay a run: config, seeds, inputs and phases."""

    command: str
    config: dict
    seeds: dict
    input_hash: str
    phases: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    inputs: dict = field(default_factory=dict)
    arm: str = ""
    schema: int = SCHEMA_VERSION
    kind: str = "manifest"

    def write(self, path) -> Path:
        return write_json(path, asdict(self))

    @classmethod
    def read(cls, path) -> "RunManifest":
        return cls(**read_json(path, "manifest"))


def input_hash(config: dict, *files) -> str:
    h = hashlib.sha256(json.dumps(config, sort_keys=True, default=_default).encode())
    for p in files:
        h.update(Path(p).read_bytes())
    return h.hexdigest()
