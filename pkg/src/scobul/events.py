"""Spike event streams and their on-disk text format.

An event file is plain text::

    # scobul-events v1
    # channels=300 duration=300000
    t,source
    0,17
    0,203
    1,5

Events are sorted by (t, source). The reader/writer pair is byte-stable:
writing what was read reproduces the file exactly.
"""

from __future__ import annotations

import io
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

EVENT_SCHEMA = 1
_MAGIC = f"# scobul-events v{EVENT_SCHEMA}"


class EventFileError(ValueError):
    pass


@dataclass
class EventStream:
    """Spikes of ``n_channels`` sources over ``duration`` timesteps, CSR by time.

    Spikes of step ``t`` (``start <= t < start + duration``) are
    ``channels[indptr[t - start]:indptr[t - start + 1]]``.
    """

    n_channels: int
    indptr: np.ndarray
    channels: np.ndarray
    start: int = 0

    @property
    def duration(self) -> int:
        return len(self.indptr) - 1

    @property
    def stop(self) -> int:
        return self.start + self.duration

    def __len__(self):
        return len(self.channels)

    @classmethod
    def from_events(cls, t, source, n_channels: int, duration: int, start: int = 0) -> "EventStream":
        t = np.asarray(t, dtype=np.int64)
        source = np.asarray(source, dtype=np.int32)
        if len(t) and (t.min() < start or t.max() >= start + duration):
            raise ValueError("event time outside stream range")
        if len(source) and (source.min() < 0 or source.max() >= n_channels):
            raise ValueError("event source outside channel range")
        order = np.lexsort((source, t))
        t, source = t[order], source[order]
        counts = np.bincount(t - start, minlength=duration)
        indptr = np.zeros(duration + 1, dtype=np.int64)
        np.cumsum(counts, out=indptr[1:])
        return cls(n_channels, indptr, source, start)

    @classmethod
    def from_raster(cls, raster: np.ndarray, start: int = 0) -> "EventStream":
        """Build from a boolean (duration, n_channels) array."""
        t, ch = np.nonzero(raster)
        return cls.from_events(t + start, ch, raster.shape[1], raster.shape[0], start)

    @classmethod
    def from_sets(cls, sets, n_channels: int, start: int = 0) -> "EventStream":
        ts, chs = [], []
        n = 0
        for i, s in enumerate(sets):
            for c in sorted(s):
                ts.append(start + i)
                chs.append(c)
            n = i + 1
        return cls.from_events(ts, chs, n_channels, n, start)

    @classmethod
    def concat(cls, parts) -> "EventStream":
        parts = list(parts)
        for a, b in zip(parts, parts[1:]):
            if a.stop != b.start or a.n_channels != b.n_channels:
                raise ValueError("streams are not contiguous")
        indptr = [parts[0].indptr]
        offset = parts[0].indptr[-1]
        for p in parts[1:]:
            indptr.append(p.indptr[1:] + offset)
            offset += p.indptr[-1]
        return cls(parts[0].n_channels, np.concatenate(indptr),
                   np.concatenate([p.channels for p in parts]), parts[0].start)

    def times(self) -> np.ndarray:
        return self.start + np.repeat(np.arange(self.duration, dtype=np.int64), np.diff(self.indptr))

    def at(self, t: int) -> np.ndarray:
        r = t - self.start
        return self.channels[self.indptr[r]:self.indptr[r + 1]]

    def __iter__(self):
        for t in range(self.start, self.stop):
            yield set(self.at(t).tolist())

    def window(self, t0: int, t1: int) -> "EventStream":
        """Sub-stream covering ``[t0, t1)`` in absolute time."""
        if t0 < self.start or t1 > self.stop or t1 < t0:
            raise ValueError(f"window [{t0}, {t1}) outside stream [{self.start}, {self.stop})")
        a, b = t0 - self.start, t1 - self.start
        ptr = self.indptr[a:b + 1]
        return EventStream(self.n_channels, ptr - ptr[0], self.channels[ptr[0]:ptr[-1]], t0)

    def counts(self) -> np.ndarray:
        """Per-channel spike counts."""
        return np.bincount(self.channels, minlength=self.n_channels)

    def mean_rate_hz(self) -> float:
        return len(self.channels) / (self.n_channels * self.duration) * 1000.0

    def __eq__(self, other):
        return (isinstance(other, EventStream) and self.n_channels == other.n_channels
                and self.start == other.start and np.array_equal(self.indptr, other.indptr)
                and np.array_equal(self.channels, other.channels))


def write_events(stream: EventStream, path) -> None:
    buf = io.StringIO()
    buf.write(f"{_MAGIC}\n# channels={stream.n_channels} duration={stream.duration} start={stream.start}\nt,source\n")
    t = stream.times()
    if len(t):
        np.savetxt(buf, np.column_stack([t, stream.channels]), fmt="%d", delimiter=",")
    Path(path).write_text(buf.getvalue())


def read_events(path) -> EventStream:
    with open(path) as fh:
        magic = fh.readline().rstrip("\n")
        if not magic.startswith("# scobul-events"):
            raise EventFileError(f"{path}: not an event file")
        if magic != _MAGIC:
            raise EventFileError(f"{path}: schema mismatch ({magic!r}, expected {_MAGIC!r})")
        meta = dict(kv.split("=") for kv in fh.readline().lstrip("# ").split())
        if fh.readline().strip() != "t,source":
            raise EventFileError(f"{path}: missing column header")
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", UserWarning)  # empty body
            data = np.loadtxt(fh, dtype=np.int64, delimiter=",", ndmin=2)
    n_ch, duration, start = int(meta["channels"]), int(meta["duration"]), int(meta.get("start", 0))
    if data.size == 0:
        data = np.zeros((0, 2), dtype=np.int64)
    return EventStream.from_events(data[:, 0], data[:, 1], n_ch, duration, start)
