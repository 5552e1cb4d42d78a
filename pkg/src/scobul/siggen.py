"""Input signal generators.

Two sources, each returning spikes as an :class:`EventStream` plus the
ground truth needed for scoring:

* a Poisson-cluster signal: background noise on every node, plus clusters
  of nodes that switch on at random and fire at an elevated rate for a
  fixed time;
* an emulated event camera watching a light spot move across its field.
  Each pixel has three channels: a Poisson channel with rate proportional
  to brightness, and ON/OFF channels that fire when brightness has risen or
  fallen by a threshold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, NamedTuple, Optional

import numpy as np
from numba import njit
from scipy.optimize import bisect

from scobul.events import EventStream

# -- Poisson clusters -------------------------------------------------------


@dataclass
class Cluster:
    nodes: np.ndarray
    activation_prob: float  # per timestep, while inactive
    duration: int  # timesteps
    extra_prob: float  # added spike probability while active

    def __post_init__(self):
        self.nodes = np.asarray(sorted(set(int(n) for n in self.nodes)), dtype=np.int64)
        if self.duration < 1:
            raise ValueError("cluster duration must be >= 1")
        if not 0 <= self.activation_prob <= 1:
            raise ValueError("activation_prob must be a probability")


@dataclass
class ClusterSignalSpec:
    n_nodes: int
    p0: float
    clusters: list = field(default_factory=list)
    seed: int = 0

    def __post_init__(self):
        if not 0 <= self.p0 <= 1:
            raise ValueError("p0 must be a probability")
        for i, c in enumerate(self.clusters):
            if self.p0 + c.extra_prob > 1:
                raise ValueError(f"cluster {i}: p0 + extra_prob exceeds 1")
            if len(c.nodes) and (c.nodes.min() < 0 or c.nodes.max() >= self.n_nodes):
                raise ValueError(f"cluster {i}: node id out of range")

    @classmethod
    def disjoint(cls, n_nodes, p0, n_clusters, size, activation_prob, duration, extra_prob, seed=0):
        """Clusters of ``size`` consecutive nodes: 0..size-1, size..2*size-1, ..."""
        if n_clusters * size > n_nodes:
            raise ValueError("clusters do not fit into the node range")
        as_list = lambda v: list(v) if np.ndim(v) else [v] * n_clusters  # noqa: E731
        P, T, p = as_list(activation_prob), as_list(duration), as_list(extra_prob)
        clusters = [Cluster(np.arange(i * size, (i + 1) * size), P[i], int(T[i]), p[i]) for i in range(n_clusters)]
        return cls(n_nodes, p0, clusters, seed)


@dataclass
class GroundTruthLog:
    """Activation intervals ``[start, stop)`` per cluster."""

    intervals: list  # list of (k, 2) int arrays

    @property
    def n_activations(self) -> list[int]:
        return [len(iv) for iv in self.intervals]

    def active_mask(self, i: int, duration: int, start: int = 0) -> np.ndarray:
        mask = np.zeros(duration, dtype=bool)
        for a, b in self.intervals[i]:
            mask[max(a - start, 0):max(b - start, 0)] = True
        return mask

    def clipped(self, t0: int, t1: int) -> "GroundTruthLog":
        """Intervals intersected with ``[t0, t1)``, dropping empty ones."""
        out = []
        for iv in self.intervals:
            iv = np.column_stack([np.maximum(iv[:, 0], t0), np.minimum(iv[:, 1], t1)]) if len(iv) else iv
            out.append(iv[iv[:, 1] > iv[:, 0]] if len(iv) else iv.reshape(0, 2))
        return GroundTruthLog(out)


def _activation_intervals(rng, P, length, duration):
    starts = []
    t = 0
    if P <= 0:
        return np.zeros((0, 2), np.int64)
    while True:
        t += int(rng.geometric(P)) - 1
        if t >= duration:
            break
        starts.append(t)
        t += length
    s = np.asarray(starts, np.int64)
    return np.column_stack([s, np.minimum(s + length, duration)]).astype(np.int64)


def gen_cluster_signal(spec: ClusterSignalSpec, duration: int, rng=None, chunk: int = 20_000):
    """Generate ``duration`` steps of the cluster signal.

    Each inactive cluster switches on with its per-step probability and then
    stays active for its duration; it may switch on again right after. A node
    covered by several active clusters fires with ``min(1, p0 + sum p_i)``.
    """
    rng = np.random.default_rng(spec.seed) if rng is None else rng
    intervals = [_activation_intervals(rng, c.activation_prob, c.duration, duration) for c in spec.clusters]
    truth = GroundTruthLog(intervals)
    # per-step extra probability for each cluster, expanded to nodes chunk-wise
    extra = np.zeros((len(spec.clusters), duration))
    for i, (c, iv) in enumerate(zip(spec.clusters, intervals)):
        m = truth.active_mask(i, duration)
        extra[i, m] = c.extra_prob
    member = np.zeros((len(spec.clusters), spec.n_nodes))
    for i, c in enumerate(spec.clusters):
        member[i, c.nodes] = 1.0
    parts = []
    for a in range(0, duration, chunk):
        b = min(duration, a + chunk)
        prob = np.minimum(1.0, spec.p0 + extra[:, a:b].T @ member)
        raster = rng.random((b - a, spec.n_nodes)) < prob
        parts.append(EventStream.from_raster(raster, start=a))
    if not parts:
        return EventStream.from_events([], [], spec.n_nodes, 0), truth
    return EventStream.concat(parts), truth


# -- event-camera emulation -------------------------------------------------


@dataclass
class DvsConfig:
    width: int = 20
    height: int = 20
    brightness_rate_scale: float = 0.0  # Hz per unit brightness, channel 0
    change_threshold: float = 0.0  # brightness units, ON/OFF channels
    target_mean_rate: float = 30.0  # Hz, averaged over all channels
    seed: int = 0

    @property
    def n_pixels(self) -> int:
        return self.width * self.height

    @property
    def n_channels(self) -> int:
        return 3 * self.n_pixels


def channel_index(pixel, kind):
    """Channel id of ``kind`` (0 brightness, 1 ON, 2 OFF) at flat pixel ``y*width + x``."""
    return 3 * pixel + kind


class ScenePhasePoint(NamedTuple):
    x: float
    y: float
    vx: float
    vy: float


@dataclass
class LightSpotScene:
    """A Gaussian light spot crossing the field on straight segments.

    When the spot centre leaves the field a new segment starts from a random
    point on a random border, heading inward within 60 degrees of the
    normal, at a speed drawn uniformly from ``speed_range`` (pixels/ms).
    """

    width: int
    height: int
    spot_radius: float = 1.5
    speed_range: tuple = (0.02, 0.05)
    seed: int = 0

    def __post_init__(self):
        lo, hi = self.speed_range
        if not 0 < lo <= hi:
            raise ValueError("speed_range must satisfy 0 < low <= high")
        if not 0 < self.spot_radius < min(self.width, self.height) / 2:
            raise ValueError("spot_radius must be positive and below half the field size")
        gx, gy = np.meshgrid(np.arange(self.width) + 0.5, np.arange(self.height) + 0.5)
        self._px = gx.ravel()
        self._py = gy.ravel()

    def _respawn(self, rng):
        side = rng.integers(4)
        u = rng.random()
        W, H = float(self.width), float(self.height)
        top = np.nextafter(W, 0.0), np.nextafter(H, 0.0)
        x, y, normal = {
            0: (0.0, u * H, 0.0),
            1: (top[0], u * H, math.pi),
            2: (u * W, 0.0, math.pi / 2),
            3: (u * W, top[1], -math.pi / 2),
        }[int(side)]
        ang = normal + rng.uniform(-math.pi / 3, math.pi / 3)
        speed = rng.uniform(*self.speed_range)
        return x, y, speed * math.cos(ang), speed * math.sin(ang)

    def trajectory(self, duration: int, rng=None) -> np.ndarray:
        """Phase points (x, y, vx, vy) for each step, shape (duration, 4)."""
        rng = np.random.default_rng(self.seed) if rng is None else rng
        out = np.empty((duration, 4))
        x, y, vx, vy = self._respawn(rng)
        for t in range(duration):
            out[t] = x, y, vx, vy
            x += vx
            y += vy
            if not (0 <= x < self.width and 0 <= y < self.height):
                x, y, vx, vy = self._respawn(rng)
        return out

    def frames(self, trajectory: np.ndarray) -> np.ndarray:
        """Brightness in [0, 1] per pixel, shape (len(trajectory), width*height)."""
        dx = self._px[None, :] - trajectory[:, :1]
        dy = self._py[None, :] - trajectory[:, 1:2]
        return np.exp(-(dx * dx + dy * dy) / (2 * self.spot_radius ** 2))

    def stream(self, duration: int, rng=None) -> Iterator[tuple[np.ndarray, ScenePhasePoint]]:
        traj = self.trajectory(duration, rng)
        for a in range(0, duration, 4096):
            fr = self.frames(traj[a:a + 4096])
            for row, p in zip(fr, traj[a:a + 4096]):
                yield row, ScenePhasePoint(*p)


def light_spot_scene(dvs_config: DvsConfig, spot_radius, speed_range, duration, seed=None):
    """Trajectory and frames of a light-spot scene as ``(frames, trajectory)``."""
    scene = LightSpotScene(dvs_config.width, dvs_config.height, spot_radius, speed_range,
                           dvs_config.seed if seed is None else seed)
    traj = scene.trajectory(duration)
    return scene.frames(traj), traj


@njit(cache=True)
def _change_events(frames, prev, acc, thr, on, off):
    T, P = frames.shape
    for t in range(T):
        for p in range(P):
            acc[p] += frames[t, p] - prev[p]
            if acc[p] >= thr:
                on[t, p] = True
                acc[p] -= thr
            elif acc[p] <= -thr:
                off[t, p] = True
                acc[p] += thr
            prev[p] = frames[t, p]


class DvsEncoder:
    """Stateful frame-to-spike converter.

    The ON/OFF channels share one signed accumulator per pixel holding the
    brightness change since the last emitted event; it emits at most one
    event per step and moves one threshold back towards zero each time.
    """

    def __init__(self, config: DvsConfig, rng=None):
        if config.change_threshold <= 0:
            raise ValueError("change_threshold must be positive")
        self.config = config
        self.rng = np.random.default_rng(config.seed) if rng is None else rng
        self.acc = np.zeros(config.n_pixels)
        self.prev: Optional[np.ndarray] = None

    def encode(self, frames: np.ndarray, start: int = 0) -> EventStream:
        """Spikes for consecutive ``frames`` (shape (T, n_pixels)) from step ``start``."""
        cfg = self.config
        T = len(frames)
        raster = np.zeros((T, cfg.n_pixels, 3), dtype=bool)
        p1 = np.minimum(1.0, cfg.brightness_rate_scale * frames * 1e-3)
        raster[:, :, 0] = self.rng.random(frames.shape) < p1
        prev = (frames[0] if self.prev is None else self.prev).copy()
        on = np.zeros((T, cfg.n_pixels), dtype=bool)
        off = np.zeros_like(on)
        _change_events(frames, prev, self.acc, cfg.change_threshold, on, off)
        raster[:, :, 1] = on
        raster[:, :, 2] = off
        self.prev = prev
        return EventStream.from_raster(raster.reshape(T, -1), start=start)


def dvs_frame_to_events(prev_frame, cur_frame, encoder: DvsEncoder, t: int) -> set[int]:
    """Spike set of step ``t`` given the previous and current frame."""
    if prev_frame is not None:
        encoder.prev = np.asarray(prev_frame, dtype=float)
    return set(encoder.encode(np.asarray(cur_frame, dtype=float)[None, :], start=t).channels.tolist())


class CalibrationError(RuntimeError):
    pass


def change_event_rate(frames: np.ndarray, threshold: float) -> float:
    """Mean ON+OFF event rate (Hz per ON/OFF channel) of a deterministic frame sequence."""
    P = frames.shape[1]
    acc = np.zeros(P)
    on = np.zeros(frames.shape, dtype=bool)
    off = np.zeros_like(on)
    _change_events(frames, frames[0].copy(), acc, threshold, on, off)
    return (on.sum() + off.sum()) / (2 * P * len(frames)) * 1000.0


def calibrate_thresholds(frames: np.ndarray, config: DvsConfig, rng=None, tol: float = 0.1):
    """Pick ``(brightness_rate_scale, change_threshold)`` for a target mean rate.

    Both channel groups are tuned to the target separately: the brightness
    scale follows in closed form from the mean brightness, the change
    threshold by bisection on the ON/OFF event rate. The result is checked
    on a simulated encoding of ``frames``; the mean over all channels must
    land within ``tol`` of the target.
    """
    target = config.target_mean_rate
    if not target > 0:
        raise CalibrationError("target mean rate must be positive")
    if len(frames) < 2:
        raise CalibrationError("need at least two frames to calibrate")
    mean_b = float(frames.mean())
    if mean_b <= 0:
        raise CalibrationError("scene is dark everywhere; brightness channel cannot reach the target")
    scale = target / mean_b
    if scale * frames.max() * 1e-3 > 1:
        raise CalibrationError(f"brightness scale {scale:.1f} Hz saturates the per-step spike probability")
    swing = float(np.abs(np.diff(frames, axis=0)).max())
    if swing <= 0:
        raise CalibrationError("scene is static; ON/OFF channels emit nothing")
    lo, hi = 1e-6, float(np.abs(np.diff(frames, axis=0)).sum(axis=0).max()) + 1.0
    f = lambda thr: change_event_rate(frames, thr) - target  # noqa: E731
    if f(lo) < 0:
        raise CalibrationError(f"ON/OFF rate tops out at {f(lo) + target:.2f} Hz below the target {target} Hz")
    thr = bisect(f, lo, hi, xtol=1e-9, maxiter=200)
    # bisect lands on a jump of a step function; take the side nearer the target
    cands = [thr, thr * (1 + 1e-6), thr * (1 - 1e-6)]
    thr = min(cands, key=lambda v: abs(f(v)))
    cal = DvsConfig(config.width, config.height, scale, thr, target, config.seed)
    achieved = DvsEncoder(cal, np.random.default_rng(0) if rng is None else rng).encode(frames).mean_rate_hz()
    if abs(achieved - target) > tol * target:
        raise CalibrationError(f"calibrated mean rate {achieved:.2f} Hz is outside +-{tol:.0%} of {target} Hz")
    return scale, thr


def gen_dvs_signal(scene: LightSpotScene, config: DvsConfig, duration: int, rng=None, chunk: int = 20_000):
    """Encode ``duration`` steps of ``scene``; returns ``(events, trajectory)``."""
    rng = np.random.default_rng(config.seed) if rng is None else rng
    traj = scene.trajectory(duration, rng)
    enc = DvsEncoder(config, rng)
    parts = [enc.encode(scene.frames(traj[a:a + chunk]), start=a) for a in range(0, duration, chunk)]
    return EventStream.concat(parts), traj
