"""Scoring of trained networks.

Light-spot task: each neuron's receptive centre is the mean (scaled) phase
point at the moments it fired; a test window's prediction is the
spike-count-weighted mean of the centres; the error is normalized by the
spread of the true positions around the whole-run centroid, so always
predicting the centroid scores 1.

Cluster task: precision/recall/F1 for every neuron-cluster pair and a
greedy one-to-one matching.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from scobul.events import EventStream
from scobul.siggen import GroundTruthLog


class DegenerateError(ValueError):
    """Raised when a score is undefined (no variance, no predictions)."""


@dataclass
class PhaseMetric:
    scale: np.ndarray  # reciprocal std per phase coordinate

    def apply(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(points, dtype=float) * self.scale


def fit_phase_metric(trajectory) -> PhaseMetric:
    traj = np.asarray(trajectory, dtype=float)
    if traj.ndim != 2 or len(traj) == 0:
        raise DegenerateError("empty trajectory")
    sd = traj.std(axis=0)
    if np.any(sd <= 0):
        bad = [int(i) for i in np.flatnonzero(sd <= 0)]
        raise DegenerateError(f"phase coordinate(s) {bad} have zero variance")
    return PhaseMetric(1.0 / sd)


class ReceptiveCenter(NamedTuple):
    neuron_id: int
    center: np.ndarray
    support: int


@dataclass
class CenterReport:
    centers: list
    silent: list  # neuron ids with no spikes in the segment

    def as_array(self, n_neurons: int) -> tuple[np.ndarray, np.ndarray]:
        """``(centers, valid)`` with NaN rows for silent neurons."""
        dim = len(self.centers[0].center) if self.centers else 4
        out = np.full((n_neurons, dim), np.nan)
        valid = np.zeros(n_neurons, dtype=bool)
        for c in self.centers:
            out[c.neuron_id] = c.center
            valid[c.neuron_id] = True
        return out, valid


def receptive_centers(spikes: EventStream, trajectory, metric: PhaseMetric,
                      traj_start: int = 0) -> CenterReport:
    """Spike-triggered mean of the scaled phase point, per neuron.

    ``trajectory[i]`` is the phase point at absolute step ``traj_start + i``.
    """
    scaled = metric.apply(trajectory)
    t = spikes.times() - traj_start
    j = spikes.channels
    N = spikes.n_channels
    counts = np.bincount(j, minlength=N)
    sums = np.zeros((N, scaled.shape[1]))
    np.add.at(sums, j, scaled[t])
    centers = [ReceptiveCenter(int(n), sums[n] / counts[n], int(counts[n])) for n in range(N) if counts[n] > 0]
    silent = [int(n) for n in range(N) if counts[n] == 0]
    return CenterReport(centers, silent)


def window_counts(spikes: EventStream, window: int) -> np.ndarray:
    """Spike counts per (window, neuron); a trailing partial window is dropped."""
    n_win = spikes.duration // window
    t = spikes.times() - spikes.start
    keep = t < n_win * window
    out = np.zeros((n_win, spikes.n_channels), dtype=np.int64)
    np.add.at(out, (t[keep] // window, spikes.channels[keep]), 1)
    return out


def predict_positions(spikes: EventStream, centers: CenterReport, window: int = 40) -> list:
    """Spike-weighted mean of receptive centres per window, ``None`` if silent.

    Spikes from neurons without a receptive centre are ignored.
    """
    C, valid = centers.as_array(spikes.n_channels)
    counts = window_counts(spikes, window)[:, valid].astype(float)
    Cv = C[valid]
    tot = counts.sum(axis=1)
    out = []
    for w in range(len(counts)):
        if tot[w] == 0:
            out.append((w, None))
        else:
            out.append((w, counts[w] @ Cv / tot[w]))
    return out


def truth_windows(scaled_trajectory: np.ndarray, window: int) -> np.ndarray:
    n = len(scaled_trajectory) // window
    return scaled_trajectory[: n * window].reshape(n, window, -1).mean(axis=1)


class MsdResult(NamedTuple):
    value: float
    coverage: float
    n_windows: int


def normalized_msd(predictions, truth: np.ndarray, centroid: np.ndarray) -> MsdResult:
    """Mean squared prediction error over the windows that have a prediction,
    divided by the mean squared distance of the true points to ``centroid``
    over the same windows.
    """
    truth = np.asarray(truth, dtype=float)
    idx = [w for w, p in predictions if p is not None]
    if not idx:
        raise DegenerateError("no window has a prediction")
    P = np.array([p for _, p in predictions if p is not None])
    Tw = truth[idx]
    num = np.mean(np.sum((P - Tw) ** 2, axis=1))
    den = np.mean(np.sum((Tw - centroid) ** 2, axis=1))
    if den <= 0:
        raise DegenerateError("true positions do not vary over the predicted windows")
    return MsdResult(float(num / den), len(idx) / len(predictions), len(predictions))


# -- cluster recognition ----------------------------------------------------


@dataclass
class ClusterReport:
    precision: np.ndarray  # (n_neurons, n_clusters)
    recall: np.ndarray
    f1: np.ndarray
    matching: list  # (cluster, neuron, f1), greedy by F1
    unmatched_clusters: list = field(default_factory=list)
    redundant_clusters: list = field(default_factory=list)
    ambiguous_neurons: list = field(default_factory=list)

    @property
    def mean_matched_f1(self) -> float:
        n_clusters = self.f1.shape[1]
        return float(sum(f for _, _, f in self.matching) / n_clusters) if n_clusters else 0.0


def cluster_recognition_report(spikes: EventStream, truth: GroundTruthLog,
                               high_f1: float = 0.5) -> ClusterReport:
    """Score each neuron as a detector of each cluster.

    Recall is the fraction of the cluster's activations containing at least
    one spike of the neuron; precision the fraction of the neuron's spikes
    that fall inside the cluster's activity. ``high_f1`` sets the bar for
    the redundancy/ambiguity flags.
    """
    N = spikes.n_channels
    M = len(truth.intervals)
    truth = truth.clipped(spikes.start, spikes.stop)
    t = spikes.times()
    j = spikes.channels
    n_spk = np.bincount(j, minlength=N)
    precision = np.zeros((N, M))
    recall = np.zeros((N, M))
    for i, iv in enumerate(truth.intervals):
        if len(iv) == 0:
            continue
        mask = truth.active_mask(i, spikes.duration, spikes.start)
        inside = mask[t - spikes.start]
        precision[:, i] = np.divide(np.bincount(j[inside], minlength=N), n_spk,
                                    out=np.zeros(N), where=n_spk > 0)
        # which activation interval each spike falls into (or -1)
        k = np.searchsorted(iv[:, 0], t, side="right") - 1
        ok = (k >= 0) & (t < iv[np.maximum(k, 0), 1])
        hit = np.zeros((N, len(iv)), dtype=bool)
        hit[j[ok], k[ok]] = True
        recall[:, i] = hit.mean(axis=1)
    denom = precision + recall
    f1 = np.divide(2 * precision * recall, denom, out=np.zeros_like(denom), where=denom > 0)
    matching = []
    used_n, used_c = set(), set()
    order = sorted(((f1[n, c], -c, -n) for n in range(N) for c in range(M)), reverse=True)
    for f, c, n in order:
        c, n = -c, -n
        if f <= 0 or n in used_n or c in used_c:
            continue
        matching.append((c, n, float(f)))
        used_n.add(n)
        used_c.add(c)
    matching.sort()
    high = f1 >= high_f1
    return ClusterReport(
        precision, recall, f1, matching,
        unmatched_clusters=[c for c in range(M) if c not in used_c],
        redundant_clusters=[c for c in range(M) if high[:, c].sum() >= 2],
        ambiguous_neurons=[n for n in range(N) if high[n].sum() >= 2],
    )
