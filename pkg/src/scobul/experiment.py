"""Experiment pipelines shared by the CLI, the optimizer and the scripts.

DVS protocol: train with plasticity on, then with plasticity frozen fit
receptive centres on the second segment and score predictions on the third.
Cluster protocol: train, then score cluster recognition on a frozen test
segment.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np

from scobul.config import ExperimentConfig, per_cluster, substream, to_dict
from scobul.evaluate import (
    DegenerateError,
    cluster_recognition_report,
    fit_phase_metric,
    normalized_msd,
    predict_positions,
    receptive_centers,
    truth_windows,
)
from scobul.events import EventStream, read_events, write_events
from scobul.network import Network, NetworkConfig, build_wta
from scobul.siggen import (
    ClusterSignalSpec,
    DvsConfig,
    GroundTruthLog,
    LightSpotScene,
    calibrate_thresholds,
    gen_cluster_signal,
    gen_dvs_signal,
)

log = logging.getLogger(__name__)


@dataclass
class Signal:
    kind: str
    events: EventStream
    truth: Union[GroundTruthLog, np.ndarray]  # cluster intervals or (T, 4) trajectory
    dvs: Optional[DvsConfig] = None


def network_config(cfg: ExperimentConfig, n_inputs: int, arm: Optional[str] = None, replica: int = 0) -> NetworkConfig:
    net = cfg.network
    return NetworkConfig(
        n_inputs=n_inputs,
        n_neurons=net.n_neurons,
        input_connectivity=net.input_connectivity,
        initial_resource=(net.init_resource_low, net.init_resource_high),
        inhibitory_weight=net.inhibitory_weight,
        death_silence_threshold=net.death_silence_threshold or None,
        neuron=cfg.neuron,
        plasticity=cfg.plasticity,
        stdp=cfg.stdp,
        arm=arm or cfg.arm,
        seed=cfg.seed,
        replica=replica,
    )


def cluster_spec(cfg: ExperimentConfig) -> ClusterSignalSpec:
    c = cfg.cluster
    n = c.n_clusters
    return ClusterSignalSpec.disjoint(
        c.n_nodes, c.p0, n, c.cluster_size,
        per_cluster(c.activation_prob, n), per_cluster(c.active_duration, n, int),
        per_cluster(c.extra_prob, n), seed=cfg.signal.seed,
    )


def dvs_setup(cfg: ExperimentConfig) -> tuple[LightSpotScene, DvsConfig]:
    d = cfg.dvs
    scene = LightSpotScene(d.width, d.height, d.spot_radius, (d.speed_min, d.speed_max), seed=cfg.signal.seed)
    dvs = DvsConfig(d.width, d.height, d.brightness_rate_scale, d.change_threshold, d.target_mean_rate,
                    seed=cfg.signal.seed)
    if dvs.brightness_rate_scale <= 0 or dvs.change_threshold <= 0:
        sample_rng = substream(cfg.signal.seed, "dvs-calibration")
        frames = scene.frames(scene.trajectory(d.calibration_steps, sample_rng))
        scale, thr = calibrate_thresholds(frames, dvs, rng=sample_rng)
        dvs = DvsConfig(d.width, d.height, scale, thr, d.target_mean_rate, seed=cfg.signal.seed)
    return scene, dvs


def make_signal(cfg: ExperimentConfig) -> Signal:
    kind = cfg.signal.kind
    duration = cfg.signal.duration
    rng = substream(cfg.signal.seed, "signal")
    if kind == "cluster":
        events, truth = gen_cluster_signal(cluster_spec(cfg), duration, rng)
        return Signal(kind, events, truth)
    if kind == "dvs":
        scene, dvs = dvs_setup(cfg)
        events, traj = gen_dvs_signal(scene, dvs, duration, rng)
        return Signal(kind, events, traj, dvs)
    raise ValueError(f"unknown signal kind {kind!r}")


SIGNAL_FILES = {"events": "events.csv", "cluster": "intervals.csv", "dvs": "trajectory.csv"}


def save_signal(signal: Signal, out_dir) -> dict:
    """Write events and ground truth into ``out_dir``; return the file names."""
    from scobul import persist

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_events(signal.events, out / SIGNAL_FILES["events"])
    truth = out / SIGNAL_FILES[signal.kind]
    if signal.kind == "cluster":
        persist.write_intervals(truth, signal.truth)
    else:
        persist.write_trajectory(truth, signal.truth, start=signal.events.start)
    return {"events": SIGNAL_FILES["events"], "truth": SIGNAL_FILES[signal.kind]}


def load_signal(signal_dir, kind: str) -> Signal:
    from scobul import persist

    d = Path(signal_dir)
    events = read_events(d / SIGNAL_FILES["events"])
    if kind == "cluster":
        return Signal(kind, events, persist.read_intervals(d / SIGNAL_FILES["cluster"]))
    return Signal(kind, events, persist.read_trajectory(d / SIGNAL_FILES["dvs"]))


def comparison_key(cfg: ExperimentConfig) -> str:
    """Hash of everything two runs must share to be compared across arms."""
    data = to_dict(cfg)
    kind = cfg.signal.kind
    keep = {k: data[k] for k in ("signal", "phases", kind) if k in data}
    return hashlib.sha256(json.dumps(keep, sort_keys=True).encode()).hexdigest()[:16]


def phase_bounds(cfg: ExperimentConfig, kind: str) -> dict:
    p = cfg.phases
    if kind == "dvs":
        return {"train": [0, p.train_steps], "rf": [p.train_steps, p.train_steps + p.rf_steps],
                "test": [p.train_steps + p.rf_steps, p.train_steps + p.rf_steps + p.test_steps]}
    return {"train": [0, p.train_steps], "test": [p.train_steps, p.train_steps + p.test_steps]}


def _check_length(signal: Signal, bounds: dict):
    need = max(b for _, b in bounds.values())
    if signal.events.duration < need:
        raise ValueError(f"signal covers {signal.events.duration} steps but the phases need {need}")


def run_dvs(cfg: ExperimentConfig, signal: Signal, arm: Optional[str] = None, replica: int = 0,
            network: Optional[Network] = None) -> dict:
    """Train / receptive-field / test pipeline on a light-spot signal."""
    bounds = phase_bounds(cfg, "dvs")
    _check_length(signal, bounds)
    traj = np.asarray(signal.truth)[: bounds["test"][1]]
    net = network or build_wta(network_config(cfg, signal.events.n_channels, arm, replica))
    metric = fit_phase_metric(traj)
    scaled = metric.apply(traj)
    centroid = scaled.mean(axis=0)
    ev = signal.events
    logs = {}
    for phase, plastic in (("train", True), ("rf", False), ("test", False)):
        a, b = bounds[phase]
        logs[phase] = net.run(ev.window(a, b), b - a, plasticity_on=plastic).neurons
    centers = receptive_centers(logs["rf"], traj[bounds["rf"][0]: bounds["rf"][1]], metric,
                                traj_start=bounds["rf"][0])
    a, b = bounds["test"]
    preds = predict_positions(logs["test"], centers, cfg.phases.window)
    truth = truth_windows(scaled[a:b], cfg.phases.window)
    out = {
        "arm": net.config.arm,
        "replica": replica,
        "phases": bounds,
        "spike_counts": {k: v.counts().tolist() for k, v in logs.items()},
        "receptive_centers": {str(c.neuron_id): c.center.tolist() for c in centers.centers},
        "center_support": {str(c.neuron_id): c.support for c in centers.centers},
        "silent_in_rf": centers.silent,
        "reborn": len(net.reborn),
        "phase_scale": metric.scale.tolist(),
    }
    try:
        res = normalized_msd(preds, truth, centroid)
        out.update(normalized_msd=res.value, coverage=res.coverage, n_windows=res.n_windows)
    except DegenerateError as exc:
        out.update(normalized_msd=None, coverage=0.0, n_windows=len(preds), degenerate=str(exc))
    out["network"] = net
    return out


def run_cluster(cfg: ExperimentConfig, signal: Signal, arm: Optional[str] = None, replica: int = 0,
                network: Optional[Network] = None) -> dict:
    """Train, then score cluster recognition on a frozen test segment."""
    bounds = phase_bounds(cfg, "cluster")
    _check_length(signal, bounds)
    net = network or build_wta(network_config(cfg, signal.events.n_channels, arm, replica))
    ev = signal.events
    a, b = bounds["train"]
    train = net.run(ev.window(a, b), b - a, plasticity_on=True).neurons
    a, b = bounds["test"]
    test = net.run(ev.window(a, b), b - a, plasticity_on=False).neurons
    rep = cluster_recognition_report(test, signal.truth)
    return {
        "arm": net.config.arm,
        "replica": replica,
        "phases": bounds,
        "spike_counts": {"train": train.counts().tolist(), "test": test.counts().tolist()},
        "mean_matched_f1": rep.mean_matched_f1,
        "matching": [list(m) for m in rep.matching],
        "unmatched_clusters": rep.unmatched_clusters,
        "redundant_clusters": rep.redundant_clusters,
        "ambiguous_neurons": rep.ambiguous_neurons,
        "f1": rep.f1.tolist(),
        "reborn": len(net.reborn),
        "network": net,
    }


def run_experiment(cfg: ExperimentConfig, signal: Signal, arm: Optional[str] = None, replica: int = 0) -> dict:
    if signal.kind == "dvs":
        return run_dvs(cfg, signal, arm, replica)
    return run_cluster(cfg, signal, arm, replica)
