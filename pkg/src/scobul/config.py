"""Run configuration: dataclasses, INI loading and seed splitting.

Configuration files are INI files with one section per subsystem. Every
field of the dataclasses below is addressable as ``section.key``; the
search space of the optimizer uses the same dotted names.

Randomness flows from one root seed. :func:`substream` derives an
independent generator per named consumer (``"signal"``, ``"topology/0"``,
``"ga"``, ...) by feeding ``[root, crc32(name)]`` to numpy's SeedSequence,
so each subsystem is reproducible on its own.
"""

from __future__ import annotations

import configparser
import dataclasses
import hashlib
import json
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np

from scobul.core import NeuronParams, PlasticityParams, RenormMode
from scobul.plasticity import StdpBaselineParams

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    """Malformed or incomplete configuration; ``key`` names the culprit."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


def substream(root_seed: int, name: str) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(root_seed), zlib.crc32(name.encode())]))


@dataclass
class NetworkParams:
    n_neurons: int = 20
    input_connectivity: float = 1.0
    init_resource_low: float = 0.0
    init_resource_high: float = 1.0
    inhibitory_weight: float = -5.0
    death_silence_threshold: int = 0  # 0 disables death/rebirth


@dataclass
class ClusterParams:
    """Poisson-cluster signal with disjoint clusters of consecutive nodes.

    The per-cluster fields accept a scalar (applied to all clusters) or a
    comma-separated list with one entry per cluster.
    """

    n_nodes: int = 100
    p0: float = 0.005
    n_clusters: int = 5
    cluster_size: int = 10
    activation_prob: str = "0.002"
    active_duration: str = "200"
    extra_prob: str = "0.045"


@dataclass
class DvsParams:
    width: int = 10
    height: int = 10
    spot_radius: float = 1.5
    speed_min: float = 0.02
    speed_max: float = 0.05
    target_mean_rate: float = 30.0
    # 0 means "calibrate on a sample of the scene"
    brightness_rate_scale: float = 0.0
    change_threshold: float = 0.0
    calibration_steps: int = 20_000


@dataclass
class SignalParams:
    kind: str = ""
    duration: int = 0
    seed: int = 0


@dataclass
class PhaseParams:
    train_steps: int = 200_000
    rf_steps: int = 60_000
    test_steps: int = 40_000
    window: int = 40
    min_coverage: float = 0.5


@dataclass
class GaParams:
    population: int = 20
    mutation_prob: float = 0.5
    elitism_frac: float = 0.1
    seeds_per_fitness: int = 2
    max_generations: int = 8
    tournament_size: int = 2
    seed: int = 0


@dataclass
class ExperimentConfig:
    seed: int = 0
    arm: str = "scobul"
    network: NetworkParams = field(default_factory=NetworkParams)
    neuron: NeuronParams = field(default_factory=NeuronParams)
    plasticity: PlasticityParams = field(default_factory=PlasticityParams)
    stdp: StdpBaselineParams = field(default_factory=StdpBaselineParams)
    signal: SignalParams = field(default_factory=SignalParams)
    cluster: ClusterParams = field(default_factory=ClusterParams)
    dvs: DvsParams = field(default_factory=DvsParams)
    phases: PhaseParams = field(default_factory=PhaseParams)
    ga: GaParams = field(default_factory=GaParams)
    search: dict = field(default_factory=dict)  # arm -> list of (name, low, high, scale)

    def replace(self, **overrides: Any) -> "ExperimentConfig":
        """Copy with dotted-name overrides, e.g. ``{"neuron.threshold": 2.0}``."""
        cfg = from_dict(to_dict(self))
        for name, value in overrides.items():
            set_value(cfg, name, value)
        return cfg


SECTIONS = ("network", "neuron", "plasticity", "stdp", "signal", "cluster", "dvs", "phases", "ga")
REQUIRED = ("signal.kind", "signal.duration")


def _coerce(kind, raw, key):
    try:
        if kind is bool:
            if isinstance(raw, str):
                return raw.strip().lower() in ("1", "true", "yes", "on")
            return bool(raw)
        if kind is int:
            return int(round(float(raw)))
        if kind is float:
            return float(raw)
        if kind is RenormMode:
            return RenormMode(raw)
        return str(raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(key, f"cannot parse {raw!r}: {exc}") from None


def _field_types(obj) -> dict:
    hints = {"int": int, "float": float, "str": str, "bool": bool, "RenormMode": RenormMode}
    return {f.name: hints.get(f.type if isinstance(f.type, str) else f.type.__name__, str)
            for f in dataclasses.fields(obj)}


def set_value(cfg: ExperimentConfig, name: str, value):
    if "." not in name:
        if name not in ("seed", "arm"):
            raise ConfigError(name, "unknown key")
        setattr(cfg, name, _coerce(int if name == "seed" else str, value, name))
        return
    section, key = name.split(".", 1)
    if section not in SECTIONS:
        raise ConfigError(name, "unknown section")
    obj = getattr(cfg, section)
    types = _field_types(obj)
    if key not in types:
        raise ConfigError(name, "unknown key")
    setattr(obj, key, _coerce(types[key], value, name))
    try:
        obj.__post_init__() if hasattr(obj, "__post_init__") else None
    except ValueError as exc:
        raise ConfigError(name, str(exc)) from None


def get_value(cfg: ExperimentConfig, name: str):
    if "." not in name:
        return getattr(cfg, name)
    section, key = name.split(".", 1)
    return getattr(getattr(cfg, section), key)


def to_dict(cfg: ExperimentConfig) -> dict:
    out = {"seed": cfg.seed, "arm": cfg.arm, "schema": SCHEMA_VERSION}
    for s in SECTIONS:
        d = dataclasses.asdict(getattr(cfg, s))
        out[s] = {k: (v.value if isinstance(v, RenormMode) else v) for k, v in d.items()}
    out["search"] = {arm: [list(e) for e in entries] for arm, entries in sorted(cfg.search.items())}
    return out


def from_dict(data: dict) -> ExperimentConfig:
    cfg = ExperimentConfig()
    for key in ("seed", "arm"):
        if key in data:
            set_value(cfg, key, data[key])
    for s in SECTIONS:
        for k, v in data.get(s, {}).items():
            set_value(cfg, f"{s}.{k}", v)
    cfg.search = {arm: [tuple(e) for e in entries] for arm, entries in data.get("search", {}).items()}
    return cfg


def config_hash(cfg: ExperimentConfig) -> str:
    blob = json.dumps(to_dict(cfg), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()


def _parse_search(section: configparser.SectionProxy, arm: str) -> list:
    entries = []
    for name, spec in section.items():
        parts = [p.strip() for p in spec.split(",")]
        if len(parts) not in (2, 3):
            raise ConfigError(f"search.{arm}.{name}", "expected 'low, high[, linear|log]'")
        scale = parts[2] if len(parts) == 3 else "linear"
        if scale not in ("linear", "log"):
            raise ConfigError(f"search.{arm}.{name}", f"unknown scale {scale!r}")
        entries.append((name, float(parts[0]), float(parts[1]), scale))
    return entries


def load_config(path, require=REQUIRED) -> ExperimentConfig:
    """Read an INI config file into an :class:`ExperimentConfig`."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    parser.optionxform = str  # keep D_plus etc. case-sensitive
    if not parser.read(path):
        raise ConfigError(str(path), "file not found or unreadable")
    cfg = ExperimentConfig()
    for section in parser.sections():
        if section == "run":
            for k, v in parser[section].items():
                set_value(cfg, k, v)
        elif section.startswith("search."):
            arm = section.split(".", 1)[1]
            cfg.search[arm] = _parse_search(parser[section], arm)
        elif section in SECTIONS:
            for k, v in parser[section].items():
                set_value(cfg, f"{section}.{k}", v)
        else:
            raise ConfigError(section, "unknown section")
    for key in require:
        section, name = key.split(".")
        if not parser.has_option(section, name):
            raise ConfigError(key, "missing required key")
    return cfg


def dump_config(cfg: ExperimentConfig, path: Optional[Path] = None) -> str:
    lines = ["[run]", f"seed = {cfg.seed}", f"arm = {cfg.arm}", ""]
    data = to_dict(cfg)
    for s in SECTIONS:
        lines.append(f"[{s}]")
        lines.extend(f"{k} = {v}" for k, v in data[s].items())
        lines.append("")
    for arm, entries in sorted(cfg.search.items()):
        lines.append(f"[search.{arm}]")
        lines.extend(f"{n} = {lo!r}, {hi!r}, {sc}" for n, lo, hi, sc in entries)
        lines.append("")
    text = "\n".join(lines)
    if path is not None:
        Path(path).write_text(text)
    return text


def per_cluster(value: str, n: int, kind=float) -> list:
    parts = [p for p in str(value).split(",") if p.strip()]
    vals = [kind(float(p)) for p in parts]
    if len(vals) == 1:
        return vals * n
    if len(vals) != n:
        raise ConfigError("cluster", f"expected 1 or {n} comma-separated values, got {len(vals)}")
    return vals
