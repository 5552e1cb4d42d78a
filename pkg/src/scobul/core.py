"""Neuron and synapse state for the object-level simulator.

The network simulation itself runs on packed arrays (see ``scobul._kernels``);
the classes here are the readable reference that the kernels are tested
against, and the types the plasticity rules in ``scobul.plasticity`` act on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np


class RenormMode(str, Enum):
    IMMEDIATE = "immediate"
    PERIODIC = "periodic"


class SynapseKind(str, Enum):
    EXCITATORY_PLASTIC = "excitatory-plastic"
    INHIBITORY_FIXED = "inhibitory-fixed"


@dataclass
class PlasticityParams:
    """Constants of the resource-based plasticity rules.

    ``tau_p`` is the half-length of a plasticity period in timesteps.
    ``d`` is the per-spike unconditional depression, ``D_plus`` the
    once-per-period potentiation and ``D_minus`` the end-of-period
    depression of strong synapses that stayed silent.
    """

    w_max: float = 1.0
    tau_p: int = 10
    d: float = 0.01
    D_plus: float = 0.05
    D_minus: float = 0.02
    w_min: float = 0.0
    renorm_mode: RenormMode = RenormMode.IMMEDIATE
    renorm_interval: int = 1000

    def __post_init__(self):
        self.renorm_mode = RenormMode(self.renorm_mode)
        if not self.w_max > self.w_min >= 0:
            raise ValueError(f"need w_max > w_min >= 0, got w_min={self.w_min}, w_max={self.w_max}")
        if self.tau_p < 1:
            raise ValueError(f"tau_p must be >= 1, got {self.tau_p}")
        if min(self.d, self.D_plus, self.D_minus) < 0:
            raise ValueError("d, D_plus and D_minus must be non-negative")
        if self.renorm_mode is RenormMode.PERIODIC and self.renorm_interval < 1:
            raise ValueError("renorm_interval must be >= 1 in periodic mode")


@dataclass
class NeuronParams:
    tau_m: float = 10.0  # membrane time constant, ms
    threshold: float = 1.0
    refractory: int = 2  # timesteps

    def __post_init__(self):
        if self.tau_m <= 0:
            raise ValueError("tau_m must be positive")
        if self.refractory < 0:
            raise ValueError("refractory must be non-negative")

    @property
    def leak(self) -> float:
        return math.exp(-1.0 / self.tau_m)


def resource_to_weight(W, w_min: float, w_max: float):
    """Map an unbounded synaptic resource onto a weight in ``[w_min, w_max)``.

    Works elementwise on arrays. Non-positive resource gives exactly
    ``w_min``; the weight approaches ``w_max`` only asymptotically.
    """
    span = w_max - w_min
    Wp = np.maximum(W, 0.0)
    out = w_min + span * Wp / (span + Wp)
    if np.ndim(out) == 0:
        return float(out)
    return out


@dataclass
class SynapseState:
    source: int
    W: float = 0.0
    w: float = 0.0
    kind: SynapseKind = SynapseKind.EXCITATORY_PLASTIC
    last_pre_spike: Optional[int] = None
    last_rule32_depression: Optional[int] = None
    potentiated_this_period: bool = False
    spiked_this_period: bool = False

    @property
    def plastic(self) -> bool:
        return self.kind is SynapseKind.EXCITATORY_PLASTIC


@dataclass
class NeuronState:
    threshold: float = 1.0
    leak_factor: float = 1.0
    refractory_len: int = 0
    V: float = 0.0
    refractory_remaining: int = 0
    period_center: Optional[int] = None
    period_open_until: Optional[int] = None
    silence_counter: int = 0
    synapses: list[SynapseState] = field(default_factory=list)
    initial_total: float = 0.0
    # periodic renormalization mode only: weights lag W until the next renorm
    cache_fresh: bool = True

    @classmethod
    def from_params(cls, params: NeuronParams, synapses=None) -> "NeuronState":
        return cls(
            threshold=params.threshold,
            leak_factor=params.leak,
            refractory_len=params.refractory,
            synapses=list(synapses or []),
        )

    def plastic_indices(self) -> list[int]:
        return [i for i, s in enumerate(self.synapses) if s.plastic]

    def total_resource(self) -> float:
        return math.fsum(s.W for s in self.synapses if s.plastic)

    def record_initial_total(self):
        self.initial_total = self.total_resource()

    def period_is_open(self, t: int) -> bool:
        return self.period_open_until is not None and self.period_center <= t <= self.period_open_until


def integrate_step(neuron: NeuronState, weighted_input: float, t: int) -> bool:
    """Advance one LIF neuron by one timestep; return whether it fired.

    ``weighted_input`` is the sum of the weights of all synapses that
    received a spike this step (inhibitory ones negative).
    """
    if neuron.refractory_remaining > 0:
        neuron.refractory_remaining -= 1
        return False
    neuron.V = neuron.leak_factor * neuron.V + weighted_input
    if neuron.V >= neuron.threshold:
        neuron.V = 0.0
        neuron.refractory_remaining = neuron.refractory_len
        neuron.silence_counter = 0
        return True
    neuron.silence_counter += 1
    return False
