"""Single-layer winner-takes-all network.

Each neuron has plastic excitatory synapses from a random subset of the
input nodes and a fixed inhibitory synapse from every other neuron.
Inhibitory spikes land one step after the spike that caused them, so the
result of a step does not depend on the order neurons are visited in.

State lives in numpy arrays so that :mod:`scobul._kernels` can run long
simulations; :meth:`Network.to_neuron_states` exposes the same state as
:class:`~scobul.core.NeuronState` objects.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Optional, Union

import numpy as np

from scobul import _kernels as K
from scobul.config import substream
from scobul.core import (
    NeuronParams,
    NeuronState,
    PlasticityParams,
    RenormMode,
    SynapseKind,
    SynapseState,
    resource_to_weight,
)
from scobul.events import EventStream
from scobul.plasticity import StdpBaselineParams

log = logging.getLogger(__name__)

ARMS = ("scobul", "stdp")


class SignalExhausted(RuntimeError):
    pass


@dataclass
class NetworkConfig:
    n_inputs: int
    n_neurons: int
    input_connectivity: float = 1.0
    initial_resource: tuple = (0.0, 1.0)
    inhibitory_weight: float = -5.0
    death_silence_threshold: Optional[int] = None  # None disables death/rebirth
    neuron: NeuronParams = field(default_factory=NeuronParams)
    plasticity: PlasticityParams = field(default_factory=PlasticityParams)
    stdp: StdpBaselineParams = field(default_factory=StdpBaselineParams)
    arm: str = "scobul"
    seed: int = 0
    replica: int = 0  # selects an independent topology/initial-resource stream

    def __post_init__(self):
        if self.n_neurons < 2:
            raise ValueError("a winner-takes-all network needs at least 2 neurons")
        if not 0 < self.input_connectivity <= 1:
            raise ValueError("input_connectivity must be in (0, 1]")
        if not self.inhibitory_weight < 0:
            raise ValueError("inhibitory_weight must be strictly negative")
        if self.death_silence_threshold is not None and self.death_silence_threshold <= 0:
            raise ValueError("death_silence_threshold must be positive (or None to disable)")
        if self.arm not in ARMS:
            raise ValueError(f"arm must be one of {ARMS}")
        lo, hi = self.initial_resource
        if hi < lo:
            raise ValueError("initial_resource range is reversed")

    @property
    def synapses_per_neuron(self) -> int:
        return math.ceil(self.input_connectivity * self.n_inputs)


class SpikeLog(NamedTuple):
    inputs: EventStream
    neurons: EventStream


def _trace_arrays(cap):
    return (np.zeros(cap, np.int64), np.zeros(cap, np.int64), np.zeros(cap, np.int64),
            np.zeros(cap, np.int8), np.zeros(cap, np.float64), np.zeros(cap, np.float64),
            np.zeros(1, np.int64))


class PlasticityTrace:
    """Growable record of plasticity events emitted by the kernels."""

    FIELDS = ("t", "neuron", "synapse", "kind", "delta", "W_before")

    def __init__(self, capacity=1 << 16):
        self.capacity = capacity
        self.bufs = _trace_arrays(capacity)
        self.chunks = []

    def flush(self):
        n = int(self.bufs[-1][0])
        if n > self.capacity:
            raise RuntimeError("plasticity trace overflow")
        self.chunks.append(tuple(b[:n].copy() for b in self.bufs[:-1]))
        self.bufs[-1][0] = 0

    def room(self) -> int:
        return self.capacity - int(self.bufs[-1][0])

    def arrays(self) -> dict:
        self.flush()
        return {name: np.concatenate([c[i] for c in self.chunks]) for i, name in enumerate(self.FIELDS)}


_NO_TRACE = _trace_arrays(0)
_EMPTY = np.zeros(1, np.int64)


class Network:
    """WTA network state plus the simulation clock ``t`` (next step to run)."""

    def __init__(self, config: NetworkConfig):
        self.config = config
        self.rng = substream(config.seed, f"topology/{config.replica}")
        N, n_in, Ks = config.n_neurons, config.n_inputs, config.synapses_per_neuron
        self.src = np.zeros((N, Ks), np.int32)
        self.slot = np.full((N, n_in), -1, np.int32)
        self.Wraw = np.zeros((N, Ks))
        self.off = np.zeros(N)
        self.wc = np.zeros((N, Ks))
        self.total0 = np.zeros(N)
        self.inh = np.full((N, N), float(config.inhibitory_weight))
        np.fill_diagonal(self.inh, 0.0)
        npar = config.neuron
        self.V = np.zeros(N)
        self.theta = np.full(N, float(npar.threshold))
        self.leak = np.full(N, npar.leak)
        self.refr_rem = np.zeros(N, np.int64)
        self.refr_len = np.full(N, int(npar.refractory), np.int64)
        self.silence = np.zeros(N, np.int64)
        self.pc = np.full(N, K.NONE, np.int64)
        self.pend = np.full(N, K.NONE, np.int64)
        self.last_pre = np.full((N, Ks), K.NONE, np.int64)
        self.last_dep = np.full((N, Ks), K.NONE, np.int64)
        self.pot = np.zeros((N, Ks), np.bool_)
        self.spk = np.zeros((N, Ks), np.bool_)
        self.last_post = np.full(N, K.NONE, np.int64)
        self.fired_prev = np.zeros(N, np.bool_)
        self.t = 0
        self.reborn: list[tuple[int, int]] = []  # (t, neuron)
        if Ks == 1 and config.arm == "scobul":
            log.warning("one plastic synapse per neuron: resource rebalancing is a no-op")
        for j in range(N):
            self._construct(j)
        self.fp, self.ip = self._pack_params()

    def _pack_params(self):
        c = self.config
        p, s = c.plasticity, c.stdp
        fp = np.zeros(K.N_FP)
        fp[K.FP_WMIN], fp[K.FP_WMAX] = p.w_min, p.w_max
        fp[K.FP_D], fp[K.FP_DPLUS], fp[K.FP_DMINUS] = p.d, p.D_plus, p.D_minus
        fp[K.FP_APLUS], fp[K.FP_AMINUS] = s.A_plus, s.A_minus
        fp[K.FP_TAUPLUS], fp[K.FP_TAUMINUS], fp[K.FP_STDP_WMAX] = s.tau_plus, s.tau_minus, s.w_max
        ip = np.zeros(K.N_IP, np.int64)
        ip[K.IP_TAUP] = p.tau_p
        ip[K.IP_ARM] = K.ARM_STDP if c.arm == "stdp" else K.ARM_SCOBUL
        ip[K.IP_MODE] = K.MODE_PERIODIC if p.renorm_mode is RenormMode.PERIODIC else K.MODE_IMMEDIATE
        ip[K.IP_RENORM] = max(1, p.renorm_interval)
        ip[K.IP_DEATH] = c.death_silence_threshold or 0
        return fp, ip

    def _construct(self, j: int):
        c = self.config
        Ks = c.synapses_per_neuron
        if Ks == c.n_inputs:
            subset = np.arange(c.n_inputs)
        else:
            subset = np.sort(self.rng.choice(c.n_inputs, Ks, replace=False))
        lo, hi = c.initial_resource
        W = self.rng.uniform(lo, hi, Ks)
        self.src[j] = subset
        self.slot[j] = -1
        self.slot[j, subset] = np.arange(Ks)
        self.Wraw[j] = W
        self.off[j] = 0.0
        self.total0[j] = W.sum()
        w = resource_to_weight(W, c.plasticity.w_min, c.plasticity.w_max)
        if c.arm == "stdp":
            w = np.minimum(w, c.stdp.w_max)
        self.wc[j] = w
        self.V[j] = 0.0
        self.refr_rem[j] = 0
        self.silence[j] = 0
        self.pc[j] = self.pend[j] = K.NONE
        self.last_pre[j] = K.NONE
        self.last_dep[j] = K.NONE
        self.pot[j] = False
        self.spk[j] = False
        self.last_post[j] = K.NONE

    # -- views -------------------------------------------------------------

    @property
    def n_neurons(self) -> int:
        return self.config.n_neurons

    @property
    def W(self) -> np.ndarray:
        """Synaptic resources, shape (n_neurons, synapses_per_neuron)."""
        return self.Wraw + self.off[:, None]

    @property
    def weights(self) -> np.ndarray:
        if self.config.arm == "stdp" or self.config.plasticity.renorm_mode is RenormMode.PERIODIC:
            return self.wc.copy()
        p = self.config.plasticity
        return resource_to_weight(self.W, p.w_min, p.w_max)

    def _fold(self):
        self.Wraw += self.off[:, None]
        self.off[:] = 0.0

    def to_neuron_states(self) -> list[NeuronState]:
        """Object view of the current state (a copy; edits do not flow back)."""
        W, w = self.W, self.weights
        out = []
        opt = lambda v: None if v == K.NONE else int(v)  # noqa: E731
        for j in range(self.n_neurons):
            syns = [
                SynapseState(int(self.src[j, k]), float(W[j, k]), float(w[j, k]),
                             last_pre_spike=opt(self.last_pre[j, k]),
                             last_rule32_depression=opt(self.last_dep[j, k]),
                             potentiated_this_period=bool(self.pot[j, k]),
                             spiked_this_period=bool(self.spk[j, k]))
                for k in range(W.shape[1])
            ]
            syns += [SynapseState(self.config.n_inputs + i, 0.0, float(self.inh[i, j]),
                                  kind=SynapseKind.INHIBITORY_FIXED)
                     for i in range(self.n_neurons) if i != j]
            n = NeuronState(threshold=float(self.theta[j]), leak_factor=float(self.leak[j]),
                            refractory_len=int(self.refr_len[j]), V=float(self.V[j]),
                            refractory_remaining=int(self.refr_rem[j]), period_center=opt(self.pc[j]),
                            period_open_until=opt(self.pend[j]), silence_counter=int(self.silence[j]),
                            synapses=syns, initial_total=float(self.total0[j]))
            out.append(n)
        return out

    def snapshot(self) -> dict:
        """Versioned plain-data dump of the network (see ``scobul.persist``)."""
        W = self.W
        plastic_value = self.wc if self.config.arm == "stdp" else W
        neurons = []
        for j in range(self.n_neurons):
            syn = [[int(self.src[j, k]), "excitatory-plastic", float(plastic_value[j, k])]
                   for k in range(W.shape[1])]
            syn += [[f"n{i}", "inhibitory-fixed", float(self.inh[i, j])]
                    for i in range(self.n_neurons) if i != j]
            neurons.append({
                "id": j, "V": float(self.V[j]), "threshold": float(self.theta[j]),
                "leak": float(self.leak[j]), "refractory": int(self.refr_len[j]),
                "initial_total": float(self.total0[j]), "synapses": syn,
            })
        return {"schema": 1, "arm": self.config.arm, "t": self.t,
                "value": "weight" if self.config.arm == "stdp" else "resource",
                "reborn": [list(r) for r in self.reborn], "neurons": neurons}

    # -- dynamics ----------------------------------------------------------

    def death_rebirth_scan(self, t: Optional[int] = None) -> list[int]:
        """Rebuild every neuron silent for at least the death threshold."""
        thr = self.config.death_silence_threshold
        if thr is None:
            return []
        t = self.t if t is None else t
        dead = [int(j) for j in np.flatnonzero(self.silence >= thr)]
        if dead:
            self._fold()
        for j in dead:
            self._construct(j)
            self.reborn.append((t, j))
        return dead

    def step(self, input_spikes: Iterable[int], t: Optional[int] = None, plasticity_on: bool = True) -> set[int]:
        """Advance one timestep; return the ids of neurons that fired."""
        if t is not None and t != self.t:
            raise ValueError(f"step expects t={self.t}, got {t}")
        stream = EventStream.from_sets([set(input_spikes)], self.config.n_inputs, start=self.t)
        log_ = self._simulate(stream, 1, plasticity_on, death=False)
        return set(log_.neurons.channels.tolist())

    def run(self, signal: Union[EventStream, Iterable], duration: int, plasticity_on: bool = True,
            trace: Optional[PlasticityTrace] = None) -> SpikeLog:
        """Simulate ``duration`` steps from the current clock.

        ``signal`` is an :class:`EventStream` covering the steps to simulate or
        any iterable yielding one set of input ids per step. Death/rebirth is
        only active while plasticity is on, so frozen runs leave every
        resource untouched.
        """
        if not isinstance(signal, EventStream):
            sets = []
            it = iter(signal)
            for i in range(duration):
                try:
                    sets.append(next(it))
                except StopIteration:
                    raise SignalExhausted(f"signal source exhausted after {i} of {duration} steps") from None
            signal = EventStream.from_sets(sets, self.config.n_inputs, start=self.t)
        if signal.n_channels != self.config.n_inputs:
            raise ValueError(f"signal has {signal.n_channels} channels, network expects {self.config.n_inputs}")
        if signal.start > self.t or signal.stop < self.t + duration:
            avail = max(0, signal.stop - self.t)
            raise SignalExhausted(f"signal source exhausted after {min(avail, duration)} of {duration} steps "
                                  f"(stream covers [{signal.start}, {signal.stop}), clock at {self.t})")
        return self._simulate(signal, duration, plasticity_on, death=True, trace=trace)

    def run_clamped(self, signal: EventStream, post: EventStream,
                    trace: Optional[PlasticityTrace] = None) -> SpikeLog:
        """Apply the plasticity rules to a prescribed spike trace.

        Membrane dynamics and death are bypassed: neuron ``j`` fires exactly
        at the steps listed for channel ``j`` of ``post``. Used to audit the
        learning rules independently of the neuron model.
        """
        if post.n_channels != self.n_neurons or post.start != self.t:
            raise ValueError("post spike stream must start at the network clock and have one channel per neuron")
        return self._simulate(signal, post.duration, True, death=False, trace=trace, clamp=post)

    def _simulate(self, signal: EventStream, duration: int, plasticity_on: bool, death: bool,
                  trace: Optional[PlasticityTrace] = None, clamp: Optional[EventStream] = None) -> SpikeLog:
        t0 = self.t
        t_end = t0 + duration
        ip = self.ip.copy()
        ip[K.IP_PLASTIC] = int(plasticity_on)
        if not death:
            ip[K.IP_DEATH] = 0
        cap = max(1024, min(duration * self.n_neurons, 1 << 20))
        out_t = np.zeros(cap, np.int64)
        out_j = np.zeros(cap, np.int64)
        dead = np.zeros(self.n_neurons, np.bool_)
        if clamp is not None:
            # the kernel indexes the forced spikes relative to signal.start
            pad = t0 - signal.start
            post_ptr = np.concatenate([np.zeros(pad, np.int64), clamp.indptr])
            post_j = clamp.channels
        else:
            post_ptr = post_j = _EMPTY
        chunks_t, chunks_j = [], []
        t = t0
        per_step = self.n_neurons * (5 * self.Wraw.shape[1] + 5)
        while t < t_end:
            stop = t_end
            if trace is not None:
                if trace.room() < per_step:
                    trace.flush()
                stop = min(t_end, t + max(1, trace.room() // per_step))
                tr = trace.bufs
            else:
                tr = _NO_TRACE
            t, n, status = K.run_network(
                t, stop, signal.start, signal.indptr, signal.channels,
                self.slot, self.Wraw, self.off, self.wc, self.total0, self.inh,
                self.V, self.theta, self.leak, self.refr_rem, self.refr_len, self.silence,
                self.pc, self.pend, self.last_pre, self.last_dep, self.pot, self.spk,
                self.last_post, self.fired_prev, self.fp, ip, out_t, out_j, 0, dead,
                clamp is not None, post_ptr, post_j, trace is not None, *tr)
            chunks_t.append(out_t[:n].copy())
            chunks_j.append(out_j[:n].copy())
            self.t = t
            if status == K.STATUS_DEATH:
                self.death_rebirth_scan(t - 1)
        self._fold()
        nt = np.concatenate(chunks_t) if chunks_t else np.zeros(0, np.int64)
        nj = np.concatenate(chunks_j) if chunks_j else np.zeros(0, np.int64)
        neurons = EventStream.from_events(nt, nj, self.n_neurons, duration, start=t0)
        inputs = signal.window(t0, t_end) if duration else EventStream.from_events([], [], signal.n_channels, 0, t0)
        return SpikeLog(inputs, neurons)


def build_wta(config: NetworkConfig) -> Network:
    return Network(config)


def run(network: Network, signal_source, duration: int, plasticity_on: bool = True) -> SpikeLog:
    return network.run(signal_source, duration, plasticity_on)
