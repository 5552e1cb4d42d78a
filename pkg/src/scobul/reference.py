"""Slow object-level simulator used to cross-check the compiled kernels.

It steps :class:`~scobul.core.NeuronState` objects with the functions in
:mod:`scobul.core` and :mod:`scobul.plasticity`. Death/rebirth is not
modelled here.
"""

from __future__ import annotations

from scobul.core import RenormMode, integrate_step
from scobul.network import Network
from scobul.plasticity import (
    close_expired,
    on_post_spike,
    on_pre_spike,
    periodic_renormalize,
    stdp_baseline_update,
)


class ReferenceNetwork:
    def __init__(self, network: Network):
        cfg = network.config
        self.n_inputs = cfg.n_inputs
        self.arm = cfg.arm
        self.plasticity = cfg.plasticity
        self.stdp = cfg.stdp
        self.neurons = network.to_neuron_states()
        self.t = network.t
        self.fired_prev: set[int] = {int(j) for j in range(cfg.n_neurons) if network.fired_prev[j]}
        self.last_post = {j: None for j in range(cfg.n_neurons)}
        # source id -> synapse index, per neuron
        self.by_source = [{s.source: i for i, s in enumerate(n.synapses)} for n in self.neurons]
        self.trace: list[tuple[int, object]] = []  # (neuron, PlasticityEvent)

    def step(self, inputs, plasticity_on=True, trace=False) -> set[int]:
        t = self.t
        inputs = sorted(inputs)
        fired = set()
        for j, n in enumerate(self.neurons):
            idx = self.by_source[j]
            total = 0.0
            for i in self.fired_prev:
                if i != j:
                    total += n.synapses[idx[self.n_inputs + i]].w
            for ch in inputs:
                k = idx.get(ch)
                if k is not None:
                    total += n.synapses[k].w
            if integrate_step(n, total, t):
                fired.add(j)
        if plasticity_on:
            for j, n in enumerate(self.neurons):
                tr = [] if trace else None
                if self.arm == "scobul":
                    self._scobul(j, n, inputs, t, j in fired, tr)
                else:
                    self._stdp(j, n, inputs, t, j in fired)
                if tr:
                    self.trace.extend((j, e) for e in tr)
        self.fired_prev = fired
        self.t += 1
        return fired

    def _scobul(self, j, n, inputs, t, fired, tr):
        p = self.plasticity
        close_expired(n, t, p, tr)
        idx = self.by_source[j]
        for ch in inputs:
            k = idx.get(ch)
            if k is not None:
                on_pre_spike(n, k, t, p, tr)
        if fired:
            on_post_spike(n, t, p, tr)
        if p.renorm_mode is RenormMode.PERIODIC and (t + 1) % p.renorm_interval == 0:
            periodic_renormalize(n, p)

    def _stdp(self, j, n, inputs, t, fired):
        idx = self.by_source[j]
        for ch in inputs:
            k = idx.get(ch)
            if k is None:
                continue
            s = n.synapses[k]
            if self.last_post[j] is not None:
                s.w += stdp_baseline_update(s.w, t, self.last_post[j], self.stdp)
            s.last_pre_spike = t
        if fired:
            for s in n.synapses:
                if s.plastic and s.last_pre_spike is not None:
                    s.w += stdp_baseline_update(s.w, s.last_pre_spike, t, self.stdp)
            self.last_post[j] = t
