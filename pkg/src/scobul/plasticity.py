"""Resource-based plasticity rules and the classic pair-STDP baseline.

All functions operate on :class:`~scobul.core.NeuronState` objects and
mutate them in place. Every resource change on a synapse is followed by a
compensating change spread over the neuron's other plastic synapses, so the
neuron's total resource stays fixed (exactly so in immediate mode, at each
renormalization point in periodic mode).

Pass a list as ``trace`` to collect :class:`PlasticityEvent` records; the
acceptance audits replay these.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple, Optional

from scobul.core import NeuronState, PlasticityParams, RenormMode, resource_to_weight

DEP_PRE = "dep_pre"  # unconditional depression on a presynaptic spike
POT = "pot"  # once-per-period potentiation
DEP_SILENT = "dep_silent"  # end-of-period depression of a silent strong synapse
OPEN = "open"
CLOSE = "close"


class PlasticityEvent(NamedTuple):
    t: int
    kind: str
    synapse: int  # -1 for period open/close
    delta: float
    W_before: float


@dataclass(frozen=True)
class PeriodEvent:
    center: int
    tau_p: int

    @property
    def open_interval(self) -> tuple[int, int]:
        return self.center - self.tau_p, self.center + self.tau_p


@dataclass
class StdpBaselineParams:
    A_plus: float = 0.01
    A_minus: float = 0.012
    tau_plus: float = 20.0
    tau_minus: float = 20.0
    w_max: float = 1.0

    def __post_init__(self):
        for name in ("A_plus", "A_minus", "tau_plus", "tau_minus", "w_max"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


def _refresh_weights(neuron: NeuronState, params: PlasticityParams):
    for s in neuron.synapses:
        if s.plastic:
            s.w = resource_to_weight(s.W, params.w_min, params.w_max)


def _apply(neuron, index, delta, params, t, kind, trace):
    syn = neuron.synapses[index]
    if trace is not None:
        trace.append(PlasticityEvent(t, kind, index, delta, syn.W))
    syn.W += delta
    rebalance(neuron, index, delta, params)


def rebalance(neuron: NeuronState, source_index: int, delta: float, params: PlasticityParams):
    """Spread ``-delta`` equally over the other plastic synapses of ``neuron``.

    In periodic mode nothing is spread here; :func:`periodic_renormalize`
    settles the accumulated drift later.
    """
    if params.renorm_mode is RenormMode.PERIODIC:
        neuron.cache_fresh = False
        return
    if delta == 0:
        return
    peers = [i for i in neuron.plastic_indices() if i != source_index]
    if not peers:
        warnings.warn("rebalance on a neuron with a single plastic synapse; total not conserved")
    else:
        share = delta / len(peers)
        for i in peers:
            neuron.synapses[i].W -= share
    _refresh_weights(neuron, params)


def periodic_renormalize(neuron: NeuronState, params: PlasticityParams):
    """Restore the initial total resource by a uniform shift and recompute weights."""
    if params.renorm_mode is not RenormMode.PERIODIC:
        return
    idx = neuron.plastic_indices()
    if idx:
        drift = (neuron.total_resource() - neuron.initial_total) / len(idx)
        if drift != 0:
            for i in idx:
                neuron.synapses[i].W -= drift
    _refresh_weights(neuron, params)
    neuron.cache_fresh = True


def on_pre_spike(neuron: NeuronState, index: int, t: int, params: PlasticityParams, trace=None):
    """Plasticity triggered by a spike arriving at synapse ``index`` at time ``t``.

    Returns the list of ``(synapse_index, resource_delta)`` applied to the
    receiving synapse (compensation on the peers is not listed).
    """
    syn = neuron.synapses[index]
    if not syn.plastic:
        raise ValueError("plasticity called on an inhibitory (non-plastic) synapse")
    applied = []
    last = syn.last_rule32_depression
    if params.d > 0 and (last is None or t - last >= 2 * params.tau_p):
        _apply(neuron, index, -params.d, params, t, DEP_PRE, trace)
        syn.last_rule32_depression = t
        applied.append((index, -params.d))
    if neuron.period_is_open(t):
        if not syn.potentiated_this_period:
            _apply(neuron, index, params.D_plus, params, t, POT, trace)
            syn.potentiated_this_period = True
            applied.append((index, params.D_plus))
        syn.spiked_this_period = True
    syn.last_pre_spike = t
    return applied


def close_period(neuron: NeuronState, params: PlasticityParams, t: Optional[int] = None, trace=None):
    """End the neuron's current plasticity period.

    Strong (W > 0) plastic synapses that got no spike during the period are
    depressed by ``D_minus``. Returns the list of applied deltas.
    """
    if neuron.period_center is None or neuron.period_open_until is None:
        return []
    when = neuron.period_open_until if t is None else t
    applied = []
    # the silence test uses each synapse's W at the end of the period; later
    # depressions in the same sweep can push a peer across zero, so snapshot first
    targets = [
        i for i, s in enumerate(neuron.synapses)
        if s.plastic and s.W > 0 and not s.spiked_this_period
    ]
    if params.D_minus > 0:
        for i in targets:
            _apply(neuron, i, -params.D_minus, params, when, DEP_SILENT, trace)
            applied.append((i, -params.D_minus))
    for s in neuron.synapses:
        s.potentiated_this_period = False
        s.spiked_this_period = False
    if trace is not None:
        trace.append(PlasticityEvent(when, CLOSE, -1, 0.0, 0.0))
    neuron.period_open_until = None
    return applied


def close_expired(neuron: NeuronState, t: int, params: PlasticityParams, trace=None):
    """Close the current period if ``t`` lies past its end."""
    if neuron.period_open_until is not None and t > neuron.period_open_until:
        return close_period(neuron, params, neuron.period_open_until, trace)
    return []


def on_post_spike(neuron: NeuronState, t: int, params: PlasticityParams, trace=None) -> Optional[PeriodEvent]:
    """Open a new plasticity period centred at ``t`` if the gate allows it.

    A still-open previous period is closed first. Synapses whose latest
    presynaptic spike lies within ``tau_p`` before ``t`` are potentiated
    straight away.
    """
    c = neuron.period_center
    if c is not None and t - c < params.tau_p:
        return None
    if neuron.period_open_until is not None:
        close_period(neuron, params, t, trace)
    neuron.period_center = t
    neuron.period_open_until = t + params.tau_p
    if trace is not None:
        trace.append(PlasticityEvent(t, OPEN, -1, 0.0, 0.0))
    for i, s in enumerate(neuron.synapses):
        if not s.plastic or s.last_pre_spike is None:
            continue
        if t - params.tau_p <= s.last_pre_spike <= t:
            if not s.potentiated_this_period:
                _apply(neuron, i, params.D_plus, params, t, POT, trace)
                s.potentiated_this_period = True
            s.spiked_this_period = True
    return PeriodEvent(t, params.tau_p)


def stdp_baseline_update(w: float, t_pre: int, t_post: int, params: StdpBaselineParams) -> float:
    """Weight change of one pre/post pair under additive exponential STDP.

    Returns the delta actually applied after clipping to ``[0, w_max]``.
    """
    dt = t_post - t_pre
    if dt > 0:
        new = min(w + params.A_plus * math.exp(-dt / params.tau_plus), params.w_max)
    elif dt < 0:
        new = max(w - params.A_minus * math.exp(dt / params.tau_minus), 0.0)
    else:
        return 0.0
    return new - w
