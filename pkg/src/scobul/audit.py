"""Offline checks of a recorded plasticity trace.

:func:`audit_trace` replays the event records produced by
``Network.run(..., trace=PlasticityTrace())`` (or ``run_clamped``) against
the input stream and counts violations of the learning-rule invariants:

``double_potentiation``
    a synapse potentiated twice inside one plasticity period, or outside any
``depression_spacing``
    two presynaptic depressions of one synapse closer than ``2 * tau_p``
``period_spacing``
    two period centres of one neuron closer than ``tau_p``
``silent_depression``
    an end-of-period depression on a synapse with ``W <= 0`` or one whose
    input spiked during the period
"""

from __future__ import annotations

import numpy as np

from scobul import _kernels as K
from scobul.events import EventStream

CHECKS = ("double_potentiation", "depression_spacing", "period_spacing", "silent_depression")


def _period_index(kind: np.ndarray, neuron: np.ndarray):
    """Per record: index of the enclosing period of its neuron, and whether one is open."""
    period = np.full(len(kind), -1, np.int64)
    inside = np.zeros(len(kind), bool)
    for j in np.unique(neuron):
        m = np.flatnonzero(neuron == j)
        k = kind[m]
        opened = np.cumsum(k == K.TR_OPEN)
        # a CLOSE record belongs to the period it ends
        closed_before = np.cumsum(k == K.TR_CLOSE) - (k == K.TR_CLOSE)
        period[m] = opened - 1
        inside[m] = opened == closed_before + 1
    return period, inside


def audit_trace(trace: dict, inputs: EventStream, src: np.ndarray, tau_p: int) -> dict:
    """Count invariant violations in ``trace`` (the dict from ``PlasticityTrace.arrays``).

    ``src[j, k]`` is the input channel of synapse ``k`` of neuron ``j``.
    """
    t, j, k, kind, wb = (trace[f] for f in ("t", "neuron", "synapse", "kind", "W_before"))
    out = dict.fromkeys(CHECKS, 0)
    period, inside = _period_index(kind, j)

    pot = kind == K.TR_POT
    out["double_potentiation"] += int(np.count_nonzero(pot & ~inside))
    if pot.any():
        # one int64 key per (neuron, period, synapse); duplicates are violations
        n_syn = int(k.max()) + 1
        n_per = int(period.max()) + 2
        keys = np.sort((j[pot].astype(np.int64) * n_per + period[pot] + 1) * n_syn + k[pot])
        out["double_potentiation"] += int(np.count_nonzero(keys[1:] == keys[:-1]))

    dep = kind == K.TR_DEP_PRE
    if dep.any():
        order = np.lexsort((t[dep], k[dep], j[dep]))
        jj, kk, tt = j[dep][order], k[dep][order], t[dep][order]
        same = (jj[1:] == jj[:-1]) & (kk[1:] == kk[:-1])
        out["depression_spacing"] = int(np.count_nonzero(same & (np.diff(tt) < 2 * tau_p)))

    opn = kind == K.TR_OPEN
    if opn.any():
        order = np.lexsort((t[opn], j[opn]))
        jj, tt = j[opn][order], t[opn][order]
        same = jj[1:] == jj[:-1]
        out["period_spacing"] = int(np.count_nonzero(same & (np.diff(tt) < tau_p)))

    sil = np.flatnonzero(kind == K.TR_DEP_SILENT)
    if len(sil):
        out["silent_depression"] += int(np.count_nonzero(wb[sil] <= 0))
        # centre of each record's period, looked up from the OPEN records
        n_per = int(period.max()) + 2
        okey = j[opn].astype(np.int64) * n_per + period[opn]
        order = np.argsort(okey, kind="stable")
        pos = np.searchsorted(okey[order], j[sil].astype(np.int64) * n_per + period[sil])
        c = t[opn][order][pos]
        ch = src[j[sil], k[sil]]
        # any input spike on the synapse's channel within [c - tau_p, close time]?
        span = inputs.stop + 2 * tau_p + 1
        key = np.sort(inputs.channels * span + (inputs.times() - inputs.start + tau_p))
        lo = ch * span + (c - tau_p - inputs.start + tau_p)
        hi = ch * span + (t[sil] - inputs.start + tau_p)
        hits = np.searchsorted(key, hi, side="right") - np.searchsorted(key, lo, side="left")
        out["silent_depression"] += int(np.count_nonzero(hits > 0))
    return out
