"""Compiled inner loops.

Resources in immediate-renormalization mode are stored as ``Wraw[j, k] +
off[j]``: a delta on one synapse adds ``delta * K/(K-1)`` to its raw value
and ``-delta/(K-1)`` to the neuron offset, which is the equal-share
rebalance in O(1). Callers fold the offset back into ``Wraw`` between runs.
"""

from __future__ import annotations

import numpy as np
from numba import njit

NONE = -(1 << 62)

# float params
FP_WMIN, FP_WMAX, FP_D, FP_DPLUS, FP_DMINUS, FP_APLUS, FP_AMINUS, FP_TAUPLUS, FP_TAUMINUS, FP_STDP_WMAX = range(10)
N_FP = 10
# int params
IP_TAUP, IP_ARM, IP_MODE, IP_RENORM, IP_PLASTIC, IP_DEATH = range(6)
N_IP = 6

ARM_SCOBUL = 0
ARM_STDP = 1
MODE_IMMEDIATE = 0
MODE_PERIODIC = 1

# trace kinds
TR_DEP_PRE = 1
TR_POT = 2
TR_DEP_SILENT = 3
TR_OPEN = 4
TR_CLOSE = 5

STATUS_DONE = 0
STATUS_DEATH = 1
STATUS_FULL = 2


@njit(cache=True, inline="always")
def r2w(W, w_min, w_max):
    span = w_max - w_min
    if W <= 0.0:
        return w_min
    return w_min + span * W / (span + W)


@njit(cache=True, inline="never")
def _record(tr_t, tr_j, tr_k, tr_kind, tr_delta, tr_wb, tr_n, t, j, k, kind, delta, wb):
    n = tr_n[0]
    if n < tr_t.shape[0]:
        tr_t[n] = t
        tr_j[n] = j
        tr_k[n] = k
        tr_kind[n] = kind
        tr_delta[n] = delta
        tr_wb[n] = wb
    tr_n[0] = n + 1


@njit(cache=True, inline="never")
def _apply(j, k, delta, t, kind, Wraw, off, mode, trace_on,
           tr_t, tr_j, tr_k, tr_kind, tr_delta, tr_wb, tr_n):
    K = Wraw.shape[1]
    if trace_on:
        _record(tr_t, tr_j, tr_k, tr_kind, tr_delta, tr_wb, tr_n, t, j, k, kind, delta, Wraw[j, k] + off[j])
    if mode == MODE_IMMEDIATE and K > 1:
        share = delta / (K - 1)
        Wraw[j, k] += delta + share
        off[j] -= share
    else:
        Wraw[j, k] += delta


@njit(cache=True, inline="never")
def close_period(j, t, Wraw, off, pot, spk, pend, fp, ip, scratch, trace_on,
                 tr_t, tr_j, tr_k, tr_kind, tr_delta, tr_wb, tr_n):
    if pend[j] == NONE:
        return
    K = Wraw.shape[1]
    dm = fp[FP_DMINUS]
    mode = ip[IP_MODE]
    if dm > 0.0:
        for k in range(K):
            scratch[k] = (not spk[j, k]) and (Wraw[j, k] + off[j] > 0.0)
        for k in range(K):
            if scratch[k]:
                _apply(j, k, -dm, t, TR_DEP_SILENT, Wraw, off, mode, trace_on,
                       tr_t, tr_j, tr_k, tr_kind, tr_delta, tr_wb, tr_n)
    for k in range(K):
        pot[j, k] = False
        spk[j, k] = False
    pend[j] = NONE
    if trace_on:
        _record(tr_t, tr_j, tr_k, tr_kind, tr_delta, tr_wb, tr_n, t, j, -1, TR_CLOSE, 0.0, 0.0)


@njit(cache=True, inline="never")
def on_post(j, t, Wraw, off, last_pre, pot, spk, pc, pend, fp, ip, scratch, trace_on,
            tr_t, tr_j, tr_k, tr_kind, tr_delta, tr_wb, tr_n):
    tau_p = ip[IP_TAUP]
    if pc[j] != NONE and t - pc[j] < tau_p:
        return False
    if pend[j] != NONE:
        close_period(j, t, Wraw, off, pot, spk, pend, fp, ip, scratch, trace_on,
                     tr_t, tr_j, tr_k, tr_kind, tr_delta, tr_wb, tr_n)
    pc[j] = t
    pend[j] = t + tau_p
    if trace_on:
        _record(tr_t, tr_j, tr_k, tr_kind, tr_delta, tr_wb, tr_n, t, j, -1, TR_OPEN, 0.0, 0.0)
    K = Wraw.shape[1]
    mode = ip[IP_MODE]
    dp = fp[FP_DPLUS]
    for k in range(K):
        lp = last_pre[j, k]
        if lp != NONE and t - tau_p <= lp and lp <= t:
            if not pot[j, k]:
                _apply(j, k, dp, t, TR_POT, Wraw, off, mode, trace_on,
                       tr_t, tr_j, tr_k, tr_kind, tr_delta, tr_wb, tr_n)
                pot[j, k] = True
            spk[j, k] = True
    return True


@njit(cache=True)
def renormalize(Wraw, off, wc, total0, fp):
    N, K = Wraw.shape
    for j in range(N):
        s = 0.0
        for k in range(K):
            s += Wraw[j, k] + off[j]
        drift = (s - total0[j]) / K
        for k in range(K):
            Wraw[j, k] = Wraw[j, k] + off[j] - drift
            wc[j, k] = r2w(Wraw[j, k], fp[FP_WMIN], fp[FP_WMAX])
        off[j] = 0.0


@njit(cache=True, inline="always")
def _stdp_delta(w, dt, a_plus, a_minus, tau_plus, tau_minus, w_cap):
    if dt > 0:
        return min(w + a_plus * np.exp(-dt / tau_plus), w_cap) - w
    elif dt < 0:
        return max(w - a_minus * np.exp(dt / tau_minus), 0.0) - w
    return 0.0


@njit(cache=True)
def run_network(t0, t_end, t_base, indptr, chan,
                slot, Wraw, off, wc, total0, inh,
                V, theta, leak, refr_rem, refr_len, silence,
                pc, pend, last_pre, last_dep, pot, spk, last_post, fired_prev,
                fp, ip, out_t, out_j, n_out, dead, clamp, post_ptr, post_j,
                trace_on, tr_t, tr_j, tr_k, tr_kind, tr_delta, tr_wb, tr_n):
    """Simulate steps ``t0 .. t_end-1``.

    Input spikes of step ``t`` are ``chan[indptr[t - t_base]:indptr[t - t_base + 1]]``.
    With ``clamp`` set, membrane dynamics are skipped and the neurons listed in
    ``post_j[post_ptr[t - t_base]:post_ptr[t - t_base + 1]]`` fire instead, which
    drives the plasticity rules with a prescribed spike trace.
    Returns ``(next_t, n_out, status)``; on STATUS_DEATH the ``dead`` mask
    marks neurons to be rebuilt before resuming at ``next_t``.
    """
    N, K = Wraw.shape
    arm = ip[IP_ARM]
    mode = ip[IP_MODE]
    plastic = ip[IP_PLASTIC] != 0
    death = ip[IP_DEATH]
    renorm = ip[IP_RENORM]
    w_min = fp[FP_WMIN]
    w_max = fp[FP_WMAX]
    cached = arm == ARM_STDP or mode == MODE_PERIODIC
    tau_p = ip[IP_TAUP]
    d = fp[FP_D]
    dp = fp[FP_DPLUS]
    rebalance = mode == MODE_IMMEDIATE and K > 1
    d_share = d / (K - 1) if K > 1 else 0.0
    dp_share = dp / (K - 1) if K > 1 else 0.0
    a_plus, a_minus = fp[FP_APLUS], fp[FP_AMINUS]
    tau_plus, tau_minus, w_cap = fp[FP_TAUPLUS], fp[FP_TAUMINUS], fp[FP_STDP_WMAX]
    inp = np.zeros(N)
    fired = np.zeros(N, dtype=np.bool_)
    scratch = np.zeros(K, dtype=np.bool_)
    for t in range(t0, t_end):
        if n_out + N > out_t.shape[0]:
            return t, n_out, STATUS_FULL
        r = t - t_base
        e0 = indptr[r]
        e1 = indptr[r + 1]
        # phase 1: lateral inhibition from last step's spikes, then inputs
        for j in range(N):
            inp[j] = 0.0
        for i in range(N):
            if fired_prev[i]:
                for j in range(N):
                    if j != i:
                        inp[j] += inh[i, j]
        for e in range(e0, e1):
            ch = chan[e]
            for j in range(N):
                k = slot[j, ch]
                if k >= 0:
                    if cached:
                        inp[j] += wc[j, k]
                    else:
                        inp[j] += r2w(Wraw[j, k] + off[j], w_min, w_max)
        # phase 2: membrane update
        if clamp:
            for j in range(N):
                fired[j] = False
            for e in range(post_ptr[r], post_ptr[r + 1]):
                j = post_j[e]
                if not fired[j]:
                    fired[j] = True
                    out_t[n_out] = t
                    out_j[n_out] = j
                    n_out += 1
        for j in range(N if not clamp else 0):
            fired[j] = False
            if refr_rem[j] > 0:
                refr_rem[j] -= 1
                continue
            V[j] = leak[j] * V[j] + inp[j]
            if V[j] >= theta[j]:
                V[j] = 0.0
                refr_rem[j] = refr_len[j]
                silence[j] = 0
                fired[j] = True
                out_t[n_out] = t
                out_j[n_out] = j
                n_out += 1
            else:
                silence[j] += 1
        # phase 3: plasticity
        if plastic:
            if arm == ARM_SCOBUL:
                for j in range(N):
                    if pend[j] != NONE and t > pend[j]:
                        close_period(j, pend[j], Wraw, off, pot, spk, pend, fp, ip, scratch, trace_on,
                                     tr_t, tr_j, tr_k, tr_kind, tr_delta, tr_wb, tr_n)
                for e in range(e0, e1):
                    ch = chan[e]
                    for j in range(N):
                        k = slot[j, ch]
                        if k < 0:
                            continue
                        # unconditional depression, at most once per 2*tau_p
                        if d > 0.0 and (last_dep[j, k] == NONE or t - last_dep[j, k] >= 2 * tau_p):
                            if trace_on:
                                _record(tr_t, tr_j, tr_k, tr_kind, tr_delta, tr_wb, tr_n,
                                        t, j, k, TR_DEP_PRE, -d, Wraw[j, k] + off[j])
                            if rebalance:
                                Wraw[j, k] -= d + d_share
                                off[j] += d_share
                            else:
                                Wraw[j, k] -= d
                            last_dep[j, k] = t
                        # first spike inside an open period potentiates
                        if pend[j] != NONE and pc[j] <= t and t <= pend[j]:
                            if not pot[j, k]:
                                if trace_on:
                                    _record(tr_t, tr_j, tr_k, tr_kind, tr_delta, tr_wb, tr_n,
                                            t, j, k, TR_POT, dp, Wraw[j, k] + off[j])
                                if rebalance:
                                    Wraw[j, k] += dp + dp_share
                                    off[j] -= dp_share
                                else:
                                    Wraw[j, k] += dp
                                pot[j, k] = True
                            spk[j, k] = True
                        last_pre[j, k] = t
                for j in range(N):
                    if fired[j]:
                        on_post(j, t, Wraw, off, last_pre, pot, spk, pc, pend, fp, ip, scratch, trace_on,
                                tr_t, tr_j, tr_k, tr_kind, tr_delta, tr_wb, tr_n)
                if mode == MODE_PERIODIC and (t + 1) % renorm == 0:
                    renormalize(Wraw, off, wc, total0, fp)
            else:
                for e in range(e0, e1):
                    ch = chan[e]
                    for j in range(N):
                        k = slot[j, ch]
                        if k >= 0:
                            if last_post[j] != NONE:
                                wc[j, k] += _stdp_delta(wc[j, k], last_post[j] - t, a_plus, a_minus, tau_plus, tau_minus, w_cap)
                            last_pre[j, k] = t
                for j in range(N):
                    if fired[j]:
                        for k in range(K):
                            if last_pre[j, k] != NONE:
                                wc[j, k] += _stdp_delta(wc[j, k], t - last_pre[j, k], a_plus, a_minus, tau_plus, tau_minus, w_cap)
                        last_post[j] = t
        for j in range(N):
            fired_prev[j] = fired[j]
        if plastic and death > 0:
            any_dead = False
            for j in range(N):
                dead[j] = silence[j] >= death
                any_dead = any_dead or dead[j]
            if any_dead:
                return t + 1, n_out, STATUS_DEATH
    return t_end, n_out, STATUS_DONE
