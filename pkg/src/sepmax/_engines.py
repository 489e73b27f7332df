"""Compiled event loops for the particle simulators.

Internal module: state layout and return codes are private to sep_sim
and asep_zr. Everything is sequential; replicate-level fan-out happens
in the callers. All kernels draw from an in-place xorshift128+ state so
trajectories are reproducible bit-for-bit.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

OK = 0
OVERFLOW = 1
DOMINATION_BROKEN = 2

_INV53 = 1.0 / 9007199254740992.0  # 2^-53


@njit(cache=True)
def _next_u64(state):
    s1 = state[0]
    s0 = state[1]
    state[0] = s0
    s1 ^= s1 << np.uint64(23)
    s1 ^= s1 >> np.uint64(17)
    s1 ^= s0 ^ (s0 >> np.uint64(26))
    state[1] = s1
    return s0 + s1


@njit(cache=True)
def _next_double(state):
    return np.float64(_next_u64(state) >> np.uint64(11)) * _INV53


@njit(cache=True)
def fill_uniforms(state, out):
    for i in range(out.shape[0]):
        out[i] = _next_double(state)


@njit(cache=True)
def _poisson(state, mu):
    """Exact Poisson variate: inversion below mean 10, PTRS above."""
    if mu <= 0.0:
        return np.int64(0)
    if mu < 10.0:
        limit = math.exp(-mu)
        k = np.int64(0)
        prod = _next_double(state)
        while prod > limit:
            prod *= _next_double(state)
            k += 1
        return k
    b = 0.931 + 2.53 * math.sqrt(mu)
    a = -0.059 + 0.02483 * b
    inv_alpha = 1.1239 + 1.1328 / (b - 3.4)
    vr = 0.9277 - 3.6224 / (b - 2.0)
    while True:
        v = _next_double(state)
        u = _next_double(state) - 0.5
        us = 0.5 - abs(u)
        kf = math.floor((2.0 * a / us + b) * u + mu + 0.43)
        if us >= 0.07 and v <= vr:
            return np.int64(kf)
        if kf < 0.0 or (us < 0.013 and v > us):
            continue
        k = np.int64(kf)
        if (math.log(v * inv_alpha / (a / (us * us) + b))
                <= k * math.log(mu) - mu - math.lgamma(k + 1.0)):
            return k


_S23 = np.uint64(23)
_S17 = np.uint64(17)
_S26 = np.uint64(26)
_S11 = np.uint64(11)


@njit(cache=True)
def run_suppressed(state, pos, occ, lo, dt, cdf, offs):
    """Exclusion dynamics: Poisson(#particles * dt) attempt events; each
    event picks a particle uniformly, draws a signed displacement from
    the kernel, and moves iff the target is vacant.

    pos: particle positions (any order); occ: window occupancy bytes with
    site x at occ[x - lo]. Returns (status, events); OVERFLOW means an
    attempted move left the window and the trajectory must be rerun wider.
    The generator state is carried in registers; same recurrence as
    _next_double.
    """
    n_p = pos.shape[0]
    wlen = occ.shape[0]
    nd = cdf.shape[0]
    total = _poisson(state, n_p * dt)
    a = state[0]
    b = state[1]
    npf = np.float64(n_p)
    done = np.int64(0)
    status = OK
    if nd == 2:
        # all-integer event loop: high 32 bits of the draw pick the
        # particle by multiply-shift (floor(hi * n_p / 2^32) < n_p always,
        # uniform up to n_p/2^32), low 32 bits decide the displacement
        # against cdf[0] prescaled to 2^32 (exact when cdf[0] = 0.5)
        npu = np.uint64(n_p)
        c0s = np.uint64(min(round(cdf[0] * 4294967296.0), 4294967295.0))
        lo32 = np.uint64(0xFFFFFFFF)
        s32 = np.uint64(32)
        o0 = offs[0]
        o1 = offs[1]
        for e in range(total):
            x = a
            a = b
            x ^= x << _S23
            x ^= x >> _S17
            x ^= b ^ (b >> _S26)
            rnd = b + x
            b = x
            i = np.int64(((rnd >> s32) * npu) >> s32)
            d = o0 if (rnd & lo32) < c0s else o1
            src = pos[i]
            di = src + d - lo
            if di < 0 or di >= wlen:
                status = OVERFLOW
                done = e
                break
            if occ[di] == 0:
                occ[src - lo] = 0
                occ[di] = 1
                pos[i] = src + d
        else:
            done = total
    else:
        for e in range(total):
            x = a
            a = b
            x ^= x << _S23
            x ^= x >> _S17
            x ^= b ^ (b >> _S26)
            u = np.float64((b + x) >> _S11) * _INV53
            b = x
            r = u * npf
            i = np.int64(r)
            if i >= n_p:
                i = n_p - 1
            frac = r - np.float64(i)
            d = offs[nd - 1]
            for c in range(nd):
                if frac < cdf[c]:
                    d = offs[c]
                    break
            src = pos[i]
            di = src + d - lo
            if di < 0 or di >= wlen:
                status = OVERFLOW
                done = e
                break
            if occ[di] == 0:
                occ[src - lo] = 0
                occ[di] = 1
                pos[i] = src + d
        else:
            done = total
    state[0] = a
    state[1] = b
    return status, done


@njit(cache=True)
def run_stirring(state, lab, dt, rate, jw_cdf, joffs, guard):
    """Stirring dynamics on the window: pair {k, k+j} exchanges contents
    at rate p_j; pairs fully inside the window only.

    lab[idx] holds a particle label or -1. rate is the total pair rate,
    jw_cdf the cumulative law of j weighted by pair multiplicity. Aborts
    with OVERFLOW the moment any label lands within `guard` sites of an
    edge, where the missing cross-boundary pairs would start to bias its
    law; up to that moment the trajectory is exact.
    """
    wlen = lab.shape[0]
    nj = joffs.shape[0]
    total = _poisson(state, rate * dt)
    for e in range(total):
        u = _next_double(state)
        a = nj - 1
        for b in range(nj):
            if u < jw_cdf[b]:
                a = b
                break
        j = joffs[a]
        npairs = wlen - j
        u2 = _next_double(state)
        k = np.int64(u2 * npairs)
        if k >= npairs:
            k = npairs - 1
        k2 = k + j
        la = lab[k]
        lb = lab[k2]
        if la == lb:
            continue  # two vacancies: no-op
        lab[k] = lb
        lab[k2] = la
        if lb >= 0 and (k < guard or k >= wlen - guard):
            return OVERFLOW, e
        if la >= 0 and (k2 < guard or k2 >= wlen - guard):
            return OVERFLOW, e
    return OK, total


@njit(cache=True)
def run_zr(state, zeta, t_start, t_end, p):
    """Zero-range well dynamics: injection into site 1 at rate p; each
    occupied site moves one particle right at rate p, left at rate q=1-p;
    a left move from site 1 exits into the well.

    zeta[idx] is the occupancy of site idx+1. Returns
    (status, events, time); OVERFLOW when mass reaches the last tracked
    site.
    """
    cap = zeta.shape[0]
    occ_sites = np.empty(cap, np.int64)
    n_occ = 0
    for i in range(cap):
        if zeta[i] > 0:
            occ_sites[n_occ] = i
            n_occ += 1
    t = t_start
    events = np.int64(0)
    while True:
        rate = p + n_occ
        t += -math.log(1.0 - _next_double(state)) / rate
        if t > t_end:
            return OK, events, t_end
        u = _next_double(state) * rate
        if u < p:
            if zeta[0] == 0:
                occ_sites[n_occ] = 0
                n_occ += 1
            zeta[0] += 1
        else:
            k = np.int64(u - p)
            if k >= n_occ:
                k = n_occ - 1
            i = occ_sites[k]
            right = _next_double(state) < p
            if right and i + 1 >= cap:
                # boundary event left unapplied; the caller grows the
                # array, executes the move from site cap-1, and resumes
                return OVERFLOW, events, t
            zeta[i] -= 1
            if zeta[i] == 0:
                occ_sites[k] = occ_sites[n_occ - 1]
                n_occ -= 1
            if right:
                j = i + 1
                if zeta[j] == 0:
                    occ_sites[n_occ] = j
                    n_occ += 1
                zeta[j] += 1
            elif i > 0:
                j = i - 1
                if zeta[j] == 0:
                    occ_sites[n_occ] = j
                    n_occ += 1
                zeta[j] += 1
            # left move from site 1 exits into the well
        events += 1
    return OK, events, t_end


@njit(cache=True)
def run_zr_coupled(state, z_lo, z_hi, t_start, t_end, p, check_every_event):
    """Basic coupling of two well processes with z_lo <= z_hi sitewise.

    Injections are shared; a move at an upper-occupied site carries the
    lower particle along when one is present (it always is when the site
    is lower-occupied, by domination). Returns (status, events, time);
    DOMINATION_BROKEN only if the invariant audit ever fails.
    """
    cap = z_hi.shape[0]
    occ_sites = np.empty(cap, np.int64)
    n_occ = 0
    for i in range(cap):
        if z_hi[i] > 0:
            occ_sites[n_occ] = i
            n_occ += 1
    t = t_start
    events = np.int64(0)
    while True:
        rate = p + n_occ
        t += -math.log(1.0 - _next_double(state)) / rate
        if t > t_end:
            return OK, events, t_end
        u = _next_double(state) * rate
        if u < p:
            if z_hi[0] == 0:
                occ_sites[n_occ] = 0
                n_occ += 1
            z_hi[0] += 1
            z_lo[0] += 1
        else:
            k = np.int64(u - p)
            if k >= n_occ:
                k = n_occ - 1
            i = occ_sites[k]
            move_lower = z_lo[i] > 0
            right = _next_double(state) < p
            if right and i + 1 >= cap:
                # unapplied boundary event; the caller can reconstruct it
                # (right move from cap-1, lower iff z_lo[cap-1] > 0)
                return OVERFLOW, events, t
            z_hi[i] -= 1
            if move_lower:
                z_lo[i] -= 1
            if z_hi[i] == 0:
                occ_sites[k] = occ_sites[n_occ - 1]
                n_occ -= 1
            if right:
                j = i + 1
                if z_hi[j] == 0:
                    occ_sites[n_occ] = j
                    n_occ += 1
                z_hi[j] += 1
                if move_lower:
                    z_lo[j] += 1
            elif i > 0:
                j = i - 1
                if z_hi[j] == 0:
                    occ_sites[n_occ] = j
                    n_occ += 1
                z_hi[j] += 1
                if move_lower:
                    z_lo[j] += 1
            # left move from site 1 exits both into the well
        events += 1
        if check_every_event:
            for i in range(cap):
                if z_lo[i] > z_hi[i]:
                    return DOMINATION_BROKEN, events, t
    return OK, events, t_end
