"""Pure-Python implementation of the numerical hot paths.

This module is the reference for ``_kernels.pyx``: every arithmetic
expression is written in the same order in both files so the compiled
and interpreted paths agree bit for bit.  Plans are handled in a local
frame: ``tau = t - ts`` measured from the replanning instant, remaining
distance ``D``, start speed ``v``, and control ``u(tau) = alpha*tau + beta``.

Parameter vector layout (``prm``)::

    0 S        1 delta    2 v_min    3 v_max    4 u_min    5 u_max
    6 rho      7 sigma    8 repair   9 terminal mode      10 head mode
"""

import math

EPS = 1e-9
VM_GUARD = 1e-3
ROOT_TOL = 1e-9
MAX_ITER = 200

TERM_FREE = 0
TERM_SIGMA = 1
TERM_VMAX = 2

HEAD_CRUISE = 0
HEAD_RHO = 1
HEAD_FORCE_TC = 2

REL_SAME_LANE = 0
REL_SAME_ROAD = 1
REL_OPPOSITE = 2
REL_CONFLICT = 3

RELAXED = 1
FLOORED = 2
VIOLATION = 4
FAULT = 8
CLAMPED = 16
KEPT = 32

IMPLEMENTATION = "python"


def free_coeffs(D, v, T):
    alpha = 3.0 * (v * T - D) / (T * T * T)
    beta = -alpha * T
    return alpha, beta


def fixed_coeffs(D, v, T, vt):
    alpha = 6.0 * ((v + vt) * T - 2.0 * D) / (T * T * T)
    beta = (vt - v) / T - 0.5 * alpha * T
    return alpha, beta


def sigma_coeffs(D, v, T, sigma, vmax):
    a11 = T + 0.5 * sigma * T * T
    a12 = 1.0 + sigma * T
    r1 = sigma * (vmax - v)
    a21 = T * T * T / 6.0
    a22 = 0.5 * T * T
    r2 = D - v * T
    det = a11 * a22 - a12 * a21
    alpha = (r1 * a22 - a12 * r2) / det
    beta = (a11 * r2 - a21 * r1) / det
    return alpha, beta


def reach_cap(D, v, umax):
    return math.sqrt(v * v + 2.0 * umax * D)


def end_speed(alpha, beta, v, T):
    return v + beta * T + 0.5 * alpha * T * T


def extremes(alpha, beta, v, T):
    """Return (v_lo, v_hi, u_lo, u_hi) of a local cubic over [0, T]."""
    vT = v + beta * T + 0.5 * alpha * T * T
    vlo = v
    vhi = v
    if vT < vlo:
        vlo = vT
    if vT > vhi:
        vhi = vT
    if alpha != 0.0:
        tstar = -beta / alpha
        if tstar > 0.0 and tstar < T:
            vs = v + beta * tstar + 0.5 * alpha * tstar * tstar
            if vs < vlo:
                vlo = vs
            if vs > vhi:
                vhi = vs
    uT = alpha * T + beta
    ulo = beta
    uhi = beta
    if uT < ulo:
        ulo = uT
    if uT > uhi:
        uhi = uT
    return vlo, vhi, ulo, uhi


def mode_coeffs(D, v, T, mode, prm):
    if mode == TERM_SIGMA:
        return sigma_coeffs(D, v, T, prm[7], prm[3])
    if mode == TERM_VMAX:
        vt = prm[3]
        cap = reach_cap(D, v, prm[5])
        if cap < vt:
            vt = cap
        return fixed_coeffs(D, v, T, vt)
    return free_coeffs(D, v, T)


def too_fast(alpha, beta, v, T, prm):
    vlo, vhi, ulo, uhi = extremes(alpha, beta, v, T)
    return vhi > prm[3] + EPS or uhi > prm[5] + EPS


def relax_free(D, v, T, prm):
    vmax = prm[3]
    umax = prm[5]
    T1 = 3.0 * D / (2.0 * vmax + v)
    T2 = (-3.0 * v + math.sqrt(9.0 * v * v + 12.0 * umax * D)) / (2.0 * umax)
    out = T
    if T1 > out:
        out = T1
    if T2 > out:
        out = T2
    return out


def relax_bisect(D, v, T, mode, prm):
    """Smallest horizon >= T whose plan respects the upper bounds.

    Returns -1.0 when no such horizon is found by geometric expansion.
    """
    lo = T
    hi = T
    found = 0
    for _ in range(MAX_ITER):
        hi = hi * 1.25 + 1e-3
        alpha, beta = mode_coeffs(D, v, hi, mode, prm)
        if not too_fast(alpha, beta, v, hi, prm):
            found = 1
            break
    if found == 0:
        return -1.0
    for _ in range(MAX_ITER):
        if hi - lo <= ROOT_TOL:
            break
        mid = 0.5 * (lo + hi)
        alpha, beta = mode_coeffs(D, v, mid, mode, prm)
        if too_fast(alpha, beta, v, mid, prm):
            lo = mid
        else:
            hi = mid
    return hi


def plan(ts, ps, vs, L, target, prm):
    """Solve and (optionally) repair one segment.

    Returns (alpha, beta, tm, vm, flags) with the cubic in local time.
    """
    D = L - ps
    T = target - ts
    flags = 0
    if T <= 1e-12 or D <= 0.0:
        return 0.0, 0.0, target, vs, FAULT | VIOLATION
    mode = int(prm[9])
    tm = target
    alpha, beta = mode_coeffs(D, vs, T, mode, prm)
    if prm[8] != 0.0:
        if too_fast(alpha, beta, vs, T, prm):
            if mode == TERM_FREE:
                T2 = relax_free(D, vs, T, prm)
            else:
                T2 = relax_bisect(D, vs, T, mode, prm)
            if T2 > T:
                T = T2
                tm = ts + T
                alpha, beta = mode_coeffs(D, vs, T, mode, prm)
                flags = flags | RELAXED
        vm = end_speed(alpha, beta, vs, T)
        if vm < prm[2] - EPS:
            alpha, beta = fixed_coeffs(D, vs, T, prm[2])
            flags = flags | FLOORED
    vm = end_speed(alpha, beta, vs, T)
    vlo, vhi, ulo, uhi = extremes(alpha, beta, vs, T)
    if (vhi > prm[3] + EPS or uhi > prm[5] + EPS
            or vlo < prm[2] - EPS or ulo < prm[4] - EPS):
        flags = flags | VIOLATION
    if vlo < -EPS or vm < VM_GUARD:
        flags = flags | FAULT
    return alpha, beta, tm, vm, flags


def free_time_residual(D, v, T, rho):
    alpha, beta = free_coeffs(D, v, T)
    return alpha * end_speed(alpha, beta, v, T) + rho


def free_time_root(D, v, rho):
    """Horizon T in (0, D/v] where alpha * v(T) = -rho for the free-speed cubic."""
    hi = D / v
    lo = 0.5 * hi
    for _ in range(MAX_ITER):
        if free_time_residual(D, v, lo, rho) < 0.0:
            break
        hi = lo
        lo = 0.5 * lo
    mid = hi
    for _ in range(MAX_ITER):
        mid = 0.5 * (lo + hi)
        r = free_time_residual(D, v, mid, rho)
        if r > -ROOT_TOL and r < ROOT_TOL:
            break
        if r > 0.0:
            hi = mid
        else:
            lo = mid
    return mid


def head_target(ts, ps, vs, L, tc, prm):
    """Terminal time of the first vehicle in a freshly scheduled queue."""
    mode = int(prm[10])
    if mode == HEAD_FORCE_TC:
        return tc, 0
    if mode == HEAD_RHO:
        t = ts + free_time_root(L - ps, vs, prm[6])
        if t < tc:
            return tc, CLAMPED
        return t, 0
    return ts + (L - ps) / vs, 0


def forward_pass(start, lane, L, tc, ts, ps, vs, has_plan, tm, vm, tf,
                 target, slot, ca, cb, flags, rel, nlanes, prm):
    """Assign terminal times to positions ``start..n-1`` of a sequence.

    All per-position arrays are in crossing order and are updated in
    place; entries before ``start`` are read only.  ``rel`` is the
    lane-by-lane relation matrix.
    """
    n = len(lane)
    S = prm[0]
    delta = prm[1]
    lane_l = [int(x) for x in lane]
    rel_l = [[int(rel[i][j]) for j in range(nlanes)] for i in range(nlanes)]
    L_l = [float(x) for x in L]
    tc_l = [float(x) for x in tc]
    ts_l = [float(x) for x in ts]
    ps_l = [float(x) for x in ps]
    vs_l = [float(x) for x in vs]
    tm_l = [float(x) for x in tm]
    vm_l = [float(x) for x in vm]
    tf_l = [float(x) for x in tf]
    tg_l = [float(x) for x in target]

    has_lane = [0] * nlanes
    last_tm = [0.0] * nlanes
    last_vm = [1.0] * nlanes
    max_tf = [0.0] * nlanes
    for q in range(start):
        li = lane_l[q]
        if has_lane[li] == 0 or tf_l[q] > max_tf[li]:
            max_tf[li] = tf_l[q]
        has_lane[li] = 1
        last_tm[li] = tm_l[q]
        last_vm[li] = vm_l[q]

    for q in range(start, n):
        li = lane_l[q]
        fl = 0
        s = -1.0e300
        if q == 0:
            tgt, fl = head_target(ts_l[q], ps_l[q], vs_l[q], L_l[q], tc_l[q], prm)
        else:
            pl = lane_l[q - 1]
            r = rel_l[pl][li]
            tp = tm_l[q - 1]
            vp = vm_l[q - 1]
            if vp < VM_GUARD:
                vp = VM_GUARD
            if r == REL_SAME_LANE:
                s = tp + delta / vp
            elif r == REL_CONFLICT:
                s = tp + S / vp
            else:
                s = tp
            if has_lane[li] != 0:
                vk = last_vm[li]
                if vk < VM_GUARD:
                    vk = VM_GUARD
                x = last_tm[li] + delta / vk
                if x > s:
                    s = x
            for c in range(nlanes):
                if has_lane[c] != 0 and rel_l[li][c] == REL_CONFLICT:
                    if max_tf[c] > s:
                        s = max_tf[c]
            tgt = s
            if tc_l[q] > tgt:
                tgt = tc_l[q]
        slot[q] = s
        if has_plan[q] != 0 and tgt == tg_l[q]:
            fl = int(flags[q]) | KEPT
        else:
            alpha, beta, tmq, vmq, pf = plan(ts_l[q], ps_l[q], vs_l[q], L_l[q], tgt, prm)
            fl = (fl | pf) & ~KEPT
            ca[q] = alpha
            cb[q] = beta
            tm_l[q] = tmq
            vm_l[q] = vmq
            vme = vmq
            if vme < VM_GUARD:
                vme = VM_GUARD
            tf_l[q] = tmq + S / vme
            tg_l[q] = tgt
        flags[q] = fl
        tm[q] = tm_l[q]
        vm[q] = vm_l[q]
        tf[q] = tf_l[q]
        target[q] = tg_l[q]
        if has_lane[li] == 0 or tf_l[q] > max_tf[li]:
            max_tf[li] = tf_l[q]
        has_lane[li] = 1
        last_tm[li] = tm_l[q]
        last_vm[li] = vm_l[q]


def fuel_integral(a, b, c, t0, t1, dt, w0, w1, w2, w3, r0, r1, r2):
    """Composite midpoint rule of the clamped fuel rate over [t0, t1]."""
    span = t1 - t0
    if span <= 0.0:
        return 0.0
    n = int(math.ceil(span / dt - 1e-9))
    if n < 1:
        n = 1
    h = span / n
    total = 0.0
    for k in range(n):
        t = t0 + (k + 0.5) * h
        v = 0.5 * a * t * t + b * t + c
        u = a * t + b
        rate = w0 + v * (w1 + v * (w2 + v * w3))
        if u > 0.0:
            rate = rate + u * (r0 + v * (r1 + v * r2))
        if rate < 0.0:
            rate = 0.0
        total = total + rate
    return total * h
