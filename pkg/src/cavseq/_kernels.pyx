# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled counterpart of ``_pykernels``.

Expression order mirrors the Python reference line for line; keep the
two in lockstep when editing.
"""

from libc.math cimport sqrt, ceil

cdef double EPS = 1e-9
cdef double VM_GUARD = 1e-3
cdef double ROOT_TOL = 1e-9
cdef int MAX_ITER = 200

cdef enum:
    TERM_FREE = 0
    TERM_SIGMA = 1
    TERM_VMAX = 2
    HEAD_CRUISE = 0
    HEAD_RHO = 1
    HEAD_FORCE_TC = 2
    REL_SAME_LANE = 0
    REL_CONFLICT = 3
    RELAXED = 1
    FLOORED = 2
    VIOLATION = 4
    FAULT = 8
    CLAMPED = 16
    KEPT = 32

IMPLEMENTATION = "cython"


cdef inline void _free(double D, double v, double T, double* alpha, double* beta) noexcept nogil:
    alpha[0] = 3.0 * (v * T - D) / (T * T * T)
    beta[0] = -alpha[0] * T


cdef inline void _fixed(double D, double v, double T, double vt, double* alpha, double* beta) noexcept nogil:
    alpha[0] = 6.0 * ((v + vt) * T - 2.0 * D) / (T * T * T)
    beta[0] = (vt - v) / T - 0.5 * alpha[0] * T


cdef inline void _sigma(double D, double v, double T, double sigma, double vmax,
                        double* alpha, double* beta) noexcept nogil:
    cdef double a11 = T + 0.5 * sigma * T * T
    cdef double a12 = 1.0 + sigma * T
    cdef double r1 = sigma * (vmax - v)
    cdef double a21 = T * T * T / 6.0
    cdef double a22 = 0.5 * T * T
    cdef double r2 = D - v * T
    cdef double det = a11 * a22 - a12 * a21
    alpha[0] = (r1 * a22 - a12 * r2) / det
    beta[0] = (a11 * r2 - a21 * r1) / det


cdef inline double _end_speed(double alpha, double beta, double v, double T) noexcept nogil:
    return v + beta * T + 0.5 * alpha * T * T


cdef void _extremes(double alpha, double beta, double v, double T, double* out) noexcept nogil:
    cdef double vT = v + beta * T + 0.5 * alpha * T * T
    cdef double vlo = v
    cdef double vhi = v
    cdef double tstar, vs, uT, ulo, uhi
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
    out[0] = vlo
    out[1] = vhi
    out[2] = ulo
    out[3] = uhi


cdef void _mode(double D, double v, double T, int mode, double* prm,
                double* alpha, double* beta) noexcept nogil:
    cdef double vt, cap
    if mode == TERM_SIGMA:
        _sigma(D, v, T, prm[7], prm[3], alpha, beta)
        return
    if mode == TERM_VMAX:
        vt = prm[3]
        cap = sqrt(v * v + 2.0 * prm[5] * D)
        if cap < vt:
            vt = cap
        _fixed(D, v, T, vt, alpha, beta)
        return
    _free(D, v, T, alpha, beta)


cdef inline bint _too_fast(double alpha, double beta, double v, double T, double* prm) noexcept nogil:
    cdef double ex[4]
    _extremes(alpha, beta, v, T, ex)
    return ex[1] > prm[3] + EPS or ex[3] > prm[5] + EPS


cdef double _relax_free(double D, double v, double T, double* prm) noexcept nogil:
    cdef double vmax = prm[3]
    cdef double umax = prm[5]
    cdef double T1 = 3.0 * D / (2.0 * vmax + v)
    cdef double T2 = (-3.0 * v + sqrt(9.0 * v * v + 12.0 * umax * D)) / (2.0 * umax)
    cdef double out = T
    if T1 > out:
        out = T1
    if T2 > out:
        out = T2
    return out


cdef double _relax_bisect(double D, double v, double T, int mode, double* prm) noexcept nogil:
    cdef double lo = T
    cdef double hi = T
    cdef double mid, alpha, beta
    cdef int found = 0
    cdef int it
    for it in range(MAX_ITER):
        hi = hi * 1.25 + 1e-3
        _mode(D, v, hi, mode, prm, &alpha, &beta)
        if not _too_fast(alpha, beta, v, hi, prm):
            found = 1
            break
    if found == 0:
        return -1.0
    for it in range(MAX_ITER):
        if hi - lo <= ROOT_TOL:
            break
        mid = 0.5 * (lo + hi)
        _mode(D, v, mid, mode, prm, &alpha, &beta)
        if _too_fast(alpha, beta, v, mid, prm):
            lo = mid
        else:
            hi = mid
    return hi


cdef int _plan(double ts, double ps, double vs, double L, double target, double* prm,
               double* out) noexcept nogil:
    # out = [alpha, beta, tm, vm]; returns flags
    cdef double D = L - ps
    cdef double T = target - ts
    cdef int flags = 0
    cdef int mode
    cdef double tm, alpha, beta, T2, vm
    cdef double ex[4]
    if T <= 1e-12 or D <= 0.0:
        out[0] = 0.0
        out[1] = 0.0
        out[2] = target
        out[3] = vs
        return FAULT | VIOLATION
    mode = <int>prm[9]
    tm = target
    _mode(D, vs, T, mode, prm, &alpha, &beta)
    if prm[8] != 0.0:
        if _too_fast(alpha, beta, vs, T, prm):
            if mode == TERM_FREE:
                T2 = _relax_free(D, vs, T, prm)
            else:
                T2 = _relax_bisect(D, vs, T, mode, prm)
            if T2 > T:
                T = T2
                tm = ts + T
                _mode(D, vs, T, mode, prm, &alpha, &beta)
                flags = flags | RELAXED
        vm = _end_speed(alpha, beta, vs, T)
        if vm < prm[2] - EPS:
            _fixed(D, vs, T, prm[2], &alpha, &beta)
            flags = flags | FLOORED
    vm = _end_speed(alpha, beta, vs, T)
    _extremes(alpha, beta, vs, T, ex)
    if (ex[1] > prm[3] + EPS or ex[3] > prm[5] + EPS
            or ex[0] < prm[2] - EPS or ex[2] < prm[4] - EPS):
        flags = flags | VIOLATION
    if ex[0] < -EPS or vm < VM_GUARD:
        flags = flags | FAULT
    out[0] = alpha
    out[1] = beta
    out[2] = tm
    out[3] = vm
    return flags


cdef inline double _residual(double D, double v, double T, double rho) noexcept nogil:
    cdef double alpha, beta
    _free(D, v, T, &alpha, &beta)
    return alpha * _end_speed(alpha, beta, v, T) + rho


cdef double _root(double D, double v, double rho) noexcept nogil:
    cdef double hi = D / v
    cdef double lo = 0.5 * hi
    cdef double mid, r
    cdef int it
    for it in range(MAX_ITER):
        if _residual(D, v, lo, rho) < 0.0:
            break
        hi = lo
        lo = 0.5 * lo
    mid = hi
    for it in range(MAX_ITER):
        mid = 0.5 * (lo + hi)
        r = _residual(D, v, mid, rho)
        if r > -ROOT_TOL and r < ROOT_TOL:
            break
        if r > 0.0:
            hi = mid
        else:
            lo = mid
    return mid


cdef int _head(double ts, double ps, double vs, double L, double tc, double* prm,
               double* tgt) noexcept nogil:
    cdef int mode = <int>prm[10]
    cdef double t
    if mode == HEAD_FORCE_TC:
        tgt[0] = tc
        return 0
    if mode == HEAD_RHO:
        t = ts + _root(L - ps, vs, prm[6])
        if t < tc:
            tgt[0] = tc
            return CLAMPED
        tgt[0] = t
        return 0
    tgt[0] = ts + (L - ps) / vs
    return 0


# ---- Python-visible wrappers (same names and return shapes as _pykernels) ----

def free_coeffs(double D, double v, double T):
    cdef double alpha, beta
    _free(D, v, T, &alpha, &beta)
    return alpha, beta


def fixed_coeffs(double D, double v, double T, double vt):
    cdef double alpha, beta
    _fixed(D, v, T, vt, &alpha, &beta)
    return alpha, beta


def sigma_coeffs(double D, double v, double T, double sigma, double vmax):
    cdef double alpha, beta
    _sigma(D, v, T, sigma, vmax, &alpha, &beta)
    return alpha, beta


def reach_cap(double D, double v, double umax):
    return sqrt(v * v + 2.0 * umax * D)


def end_speed(double alpha, double beta, double v, double T):
    return _end_speed(alpha, beta, v, T)


def extremes(double alpha, double beta, double v, double T):
    cdef double ex[4]
    _extremes(alpha, beta, v, T, ex)
    return ex[0], ex[1], ex[2], ex[3]


def plan(double ts, double ps, double vs, double L, double target, prm):
    cdef double p[11]
    cdef double out[4]
    cdef int i
    for i in range(11):
        p[i] = prm[i]
    cdef int fl = _plan(ts, ps, vs, L, target, p, out)
    return out[0], out[1], out[2], out[3], fl


def free_time_residual(double D, double v, double T, double rho):
    return _residual(D, v, T, rho)


def free_time_root(double D, double v, double rho):
    return _root(D, v, rho)


def head_target(double ts, double ps, double vs, double L, double tc, prm):
    cdef double p[11]
    cdef double tgt
    cdef int i
    for i in range(11):
        p[i] = prm[i]
    cdef int fl = _head(ts, ps, vs, L, tc, p, &tgt)
    return tgt, fl


def forward_pass(int start, int[:] lane, double[:] L, double[:] tc, double[:] ts,
                 double[:] ps, double[:] vs, int[:] has_plan, double[:] tm,
                 double[:] vm, double[:] tf, double[:] target, double[:] slot,
                 double[:] ca, double[:] cb, int[:] flags, int[:, :] rel,
                 int nlanes, prm):
    cdef double p[11]
    cdef int i
    for i in range(11):
        p[i] = prm[i]
    cdef Py_ssize_t n = lane.shape[0]
    cdef double S = p[0]
    cdef double delta = p[1]
    cdef int has_lane[64]
    cdef double last_tm[64]
    cdef double last_vm[64]
    cdef double max_tf[64]
    cdef double out[4]
    cdef Py_ssize_t q
    cdef int li, pl, r, c, fl, pf
    cdef double s, tp, vp, vk, x, tgt, vme
    if nlanes > 64:
        raise ValueError("at most 64 lanes are supported by the compiled kernel")
    for c in range(nlanes):
        has_lane[c] = 0
        last_tm[c] = 0.0
        last_vm[c] = 1.0
        max_tf[c] = 0.0
    with nogil:
        for q in range(start):
            li = lane[q]
            if has_lane[li] == 0 or tf[q] > max_tf[li]:
                max_tf[li] = tf[q]
            has_lane[li] = 1
            last_tm[li] = tm[q]
            last_vm[li] = vm[q]

        for q in range(start, n):
            li = lane[q]
            fl = 0
            s = -1.0e300
            if q == 0:
                fl = _head(ts[q], ps[q], vs[q], L[q], tc[q], p, &tgt)
            else:
                pl = lane[q - 1]
                r = rel[pl, li]
                tp = tm[q - 1]
                vp = vm[q - 1]
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
                    if has_lane[c] != 0 and rel[li, c] == REL_CONFLICT:
                        if max_tf[c] > s:
                            s = max_tf[c]
                tgt = s
                if tc[q] > tgt:
                    tgt = tc[q]
            slot[q] = s
            if has_plan[q] != 0 and tgt == target[q]:
                fl = flags[q] | KEPT
            else:
                pf = _plan(ts[q], ps[q], vs[q], L[q], tgt, p, out)
                fl = (fl | pf) & ~KEPT
                ca[q] = out[0]
                cb[q] = out[1]
                tm[q] = out[2]
                vm[q] = out[3]
                vme = out[3]
                if vme < VM_GUARD:
                    vme = VM_GUARD
                tf[q] = out[2] + S / vme
                target[q] = tgt
            flags[q] = fl
            if has_lane[li] == 0 or tf[q] > max_tf[li]:
                max_tf[li] = tf[q]
            has_lane[li] = 1
            last_tm[li] = tm[q]
            last_vm[li] = vm[q]


def fuel_integral(double a, double b, double c, double t0, double t1, double dt,
                  double w0, double w1, double w2, double w3,
                  double r0, double r1, double r2):
    cdef double span = t1 - t0
    cdef long n, k
    cdef double h, total, t, v, u, rate
    if span <= 0.0:
        return 0.0
    n = <long>ceil(span / dt - 1e-9)
    if n < 1:
        n = 1
    h = span / n
    total = 0.0
    with nogil:
        for k in range(n):
            t = t0 + (<double>k + 0.5) * h
            v = 0.5 * a * t * t + b * t + c
            u = a * t + b
            rate = w0 + v * (w1 + v * (w2 + v * w3))
            if u > 0.0:
                rate = rate + u * (r0 + v * (r1 + v * r2))
            if rate < 0.0:
                rate = 0.0
            total = total + rate
    return total * h
