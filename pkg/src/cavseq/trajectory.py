"""Closed-form energy-optimal motion plans inside the control zone.

Every plan is a cubic in absolute time::

    u(t) = a t + b
    v(t) = a t^2 / 2 + b t + c
    p(t) = a t^3 / 6 + b t^2 / 2 + c t + d

valid on ``[t0, tm]``.  The solvers differ only in their terminal
conditions; the coefficient arithmetic lives in :mod:`cavseq.kernels` so
the simulator and these public functions share one code path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

from . import kernels


class InfeasiblePlan(ValueError):
    """Raised when boundary conditions cannot be met by a valid plan."""


@dataclass(frozen=True)
class InitialCondition:
    t0: float
    v0: float
    L: float
    p0: float = 0.0  # nonzero only when replanning mid-zone


@dataclass(frozen=True)
class CubicTrajectory:
    a: float
    b: float
    c: float
    d: float
    t0: float
    tm: float
    terminal_speed: float
    # (alpha, beta, p, v) at t0 when built from local form; evaluating
    # around t0 avoids cancellation in the absolute coefficients
    anchor: tuple | None = field(default=None, compare=False, repr=False)

    @classmethod
    def from_local(cls, alpha, beta, ts, ps, vs, tm):
        """Build from a cubic written in local time ``tau = t - ts``."""
        a = alpha
        b = beta - alpha * ts
        c = vs - beta * ts + 0.5 * alpha * ts * ts
        d = ps - vs * ts + 0.5 * beta * ts * ts - alpha * ts * ts * ts / 6.0
        T = tm - ts
        vm = vs + beta * T + 0.5 * alpha * T * T
        return cls(a, b, c, d, ts, tm, vm, (alpha, beta, ps, vs))

    def at(self, t):
        """(position, speed, control) at absolute time ``t``; no window check."""
        if self.anchor is not None:
            alpha, beta, p0, v0 = self.anchor
            s = t - self.t0
            u = alpha * s + beta
            v = v0 + s * (beta + 0.5 * alpha * s)
            p = p0 + s * (v0 + s * (0.5 * beta + alpha * s / 6.0))
            return p, v, u
        a, b = self.a, self.b
        u = a * t + b
        v = 0.5 * a * t * t + b * t + self.c
        p = a * t * t * t / 6.0 + 0.5 * b * t * t + self.c * t + self.d
        return p, v, u

    def local(self):
        """(alpha, beta, p0, v0) of the same cubic in local time from t0."""
        if self.anchor is not None:
            return self.anchor
        p0, v0, u0 = self.at(self.t0)
        return self.a, u0, p0, v0

    @property
    def duration(self):
        return self.tm - self.t0

    def energy(self, weight=1.0):
        """Closed-form 0.5 * weight * integral of u^2 over the window."""
        alpha, beta, _, _ = self.local()
        T = self.duration
        return 0.5 * weight * (alpha * alpha * T ** 3 / 3.0 + alpha * beta * T * T + beta * beta * T)


class FreeTimeResult(NamedTuple):
    trajectory: CubicTrajectory
    tm: float
    clamped: bool


@dataclass(frozen=True)
class Violation:
    bound: str
    start: float
    end: float
    t_extreme: float
    extreme: float


@dataclass(frozen=True)
class FuelCoefficients:
    """Polynomial fuel-rate metamodel.

    Rate (mL/s by default) is ``cruise(v) + max(u, 0) * accel(v)``
    clamped at zero; ``scale`` converts integrated rate to liters.
    """

    cruise: tuple = (0.1569, 2.450e-2, -7.415e-4, 5.975e-5)
    accel: tuple = (0.07224, 9.681e-2, 1.075e-3)
    scale: float = 1e-3

    def rate(self, v, u):
        w0, w1, w2, w3 = self.cruise
        r0, r1, r2 = self.accel
        r = w0 + v * (w1 + v * (w2 + v * w3))
        if u > 0.0:
            r += u * (r0 + v * (r1 + v * r2))
        return max(r, 0.0)


def earliest_arrival(ic, limits):
    """Lower bound on the merging-zone entry time under u_max and v_max."""
    v_max, u_max = limits.v_max, limits.u_max
    D = ic.L - ic.p0
    peak = math.sqrt(2.0 * D * u_max + ic.v0 * ic.v0)
    if peak >= v_max:
        return ic.t0 + D / v_max + (v_max - ic.v0) ** 2 / (2.0 * u_max * v_max)
    return ic.t0 + (peak - ic.v0) / u_max


def _build(ic, alpha, beta, tm):
    return CubicTrajectory.from_local(alpha, beta, ic.t0, ic.p0, ic.v0, tm)


def _horizon(ic, tm):
    T = tm - ic.t0
    if T <= 0.0:
        raise InfeasiblePlan(f"terminal time {tm} is not after start time {ic.t0}")
    return T


def _check_lower_bound(ic, tm, limits):
    if limits is not None:
        tc = earliest_arrival(ic, limits)
        if tm < tc - 1e-9:
            raise InfeasiblePlan(f"terminal time {tm:.6f} precedes earliest arrival {tc:.6f}")


def solve_free_speed(ic, tm, limits=None):
    """Minimum-energy plan reaching L at ``tm`` with unspecified terminal speed.

    The missing terminal condition is ``u(tm) = 0``.  When ``limits`` is
    given, ``tm`` earlier than :func:`earliest_arrival` raises.
    """
    _check_lower_bound(ic, tm, limits)
    T = _horizon(ic, tm)
    alpha, beta = kernels.free_coeffs(ic.L - ic.p0, ic.v0, T)
    return _build(ic, alpha, beta, tm)


def solve_fixed_speed(ic, tm, vm, limits=None):
    """Minimum-energy plan reaching L at ``tm`` with speed ``vm``.

    With ``limits``, a target above the speed reachable under full
    acceleration over the remaining distance is lowered to that speed.
    """
    T = _horizon(ic, tm)
    D = ic.L - ic.p0
    if limits is not None:
        cap = kernels.reach_cap(D, ic.v0, limits.u_max)
        if vm > cap:
            vm = cap
    alpha, beta = kernels.fixed_coeffs(D, ic.v0, T, vm)
    vlo, _, _, _ = kernels.extremes(alpha, beta, ic.v0, T)
    if vlo < -kernels.EPS:
        raise InfeasiblePlan(f"plan reaching {vm:.4f} m/s at {tm:.4f} s reverses (min speed {vlo:.4f})")
    return _build(ic, alpha, beta, tm)


def solve_penalized_speed(ic, tm, sigma, v_max, limits=None):
    """Plan with terminal cost (sigma/2)(v(tm) - v_max)^2.

    Terminal condition ``u(tm) = sigma * (v_max - v(tm))``; ``sigma = 0``
    reproduces :func:`solve_free_speed`.
    """
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    _check_lower_bound(ic, tm, limits)
    T = _horizon(ic, tm)
    alpha, beta = kernels.sigma_coeffs(ic.L - ic.p0, ic.v0, T, sigma, v_max)
    return _build(ic, alpha, beta, tm)


def solve_free_time(ic, rho, limits=None):
    """Free-terminal-time plan with running cost u^2/2 + rho.

    Solves ``a * v(tm) = -rho`` by bisection on the horizon.  With
    ``limits`` the result is clamped to :func:`earliest_arrival`, and
    ``clamped`` reports whether that happened.
    """
    if rho <= 0:
        raise ValueError("rho must be positive")
    D = ic.L - ic.p0
    T = kernels.free_time_root(D, ic.v0, rho)
    tm = ic.t0 + T
    clamped = False
    if limits is not None:
        tc = earliest_arrival(ic, limits)
        if tm < tc:
            tm, clamped = tc, True
    alpha, beta = kernels.free_coeffs(D, ic.v0, tm - ic.t0)
    return FreeTimeResult(_build(ic, alpha, beta, tm), tm, clamped)


def evaluate(traj, t):
    """(p, v, u) of ``traj`` at ``t``; raises outside the validity window."""
    if t < traj.t0 - 1e-12 or t > traj.tm + 1e-12:
        raise ValueError(f"t={t} outside [{traj.t0}, {traj.tm}]")
    return traj.at(t)


def _roots_in(coefs, lo, hi):
    # real roots of c2 t^2 + c1 t + c0 strictly inside (lo, hi)
    c2, c1, c0 = coefs
    out = []
    if c2 == 0.0:
        if c1 != 0.0:
            out.append(-c0 / c1)
    else:
        disc = c1 * c1 - 4.0 * c2 * c0
        if disc >= 0.0:
            sq = math.sqrt(disc)
            q = -0.5 * (c1 + math.copysign(sq, c1))
            out.append(q / c2)
            if q != 0.0:
                out.append(c0 / q)
    return sorted(r for r in out if lo < r < hi)


def _exceedances(coefs, lo, hi, sign, tol):
    """Sub-intervals of [lo, hi] where sign * poly(t) > tol."""
    c2, c1, c0 = coefs

    def f(t):
        return sign * ((c2 * t + c1) * t + c0)

    cuts = [lo] + _roots_in(coefs, lo, hi) + [hi]
    spans = []
    for s, e in zip(cuts[:-1], cuts[1:]):
        cands = [s, e]
        if c2 != 0.0:
            vx = -c1 / (2.0 * c2)
            if s < vx < e:
                cands.append(vx)
        tx = max(cands, key=f)
        if f(tx) > tol:
            if spans and spans[-1][1] == s:
                prev = spans.pop()
                tx = prev[2] if f(prev[2]) >= f(tx) else tx
                s = prev[0]
            spans.append((s, e, tx))
    return [(s, e, tx, sign * f(tx)) for s, e, tx in spans]


def check_limits(traj, limits, tol=1e-9):
    """Every interval on which u or v leaves its admissible box.

    Extremes are located analytically (u is linear, v quadratic).
    """
    lo, hi = traj.t0, traj.tm
    a, b, c = traj.a, traj.b, traj.c
    u_poly = (0.0, a, b)
    v_poly = (0.5 * a, b, c)
    # shift so each bound is the zero level
    checks = [
        ("u_max", u_poly, limits.u_max, 1.0),
        ("u_min", u_poly, limits.u_min, -1.0),
        ("v_max", v_poly, limits.v_max, 1.0),
        ("v_min", v_poly, limits.v_min, -1.0),
    ]
    found = []
    for name, (c2, c1, c0), bound, sign in checks:
        for s, e, tx, _ in _exceedances((c2, c1, c0 - bound), lo, hi, sign, tol):
            value = (c2 * tx + c1) * tx + c0
            found.append(Violation(name, s, e, tx, value))
    found.sort(key=lambda x: (x.start, x.bound))
    return found


def fuel_total(traj, coeffs, dt=0.01, t_start=None, t_end=None):
    """Fuel in liters over ``[t_start, t_end]`` (default: the whole window)."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    t0 = traj.t0 if t_start is None else t_start
    t1 = traj.tm if t_end is None else t_end
    w0, w1, w2, w3 = coeffs.cruise
    r0, r1, r2 = coeffs.accel
    raw = kernels.fuel_integral(traj.a, traj.b, traj.c, t0, t1, dt, w0, w1, w2, w3, r0, r1, r2)
    return raw * coeffs.scale
