import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st
from scipy.optimize import brentq

from cavseq.config import VehicleLimits
from cavseq.trajectory import (CubicTrajectory, FuelCoefficients, InfeasiblePlan, InitialCondition, check_limits,
                               earliest_arrival, evaluate, fuel_total, solve_fixed_speed, solve_free_speed,
                               solve_free_time, solve_penalized_speed)
from oracles import earliest_arrival_ref, free_time_optimum, qp_min_energy, qp_penalized

LIM = VehicleLimits()

# frozen after checking against the discretized oracle and brentq
RHO5_HORIZON = 16.446870589861646


def ic(v0=10.0, L=400.0, t0=0.0):
    return InitialCondition(t0, v0, L)


# ------------------------------------------------------------ earliest arrival

def test_earliest_arrival_reachable_branch():
    assert earliest_arrival(ic(12.0), LIM) == pytest.approx(25.25, abs=1e-12)


def test_earliest_arrival_at_vmax_is_pure_cruise():
    assert earliest_arrival(ic(16.0, t0=3.0), LIM) == pytest.approx(3.0 + 400 / 16, abs=1e-12)


def test_earliest_arrival_unreachable_branch():
    tc = earliest_arrival(InitialCondition(0.0, 4.0, 30.0), LIM)
    assert tc == pytest.approx((math.sqrt(136.0) - 4.0) / 2.0, abs=1e-12)
    assert tc == pytest.approx(3.831, abs=1e-3)


@given(v0=st.floats(4, 16), L=st.floats(20, 600), t0=st.floats(0, 500))
def test_earliest_arrival_matches_bang_cruise_reference(v0, L, t0):
    assert earliest_arrival(ic(v0, L, t0), LIM) == pytest.approx(earliest_arrival_ref(t0, v0, L, 16.0, 2.0),
                                                               rel=1e-12)


# ------------------------------------------------------------ free speed

def test_free_speed_cruise():
    tr = solve_free_speed(ic(), 40.0)
    assert (tr.a, tr.b, tr.c) == (0.0, 0.0, 10.0)
    assert tr.terminal_speed == 10.0


def test_free_speed_acceleration_case():
    tr = solve_free_speed(ic(), 35.0)
    assert tr.terminal_speed == pytest.approx(3 * 400 / 70 - 5, abs=1e-12)
    assert tr.terminal_speed == pytest.approx(12.142857, abs=1e-6)
    assert tr.a == pytest.approx(3 * (350 - 400) / 35 ** 3, rel=1e-12)
    assert tr.a == pytest.approx(-3.4985e-3, abs=1e-7)
    assert tr.b == pytest.approx(-tr.a * 35.0, rel=1e-12)
    E, p, v, _ = qp_min_energy(10.0, 400.0, 35.0)
    assert tr.energy() == pytest.approx(E, rel=1e-6)
    assert tr.terminal_speed == pytest.approx(v, abs=1e-5)


def test_free_speed_deceleration_case():
    assert solve_free_speed(ic(), 50.0).terminal_speed == pytest.approx(7.0, abs=1e-12)


def test_free_speed_rejects_time_before_earliest_arrival():
    with pytest.raises(InfeasiblePlan):
        solve_free_speed(ic(), 20.0, LIM)


def test_free_speed_terminal_control_is_zero():
    tr = solve_free_speed(ic(t0=12.0), 47.0)
    assert tr.at(47.0)[2] == pytest.approx(0.0, abs=1e-12)


# ------------------------------------------------------------ fixed speed

def test_fixed_speed_cruise():
    tr = solve_fixed_speed(ic(), 40.0, 10.0)
    assert tr.a == 0.0 and tr.b == 0.0 and tr.terminal_speed == 10.0


def test_fixed_speed_to_vmax():
    tr = solve_fixed_speed(ic(), 30.0, 16.0)
    assert tr.a == pytest.approx(6 / 900 * (26 - 800 / 30), rel=1e-12)
    assert tr.a == pytest.approx(-0.0044444, abs=1e-7)
    assert tr.terminal_speed == pytest.approx(16.0, abs=1e-12)
    E, p, v, _ = qp_min_energy(10.0, 400.0, 30.0, vt=16.0)
    assert tr.energy() == pytest.approx(E, rel=1e-6)


def test_fixed_speed_reachability_cap():
    tr = solve_fixed_speed(InitialCondition(0.0, 4.0, 30.0), 5.0, 16.0, LIM)
    assert tr.terminal_speed == pytest.approx(math.sqrt(136.0), abs=1e-12)
    assert tr.terminal_speed == pytest.approx(11.662, abs=1e-3)


def test_fixed_speed_reversal_is_infeasible():
    # 400 m in 200 s ending at 16 m/s needs negative speed on the way
    with pytest.raises(InfeasiblePlan):
        solve_fixed_speed(ic(), 200.0, 16.0)


# ------------------------------------------------------------ penalized

def test_penalized_zero_sigma_is_free_speed():
    a = solve_penalized_speed(ic(), 35.0, 0.0, 16.0)
    b = solve_free_speed(ic(), 35.0)
    for x, y in zip((a.a, a.b, a.c, a.d), (b.a, b.b, b.c, b.d)):
        assert abs(x - y) <= 1e-12


def test_penalized_large_sigma_approaches_vmax():
    tr = solve_penalized_speed(ic(), 35.0, 1e6, 16.0)
    assert abs(tr.terminal_speed - 16.0) < 1e-3


def test_penalized_unit_sigma_between_limits():
    vm = solve_penalized_speed(ic(), 35.0, 1.0, 16.0).terminal_speed
    assert 12.142857 < vm < 16.0
    _, v_ref, _ = qp_penalized(10.0, 400.0, 35.0, 1.0, 16.0)
    assert vm == pytest.approx(v_ref, abs=1e-5)


@pytest.mark.parametrize("sigma", [0.1, 1.0, 10.0])
def test_penalized_matches_discretized_oracle(sigma):
    tr = solve_penalized_speed(ic(11.0, 300.0), 24.0, sigma, 16.0)
    p_ref, v_ref, _ = qp_penalized(11.0, 300.0, 24.0, sigma, 16.0)
    assert tr.terminal_speed == pytest.approx(v_ref, abs=1e-4)
    assert tr.at(24.0)[0] == pytest.approx(300.0, abs=1e-9)


def test_penalized_terminal_condition():
    s = 0.7
    tr = solve_penalized_speed(ic(), 35.0, s, 16.0)
    _, v, u = tr.at(35.0)
    assert u == pytest.approx(s * (16.0 - v), abs=1e-12)


# ------------------------------------------------------------ free time

def _free_time_residual(T, v, D, rho):
    alpha = 3 * (v * T - D) / T ** 3
    return alpha * (3 * D / (2 * T) - v / 2) + rho


def test_free_time_golden_root():
    res = solve_free_time(ic(), 5.0)
    assert not res.clamped
    assert res.tm == pytest.approx(RHO5_HORIZON, abs=1e-12)
    assert res.tm == pytest.approx(brentq(_free_time_residual, 1.0, 40.0, args=(10.0, 400.0, 5.0), xtol=1e-14),
                                   abs=1e-8)
    assert res.tm == pytest.approx(free_time_optimum(10.0, 400.0, 5.0), abs=1e-5)
    assert 0 < res.tm < 40.0


def test_free_time_with_rho5_clamps_to_earliest_arrival():
    res = solve_free_time(ic(), 5.0, LIM)
    assert res.clamped
    assert res.tm == pytest.approx(earliest_arrival(ic(), LIM), abs=1e-12)


def test_free_time_small_rho_tends_to_cruise():
    assert solve_free_time(ic(), 1e-9).tm == pytest.approx(40.0, rel=1e-3)


def test_free_time_large_rho_clamps():
    res = solve_free_time(ic(), 1e6, LIM)
    assert res.clamped and res.tm == earliest_arrival(ic(), LIM)


@given(v0=st.floats(4, 16), D=st.floats(50, 600), r1=st.floats(1e-3, 50), f=st.floats(1.001, 10))
def test_free_time_monotone_in_rho(v0, D, r1, f):
    t1 = solve_free_time(ic(v0, D), r1).tm
    t2 = solve_free_time(ic(v0, D), r1 * f).tm
    assert t2 <= t1 + 1e-9


# ------------------------------------------------------------ evaluation

def test_evaluate_boundaries_and_window():
    tr = solve_free_speed(ic(t0=5.0), 40.0)
    p, v, u = evaluate(tr, 5.0)
    assert p == pytest.approx(0.0, abs=1e-9) and v == pytest.approx(10.0, abs=1e-12)
    assert u == tr.a * 5.0 + tr.b
    p, v, _ = evaluate(tr, 40.0)
    assert p == pytest.approx(400.0, abs=1e-9) and v == pytest.approx(tr.terminal_speed, abs=1e-12)
    with pytest.raises(ValueError):
        evaluate(tr, 40.5)
    with pytest.raises(ValueError):
        evaluate(tr, 4.0)


@given(t=st.floats(0, 40))
def test_evaluate_cruise(t):
    tr = solve_free_speed(ic(), 40.0)
    p, v, u = evaluate(tr, t)
    assert p == pytest.approx(10.0 * t, abs=1e-9) and v == 10.0 and u == 0.0


# ------------------------------------------------------------ limits

def test_check_limits_cruise_is_clean():
    assert check_limits(solve_free_speed(ic(), 40.0), LIM) == []


def test_check_limits_reports_vmin_dip_at_vertex():
    tr = solve_free_speed(ic(), 80.0)
    bad = check_limits(tr, LIM)
    assert [v.bound for v in bad] == ["v_min"]
    v = bad[0]
    assert v.t_extreme == pytest.approx(-tr.b / tr.a, abs=1e-9)
    assert v.extreme == pytest.approx(2.5, abs=1e-9)
    assert v.start == pytest.approx(80 - math.sqrt(6400 - 5120), abs=1e-9)
    assert v.end == 80.0


def test_check_limits_reports_umax_at_start():
    tr = solve_fixed_speed(ic(), 8.0, 16.0)
    bad = {v.bound: v for v in check_limits(tr, LIM)}
    assert "u_max" in bad
    assert bad["u_max"].start == 0.0
    assert bad["u_max"].t_extreme == 0.0
    assert bad["u_max"].extreme == pytest.approx(tr.b, abs=1e-12)


def test_check_limits_interior_speed_peak():
    # accelerate then brake to a low terminal speed: the peak is interior
    tr = solve_fixed_speed(ic(14.0), 22.0, 6.0)
    bad = [v for v in check_limits(tr, LIM) if v.bound == "v_max"]
    assert len(bad) == 1
    t_star = -tr.b / tr.a
    assert bad[0].t_extreme == pytest.approx(t_star, abs=1e-9)
    assert bad[0].start < t_star < bad[0].end


@given(v0=st.floats(4, 16), L=st.floats(30, 600), vm=st.floats(4, 16), free=st.booleans())
def test_earliest_arrival_is_lower_bound(v0, L, vm, free):
    c = ic(v0, L)
    tm = earliest_arrival(c, LIM) - 1e-3
    assume(tm > 1e-2)
    tr = solve_free_speed(c, tm) if free else solve_fixed_speed(c, tm, vm)
    bounds = {v.bound for v in check_limits(tr, LIM)}
    assert bounds & {"u_max", "v_max"}


# ------------------------------------------------------------ fuel

FC = FuelCoefficients()


def test_fuel_constant_term():
    dummy = CubicTrajectory(0.0, 0.0, 0.0, 0.0, 0.0, 10.0, 0.0)
    assert fuel_total(dummy, FC) == pytest.approx(FC.cruise[0] * 10.0 * 1e-3, rel=1e-12)


def test_fuel_ignores_deceleration_in_accel_term():
    tr = solve_free_speed(ic(), 50.0)
    assert all(tr.at(t)[2] <= 0 for t in np.linspace(0, 50, 101))
    coasting = FuelCoefficients(accel=(0.0, 0.0, 0.0))
    assert fuel_total(tr, FC) == fuel_total(tr, coasting)


def test_fuel_matches_dense_quadrature():
    tr = solve_fixed_speed(ic(), 30.0, 16.0)
    t = np.linspace(0, 30, 300001)
    mid = 0.5 * (t[1:] + t[:-1])
    rate = np.array([FC.rate(tr.at(x)[1], tr.at(x)[2]) for x in mid[::100]])
    ref = rate.mean() * 30.0 * FC.scale
    assert fuel_total(tr, FC) == pytest.approx(ref, rel=1e-4)


@given(v0=st.floats(4, 16), L=st.floats(50, 500), k=st.floats(1.0, 2.5), vm=st.floats(4, 16))
def test_fuel_halving_step_is_stable(v0, L, k, vm):
    c = ic(v0, L)
    tr = solve_fixed_speed(c, earliest_arrival(c, LIM) * k, vm)
    coarse = fuel_total(tr, FC, dt=0.01)
    fine = fuel_total(tr, FC, dt=0.005)
    assert abs(coarse - fine) <= 1e-3 * fine


def test_fuel_rejects_bad_step():
    with pytest.raises(ValueError):
        fuel_total(solve_free_speed(ic(), 40.0), FC, dt=0.0)


# ------------------------------------------------------------ properties

variant = st.sampled_from(["free", "fixed", "sigma"])


@given(v0=st.floats(4, 16), L=st.floats(30, 600), k=st.floats(1.0, 3.0), t0=st.floats(0, 300),
       kind=variant, vm=st.floats(4, 16), sigma=st.floats(0, 100))
def test_boundary_exactness(v0, L, k, t0, kind, vm, sigma):
    c = ic(v0, L, t0)
    tm = earliest_arrival(c, LIM) + (k - 1.0) * L / v0
    if kind == "free":
        tr = solve_free_speed(c, tm)
    elif kind == "fixed":
        try:
            tr = solve_fixed_speed(c, tm, vm)
        except InfeasiblePlan:
            return
    else:
        tr = solve_penalized_speed(c, tm, sigma, 16.0)
    p0, v_0, _ = tr.at(t0)
    p1, v1, _ = tr.at(tm)
    assert abs(p1 - L) < 1e-9 * L
    assert abs(p0) < 1e-9 * L
    assert abs(v_0 - v0) < 1e-9 * v0
    assert tr.terminal_speed == pytest.approx(v1, abs=1e-9)


@given(v0=st.floats(4, 16), L=st.floats(30, 600), k=st.floats(1.0, 3.0), s=st.floats(0, 50))
def test_sigma_continuity(v0, L, k, s):
    c = ic(v0, L)
    tm = earliest_arrival(c, LIM) * k
    a = solve_penalized_speed(c, tm, s, 16.0).terminal_speed
    b = solve_penalized_speed(c, tm, s + 1e-7, 16.0).terminal_speed
    # terminal speed moves at most 16 * T^2 per unit of sigma
    assert abs(a - b) <= 1e-7 * 16.0 * tm * tm


@given(v0=st.floats(4, 16), L=st.floats(30, 600), k=st.floats(1.0, 3.0), t0=st.floats(0, 100))
def test_free_speed_matches_qp_oracle(v0, L, k, t0):
    c = ic(v0, L, t0)
    T = (earliest_arrival(c, LIM) - t0) * k
    tr = solve_free_speed(c, t0 + T)
    E, p, v, _ = qp_min_energy(v0, L, T)
    assert abs(tr.energy() - E) <= 1e-3 * E + 1e-12
    assert tr.at(t0 + T)[0] == pytest.approx(p, abs=1e-4)
    assert tr.terminal_speed == pytest.approx(v, abs=1e-4)
