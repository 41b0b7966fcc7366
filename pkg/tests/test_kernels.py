import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cavseq import _pykernels as py
from cavseq import kernels
from cavseq.config import PolicySpec, Scenario
from cavseq.scheduler import param_vector, relation_matrix

cy = pytest.importorskip("cavseq._kernels", reason="compiled kernels not built")

speed = st.floats(0.5, 20)
dist = st.floats(1, 600)
horizon = st.floats(0.5, 200)
prms = st.integers(1, 10).map(lambda c: param_vector(Scenario(), PolicySpec.from_case(c)))


def same(x, y):
    """Bitwise equality, element by element, for scalars or tuples."""
    xs = x if isinstance(x, tuple) else (x,)
    ys = y if isinstance(y, tuple) else (y,)
    assert len(xs) == len(ys)
    for a, b in zip(xs, ys):
        assert np.array_equal(np.float64(a), np.float64(b), equal_nan=True), (xs, ys)


def test_selector_reports_compiled_kernel():
    if os.environ.get("CAVSEQ_PURE_PYTHON"):
        assert kernels.IMPLEMENTATION == "python"
    else:
        assert kernels.IMPLEMENTATION == "cython"
    assert py.IMPLEMENTATION == "python" and cy.IMPLEMENTATION == "cython"


@given(D=dist, v=speed, T=horizon, vt=speed, s=st.floats(0, 100))
def test_coefficient_kernels_agree(D, v, T, vt, s):
    same(cy.free_coeffs(D, v, T), py.free_coeffs(D, v, T))
    same(cy.fixed_coeffs(D, v, T, vt), py.fixed_coeffs(D, v, T, vt))
    same(cy.sigma_coeffs(D, v, T, s, 16.0), py.sigma_coeffs(D, v, T, s, 16.0))
    same(cy.reach_cap(D, v, 2.0), py.reach_cap(D, v, 2.0))
    a, b = py.fixed_coeffs(D, v, T, vt)
    same(cy.end_speed(a, b, v, T), py.end_speed(a, b, v, T))
    same(cy.extremes(a, b, v, T), py.extremes(a, b, v, T))


@given(D=dist, v=speed, rho=st.floats(1e-3, 100))
def test_free_time_root_agrees(D, v, rho):
    same(cy.free_time_root(D, v, rho), py.free_time_root(D, v, rho))


@given(ts=st.floats(0, 500), frac=st.floats(0, 0.9), vs=speed, L=dist, k=st.floats(0.2, 4), prm=prms)
def test_plan_agrees(ts, frac, vs, L, k, prm):
    ps = frac * L
    target = ts + k * (L - ps) / vs
    same(cy.plan(ts, ps, vs, L, target, prm), py.plan(ts, ps, vs, L, target, prm))
    same(cy.head_target(ts, ps, vs, L, ts + 0.8 * (L - ps) / vs, prm),
         py.head_target(ts, ps, vs, L, ts + 0.8 * (L - ps) / vs, prm))


@given(a=st.floats(-0.05, 0.05), b=st.floats(-3, 3), c=st.floats(0, 20), t0=st.floats(0, 100),
       span=st.floats(0, 60))
def test_fuel_integral_agrees(a, b, c, t0, span):
    w = (0.1569, 2.450e-2, -7.415e-4, 5.975e-5, 0.07224, 9.681e-2, 1.075e-3)
    same(cy.fuel_integral(a, b, c, t0, t0 + span, 0.01, *w), py.fuel_integral(a, b, c, t0, t0 + span, 0.01, *w))


def _buffers(rng, n):
    lane = rng.integers(0, 4, n).astype(np.int32)
    L = np.where(lane < 2, 400.0, 300.0)
    ts = np.sort(rng.uniform(0, 30, n))
    vs = rng.uniform(8, 12, n)
    tc = ts + L / 16.0 + 2.0
    return dict(lane=lane, L=L, tc=tc, ts=ts, ps=np.zeros(n), vs=vs, has_plan=np.zeros(n, np.int32),
                tm=np.zeros(n), vm=np.zeros(n), tf=np.zeros(n), target=np.zeros(n),
                slot=np.full(n, -1e300), ca=np.zeros(n), cb=np.zeros(n), flags=np.zeros(n, np.int32))


_ORDER = ("lane", "L", "tc", "ts", "ps", "vs", "has_plan", "tm", "vm", "tf", "target", "slot", "ca", "cb", "flags")


@given(seed=st.integers(0, 2 ** 32 - 1), n=st.integers(1, 25), case=st.integers(1, 10))
def test_forward_pass_agrees(seed, n, case):
    rel = relation_matrix(Scenario().geometry)
    prm = param_vector(Scenario(), PolicySpec.from_case(case))
    out = []
    for mod in (cy, py):
        buf = _buffers(np.random.default_rng(seed), n)
        mod.forward_pass(0, *(buf[k] for k in _ORDER), rel, 4, prm)
        out.append(buf)
    for k in _ORDER:
        assert np.array_equal(out[0][k], out[1][k]), k


@pytest.mark.slow
def test_pure_python_run_is_identical(tmp_path):
    """A full run under the fallback kernel writes byte-identical CSVs."""
    outs = []
    for flag in ("", "1"):
        d = tmp_path / f"out{flag or 'c'}"
        env = dict(os.environ, CAVSEQ_PURE_PYTHON=flag)
        subprocess.run([sys.executable, "-m", "cavseq", "run", "baseline", "--case", "5", "--vehicles", "40",
                        "--seed", "3", "-o", str(d)], check=True, env=env, capture_output=True)
        outs.append({p.name: p.read_bytes() for p in sorted(d.iterdir())})
    assert outs[0].keys() == outs[1].keys() and outs[0]
    for name in outs[0]:
        assert outs[0][name] == outs[1][name], name
