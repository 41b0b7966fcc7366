"""Compare the compiled and pure-Python kernels.

Run from the repository root::

    python3 benchmarks/bench_kernels.py [--repeat 5] [--vehicles 100]

Each micro-benchmark calls both implementations on the same inputs and
reports the best wall time per call.  The last block runs a whole
simulation once under each kernel in a fresh interpreter, because the
kernel is chosen when ``cavseq.kernels`` is first imported.
"""

import argparse
import os
import subprocess
import sys
import time
import timeit

import numpy as np

from cavseq import _pykernels as py
from cavseq.config import PolicySpec, Scenario
from cavseq.scheduler import param_vector, relation_matrix

try:
    from cavseq import _kernels as cy
except ImportError:
    cy = None

ORDER = ("lane", "L", "tc", "ts", "ps", "vs", "has_plan", "tm", "vm", "tf", "target", "slot", "ca", "cb", "flags")
FUEL_W = (0.1569, 2.450e-2, -7.415e-4, 5.975e-5, 0.07224, 9.681e-2, 1.075e-3)


def buffers(n, seed=0):
    rng = np.random.default_rng(seed)
    lane = rng.integers(0, 4, n).astype(np.int32)
    L = np.where(lane < 2, 400.0, 300.0)
    ts = np.sort(rng.uniform(0, 30, n))
    return dict(lane=lane, L=L, tc=ts + L / 16.0 + 2.0, ts=ts, ps=np.zeros(n), vs=rng.uniform(8, 12, n),
                has_plan=np.zeros(n, np.int32), tm=np.zeros(n), vm=np.zeros(n), tf=np.zeros(n),
                target=np.zeros(n), slot=np.full(n, -1e300), ca=np.zeros(n), cb=np.zeros(n),
                flags=np.zeros(n, np.int32))


def cases():
    sc = Scenario()
    rel = relation_matrix(sc.geometry)
    prm = param_vector(sc, PolicySpec.from_case(5))
    prm_rho = param_vector(sc, PolicySpec.from_case(2))

    def fwd(mod, n):
        def go():
            buf = buffers(n)
            mod.forward_pass(0, *(buf[k] for k in ORDER), rel, 4, prm)
        return go

    return [
        ("free_coeffs", lambda m: (lambda: m.free_coeffs(300.0, 10.0, 31.0))),
        ("plan", lambda m: (lambda: m.plan(3.0, 20.0, 11.0, 400.0, 42.0, prm))),
        ("free_time_root", lambda m: (lambda: m.free_time_root(400.0, 10.0, 0.05))),
        ("head_target (rho)", lambda m: (lambda: m.head_target(0.0, 0.0, 10.0, 400.0, 25.25, prm_rho))),
        ("fuel_integral 40 s", lambda m: (lambda: m.fuel_integral(-2e-3, 0.1, 10.0, 0.0, 40.0, 0.01, *FUEL_W))),
        ("forward_pass n=10", lambda m: fwd(m, 10)),
        ("forward_pass n=40", lambda m: fwd(m, 40)),
    ]


def best_time(fn, repeat):
    number = 1
    # grow the batch until one batch takes at least 20 ms
    while timeit.timeit(fn, number=number) < 0.02:
        number *= 2
    return min(timeit.repeat(fn, number=number, repeat=repeat)) / number


def full_run(pure, vehicles):
    env = dict(os.environ, CAVSEQ_PURE_PYTHON="1" if pure else "")
    code = ("import time; from cavseq.config import Scenario, PolicySpec, ArrivalModel; "
            "from cavseq.engine import run; "
            f"sc = Scenario().replace(arrivals=ArrivalModel(vehicles={vehicles}, seed=0)); "
            "t = time.perf_counter(); run(sc, PolicySpec.from_case(5)); print(time.perf_counter() - t)")
    out = subprocess.run([sys.executable, "-c", code], env=env, check=True, capture_output=True, text=True)
    return float(out.stdout.strip())


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--vehicles", type=int, default=100)
    ap.add_argument("--skip-run", action="store_true", help="only the micro-benchmarks")
    args = ap.parse_args(argv)

    if cy is None:
        print("compiled kernels not built; only the Python timings are shown")
    print(f"{'kernel':22s} {'python':>12s} {'cython':>12s} {'speedup':>8s}")
    for name, make in cases():
        tp = best_time(make(py), args.repeat)
        if cy is None:
            print(f"{name:22s} {tp * 1e6:10.2f}us")
            continue
        tc = best_time(make(cy), args.repeat)
        print(f"{name:22s} {tp * 1e6:10.2f}us {tc * 1e6:10.2f}us {tp / tc:7.1f}x")

    if not args.skip_run:
        t0 = time.perf_counter()
        tp = full_run(True, args.vehicles)
        tc = full_run(False, args.vehicles) if cy is not None else float("nan")
        print(f"\nfull run, case 5, {args.vehicles} vehicles: python {tp:.2f} s, cython {tc:.2f} s, "
              f"speedup {tp / tc:.1f}x ({time.perf_counter() - t0:.1f} s total)")


if __name__ == "__main__":
    main()
