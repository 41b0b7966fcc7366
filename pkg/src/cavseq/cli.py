"""Command-line front end.

``cavseq run``         one simulation, writes metrics.json, vehicles.csv, trace.csv
``cavseq compare``     cases x arrival rates x replications, writes compare.csv
                       and compare_detail.csv
``cavseq complexity``  swap counts per arrival rate, writes complexity.csv

All numbers are written with 9 significant digits.  Output files are
staged in a temporary directory and moved into place only after every
run has finished, so a failure leaves no partial output behind.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import os
import shutil
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from importlib import resources

import numpy as np

from . import __version__
from .config import PolicySpec, ScenarioError, load_scenario, scenario_dict, validate
from .engine import run
from .resequencer import expected_swaps, worst_case_swaps
from .scheduler import flag_names

TRACE_COLUMNS = ("time", "vehicle", "lane", "position", "speed", "control", "order")
VEHICLE_COLUMNS = ("id", "lane", "arrival", "t0", "v0", "tc", "tm", "vm", "tf", "travel_time",
                   "exit_travel_time", "fuel", "swaps", "replans", "resequences", "flags")
DETAIL_COLUMNS = ("rate", "case", "replication", "seed", "mean_travel_time", "mean_exit_travel_time",
                  "makespan", "total_fuel", "mean_fuel", "mean_swaps", "violations", "faults", "deferrals")
COMPLEXITY_COLUMNS = ("rate", "empirical_mean", "analytic", "worst_case", "max_observed", "replications")


def fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.9g}"
    return str(x)


def csv_text(columns, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([fmt(x) for x in row])
    return buf.getvalue()


class CliError(Exception):
    pass


# ---------------------------------------------------------------- scenarios

def baseline_text():
    return resources.files("cavseq").joinpath("scenarios/baseline.yaml").read_text(encoding="utf-8")


def read_scenario(path):
    if path == "baseline":
        return load_scenario(baseline_text())
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise CliError(f"cannot read scenario {path!r}: {exc.strerror}") from None
    return load_scenario(text)


def apply_overrides(s, args):
    """Flags replace scenario fields one for one."""
    arr = s.arrivals
    akw = {}
    if getattr(args, "seed", None) is not None:
        akw["seed"] = args.seed
    if getattr(args, "vehicles", None) is not None:
        akw["vehicles"] = args.vehicles
    rates = getattr(args, "rates", None)
    if rates is not None:
        if len(rates) == 1:
            rates = rates * len(arr.rates)
        if len(rates) != len(arr.rates):
            raise CliError(f"--rates needs 1 or {len(arr.rates)} values, got {len(rates)}")
        akw["rates"] = tuple(rates)
    if akw:
        s = s.replace(arrivals=dataclasses.replace(arr, **akw))
    lkw = {}
    if getattr(args, "delta", None) is not None:
        lkw["delta"] = args.delta
    if lkw:
        s = s.replace(limits=dataclasses.replace(s.limits, **lkw))
    if getattr(args, "trace_step", None) is not None:
        s = s.replace(output=dataclasses.replace(s.output, trace_step=args.trace_step))
    pol = s.policy
    if getattr(args, "case", None) is not None:
        pol = PolicySpec.from_case(args.case, rho=pol.rho, tie_break=pol.tie_break, repair=pol.repair)
    pkw = {}
    for name in ("resequencing", "formulation", "rho", "sigma", "repair"):
        v = getattr(args, name, None)
        if v is not None:
            pkw[name] = v
    if pkw:
        pol = dataclasses.replace(pol, **pkw)
    s = s.replace(policy=pol)
    bad = [v for v in validate(s) if v.severity == "error"]
    if bad:
        raise ScenarioError("invalid scenario after overrides:\n" + "\n".join(f"  {v}" for v in bad), bad)
    return s


def warn(s):
    for v in validate(s):
        if v.severity == "warning":
            print(f"warning: {v.field}: {v.message}", file=sys.stderr)


# ------------------------------------------------------------------ outputs

def trace_rows(result):
    recs = result.records
    step = result.scenario.output.trace_step
    t_end = max(r.tf for r in recs)
    n = int(np.floor(t_end / step + 1e-9)) + 1
    lanes = result.scenario.geometry.lanes
    rows = []
    for i in range(n):
        t = i * step
        for r in recs:
            if r.t0 <= t <= r.tf:
                p, v, u = r.state_at(t)
                rows.append((t, r.id, lanes[r.lane].name, p, v, u, r.order_at(t)))
    return rows


def vehicle_rows(result):
    lanes = result.scenario.geometry.lanes
    return [
        (r.id, lanes[r.lane].name, r.arrival, r.t0, r.v0, r.tc, r.tm, r.vm, r.tf, r.travel_time,
         r.exit_travel_time, r.fuel, r.swaps, len(r.history) - 1, len(r.resequence_events),
         "|".join(flag_names(r.flags)))
        for r in result.records
    ]


def metrics_doc(result):
    def clean(x):
        if isinstance(x, float):
            return float(f"{x:.9g}")
        return x

    s = result.scenario
    pol = result.policy
    return {
        "version": __version__,
        "case": pol.case_number(),
        "policy": {k: clean(v) for k, v in dataclasses.asdict(pol).items()},
        "seed": s.arrivals.seed,
        "vehicles": len(result.records),
        "scenario": scenario_dict(s),
        "metrics": {k: clean(v) for k, v in result.metrics.as_dict().items()},
        "complexity": {
            "worst_case": clean(result.stats.worst_case),
            "expected": clean(result.stats.expected),
            "within_bound": result.stats.within_bound,
        },
    }


def commit(files, out_dir):
    """Write all files to a staging directory, then move them into place."""
    os.makedirs(out_dir, exist_ok=True)
    stage = tempfile.mkdtemp(prefix=".cavseq-", dir=out_dir)
    try:
        for name, text in files.items():
            with open(os.path.join(stage, name), "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        for name in files:
            os.replace(os.path.join(stage, name), os.path.join(out_dir, name))
    finally:
        shutil.rmtree(stage, ignore_errors=True)


# ----------------------------------------------------------------- commands

def cmd_run(args):
    s = apply_overrides(read_scenario(args.scenario), args)
    warn(s)
    res = run(s)
    files = {
        "metrics.json": json.dumps(metrics_doc(res), indent=2, sort_keys=True) + "\n",
        "vehicles.csv": csv_text(VEHICLE_COLUMNS, vehicle_rows(res)),
        "trace.csv": csv_text(TRACE_COLUMNS, trace_rows(res)),
    }
    commit(files, args.out)
    m = res.metrics
    case = res.policy.case_number()
    label = f"case {case}" if case else "custom policy"
    print(f"{label}: {m.vehicles} vehicles, mean travel {m.mean_travel_time:.3f} s, "
          f"makespan {m.makespan:.3f} s, fuel {m.total_fuel:.4f} L, mean swaps {m.mean_swaps:.3f}, "
          f"violations {m.violations}, faults {m.faults}")
    return 0


def _one(job):
    s, policy = job
    return run(s, policy).metrics


def _map(jobs, n_jobs):
    if n_jobs and n_jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as ex:
            return list(ex.map(_one, jobs))
    return [_one(j) for j in jobs]


def _replicas(s, rate, reps):
    base_seed = s.arrivals.seed
    n = len(s.arrivals.rates)
    out = []
    for r in range(reps):
        arr = dataclasses.replace(s.arrivals, rates=(rate,) * n, seed=base_seed + r)
        out.append((r, base_seed + r, s.replace(arrivals=arr)))
    return out


def cmd_compare(args):
    s = apply_overrides(read_scenario(args.scenario), args)
    if len(args.cases) < 2:
        raise CliError("compare needs at least two cases")
    rates = args.sweep if args.sweep else [s.arrivals.rates[0]]
    jobs, keys = [], []
    for rate in rates:
        for case in args.cases:
            pol = PolicySpec.from_case(case, rho=s.policy.rho, repair=s.policy.repair)
            for r, seed, sr in _replicas(s, rate, args.replications):
                keys.append((rate, case, r, seed))
                jobs.append((sr, pol))
    results = _map(jobs, args.jobs)

    detail = []
    cells = {}
    for (rate, case, r, seed), m in zip(keys, results):
        detail.append((rate, case, r, seed, m.mean_travel_time, m.mean_exit_travel_time, m.makespan,
                       m.total_fuel, m.mean_fuel, m.mean_swaps, m.violations, m.faults, m.deferrals))
        cells.setdefault((rate, case), []).append(m)
    header = ["rate"]
    for case in args.cases:
        header += [f"case{case}_time", f"case{case}_fuel"]
    table = []
    for rate in rates:
        row = [rate]
        for case in args.cases:
            ms = cells[(rate, case)]
            row += [float(np.mean([m.mean_travel_time for m in ms])), float(np.mean([m.total_fuel for m in ms]))]
        table.append(row)
    commit({"compare.csv": csv_text(header, table), "compare_detail.csv": csv_text(DETAIL_COLUMNS, detail)},
           args.out)
    print(csv_text(header, table), end="")
    return 0


def cmd_complexity(args):
    s = apply_overrides(read_scenario(args.scenario), args)
    rates = args.sweep if args.sweep else [s.arrivals.rates[0]]
    pol = PolicySpec.from_case(args.case, rho=s.policy.rho, repair=s.policy.repair)
    bound = worst_case_swaps(s.geometry, s.limits.vehicle_length, s.limits.delta)
    jobs, keys = [], []
    for rate in rates:
        for r, seed, sr in _replicas(s, rate, args.replications):
            keys.append(rate)
            jobs.append((sr, pol))
    results = _map(jobs, args.jobs)
    per = {}
    for rate, m in zip(keys, results):
        per.setdefault(rate, []).append(m)
    rows = []
    M = len(s.arrivals.rates)
    for rate in rates:
        ms = per[rate]
        analytic, _ = expected_swaps((rate,) * M)
        rows.append((rate, float(np.mean([m.mean_swaps for m in ms])), analytic, bound,
                     max(m.max_swaps for m in ms), len(ms)))
    text = csv_text(COMPLEXITY_COLUMNS, rows)
    commit({"complexity.csv": text}, args.out)
    print(text, end="")
    return 0


# ------------------------------------------------------------------- parser

def _add_common(p):
    p.add_argument("scenario", help="scenario YAML file, or 'baseline' for the bundled one")
    p.add_argument("--out", "-o", default=".", help="output directory (default: current)")
    p.add_argument("--seed", type=int)
    p.add_argument("--vehicles", type=int)
    p.add_argument("--rates", type=float, nargs="+", help="arrival rate per lane (one value applies to all)")
    p.add_argument("--delta", type=float, help="safety following distance, m")
    p.add_argument("--rho", type=float)
    p.add_argument("--sigma", type=float)
    p.add_argument("--repair", action=argparse.BooleanOptionalAction, default=None)


def build_parser():
    ap = argparse.ArgumentParser(prog="cavseq", description="Signal-free intersection coordination simulator.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="simulate one scenario")
    _add_common(p)
    p.add_argument("--case", type=int, choices=range(1, 11))
    p.add_argument("--resequencing", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--formulation", choices=("cruise", "rho", "force_tc", "sigma", "force_vmax"))
    p.add_argument("--trace-step", type=float, dest="trace_step")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("compare", help="compare cases over arrival rates and replications")
    _add_common(p)
    p.add_argument("--cases", type=int, nargs="+", required=True)
    p.add_argument("--sweep", type=float, nargs="+", help="equal per-lane rates to sweep")
    p.add_argument("--replications", "-r", type=int, default=1)
    p.add_argument("--jobs", "-j", type=int, default=1)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("complexity", help="empirical swap counts against the analytic values")
    _add_common(p)
    p.add_argument("--case", type=int, choices=range(1, 11), default=5)
    p.add_argument("--sweep", type=float, nargs="+", help="equal per-lane rates to sweep")
    p.add_argument("--replications", "-r", type=int, default=10)
    p.add_argument("--jobs", "-j", type=int, default=1)
    p.set_defaults(func=cmd_complexity)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if getattr(args, "replications", 1) < 1:
            raise CliError("replications must be at least 1")
        return args.func(args)
    except (ScenarioError, CliError, OSError, ValueError) as exc:
        print(f"cavseq: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
