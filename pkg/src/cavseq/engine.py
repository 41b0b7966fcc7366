"""Discrete-event simulation of vehicles crossing one intersection.

Events are arrivals at the control-zone entry, merging-zone entries and
merging-zone exits.  Each arrival triggers an insertion search (when
resequencing is on), a forward pass over the affected part of the queue
and a replan, from the current state, of every vehicle whose target
terminal time changed.  All motion is closed form, so the loop only
advances between event times.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .config import PolicySpec
from .resequencer import (ComplexityStats, best_sequence, expected_swaps, feasible_sequences, insert_at,
                          worst_case_swaps)
from .scheduler import QueueEntry, Schedule, schedule_sequence, verify_schedule
from .trajectory import InitialCondition, earliest_arrival, fuel_total

ARRIVAL = "arrival"
MZ_ENTRY = "mz_entry"
MZ_EXIT = "mz_exit"
_RANK = {MZ_EXIT: 0, MZ_ENTRY: 1, ARRIVAL: 2}


@dataclass(frozen=True)
class SimEvent:
    time: float
    kind: str
    vehicle: int = -1
    lane: int = -1
    v0: float = math.nan


@dataclass
class VehicleRecord:
    id: int
    lane: int
    t0: float
    v0: float
    L: float
    tc: float
    arrival: float  # nominal arrival before any deferral
    tm: float = math.nan
    vm: float = math.nan
    tf: float = math.nan
    fuel: float = 0.0
    flags: int = 0
    swaps: int = 1
    resequence_events: list = field(default_factory=list)  # (time, old order, new order)
    history: list = field(default_factory=list)  # CubicTrajectory per plan segment
    orders: list = field(default_factory=list)  # (time, queue position)

    @property
    def travel_time(self):
        return self.tm - self.t0

    @property
    def exit_travel_time(self):
        return self.tf - self.t0

    @property
    def trajectory(self):
        return self.history[-1] if self.history else None

    def segment_at(self, t):
        """Plan segment valid at ``t`` (the last one whose start is <= t)."""
        seg = self.history[0]
        for h in self.history[1:]:
            if h.t0 <= t:
                seg = h
            else:
                break
        return seg

    def state_at(self, t):
        """(p, v, u) at ``t``; constant speed inside the merging zone."""
        if t >= self.tm:
            return self.L + self.vm * (t - self.tm), self.vm, 0.0
        return self.segment_at(t).at(t)

    def order_at(self, t):
        out = -1
        for ts, o in self.orders:
            if ts <= t:
                out = o
            else:
                break
        return out


@dataclass(frozen=True)
class Metrics:
    vehicles: int
    mean_travel_time: float
    p50_travel_time: float
    p90_travel_time: float
    p95_travel_time: float
    mean_exit_travel_time: float
    makespan: float
    total_fuel: float
    mean_fuel: float
    mean_swaps: float
    max_swaps: int
    violations: int
    faults: int
    relaxed: int
    floored: int
    clamped: int
    deferrals: int
    conflict_overlaps: int
    spacing_violations: int
    interior_gap_violations: int
    max_continuity_error: float

    def as_dict(self):
        return {f: getattr(self, f) for f in self.__dataclass_fields__}


@dataclass
class SimResult:
    scenario: object
    policy: PolicySpec
    records: list
    events: list
    stats: ComplexityStats
    deferrals: list  # (lane, nominal time, admitted time)
    safety: list
    continuity_errors: list
    metrics: Metrics = None

    def record(self, vid):
        return self.records[vid]


def generate_arrivals(arrivals, n_lanes):
    """Merged per-lane Poisson streams as (time, tie, lane, v0) tuples.

    Draws happen lane by lane in a fixed order, so the stream depends
    only on the seed.  Equal arrival times are ordered by the tie draw.
    """
    rng = np.random.default_rng(arrivals.seed)
    lo, hi = arrivals.speed_range
    N = arrivals.vehicles
    T_end = arrivals.end_time
    out = []
    chunk = N if N is not None else 64
    for r in range(n_lanes):
        lam = arrivals.rates[r]
        t = 0.0
        count = 0
        while True:
            gaps = rng.exponential(1.0 / lam, size=chunk)
            speeds = rng.uniform(lo, hi, size=chunk)
            ties = rng.random(size=chunk)
            done = False
            for g, v, u in zip(gaps, speeds, ties):
                t += float(g)
                if T_end is not None and t > T_end:
                    done = True
                    break
                out.append((t, float(u), r, float(v)))
                count += 1
                if N is not None and count >= N:
                    done = True
                    break
            if done:
                break
    out.sort()
    if N is not None:
        out = out[:N]
    return out


def _entry_time(traj, target_p, lo, hi):
    # earliest t in [lo, hi] with traj position >= target_p (position is monotone)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if traj.at(mid)[0] >= target_p:
            hi = mid
        else:
            lo = mid
        if hi - lo <= 1e-12 * max(1.0, hi):
            break
    return hi


class _Sim:
    def __init__(self, scenario, policy):
        self.sc = scenario
        self.pol = policy
        self.g = scenario.geometry
        self.lim = scenario.limits
        self.heap = []
        self.counter = 0
        self.queue = []
        self.records = []
        self.events = []
        self.deferrals = []
        self.continuity = []
        self.version = {}
        self.lane_last = {}
        self.crossing = []  # every admitted id in crossing order
        self.stats = ComplexityStats(
            worst_case=worst_case_swaps(self.g, self.lim.vehicle_length, self.lim.delta),
            expected=expected_swaps(scenario.arrivals.rates)[0],
        )

    def push(self, time, kind, tie, payload):
        self.counter += 1
        heapq.heappush(self.heap, (time, _RANK[kind], tie, self.counter, kind, payload))

    def run(self):
        stream = generate_arrivals(self.sc.arrivals, self.g.n_lanes)
        per_lane = [[] for _ in range(self.g.n_lanes)]
        for t, u, r, v in stream:
            per_lane[r].append((t, u, v))
        self.pending = [list(reversed(x)) for x in per_lane]
        for r in range(self.g.n_lanes):
            self._push_next_arrival(r, 0.0)
        while self.heap:
            time, _, tie, _, kind, payload = heapq.heappop(self.heap)
            if kind == ARRIVAL:
                self._arrival(time, tie, payload)
            else:
                vid, ver = payload
                if self.version.get(vid) != ver:
                    continue
                if kind == MZ_ENTRY:
                    self.events.append(SimEvent(time, MZ_ENTRY, vid, self.records[vid].lane))
                else:
                    self._exit(time, vid)

    def _push_next_arrival(self, lane, not_before):
        if self.pending[lane]:
            t, u, v = self.pending[lane].pop()
            self.push(max(t, not_before), ARRIVAL, u, (lane, v, t))

    def _arrival(self, t, tie, payload):
        lane, v0, nominal = payload
        L = self.g.segment_lengths[lane]
        k = self.lane_last.get(lane)
        if k is not None:
            rk = self.records[k]
            if t < rk.tm:
                p_k = rk.state_at(t)[0]
                if p_k < self.lim.delta:
                    seg = rk.segment_at(t)
                    t_ok = _entry_time(seg, self.lim.delta, t, rk.tm)
                    self.deferrals.append((lane, nominal, t_ok))
                    self.push(t_ok, ARRIVAL, tie, payload)
                    return
        vid = len(self.records)
        ic = InitialCondition(t, v0, L)
        tc = earliest_arrival(ic, self.lim)
        rec = VehicleRecord(vid, lane, t, v0, L, tc, nominal)
        self.records.append(rec)
        self.lane_last[lane] = vid
        self.events.append(SimEvent(t, ARRIVAL, vid, lane, v0))
        newcomer = QueueEntry(vid, lane, t, v0, L, tc, same_lane_pred=k)

        queue = self.queue
        old_order = {e.id: q for q, e in enumerate(queue)}
        if self.pol.resequencing:
            fs = feasible_sequences(queue, newcomer, self.sc, self.pol, now=t, ahead=self._ahead())
            best = best_sequence(fs)
            j = best.position
            swaps = fs.evaluations
        else:
            j = len(queue)
            swaps = 1
        rec.swaps = swaps
        self.stats.record(swaps)
        if j < len(queue):
            self.crossing.insert(self.crossing.index(queue[j].id), vid)
        else:
            self.crossing.append(vid)
        sched = schedule_sequence(insert_at(queue, newcomer, j), self.sc, self.pol, start=j, now=t)
        replanned = set(sched.replanned)
        for q, e in enumerate(sched.entries):
            r = self.records[e.id]
            if e.id == vid:
                r.history.append(e.traj)
                r.orders.append((t, q))
                self._set_plan(r, e)
                continue
            if q != old_order[e.id]:
                r.orders.append((t, q))
                if q >= j and e.id != vid:
                    r.resequence_events.append((t, old_order[e.id], q))
            if e.id in replanned:
                old = r.history[-1]
                p_old, v_old, _ = old.at(t)
                p_new, v_new, _ = e.traj.at(t)
                self.continuity.append(max(abs(p_old - p_new), abs(v_old - v_new)))
                r.history.append(e.traj)
                self._set_plan(r, e)
        self.queue = list(sched.entries)
        self._push_next_arrival(lane, t)

    def _ahead(self):
        # retired vehicle immediately ahead of the active queue
        if not self.queue:
            return self.crossing[-1] if self.crossing else None
        idx = self.crossing.index(self.queue[0].id)
        return self.crossing[idx - 1] if idx > 0 else None

    def _set_plan(self, r, e):
        r.tm, r.vm, r.tf = e.tm, e.vm, e.tf
        r.flags |= e.flags & ~kernels.KEPT
        ver = self.version.get(r.id, 0) + 1
        self.version[r.id] = ver
        self.push(e.tm, MZ_ENTRY, 0.0, (r.id, ver))
        self.push(e.tf, MZ_EXIT, 0.0, (r.id, ver))

    def _exit(self, t, vid):
        self.events.append(SimEvent(t, MZ_EXIT, vid, self.records[vid].lane))
        idx = next(q for q, e in enumerate(self.queue) if e.id == vid)
        self.queue.pop(idx)
        self.records[vid].orders.append((t, -1))
        for q in range(idx, len(self.queue)):
            self.records[self.queue[q].id].orders.append((t, q))


def _final_schedule(records):
    ents = []
    for r in sorted(records, key=lambda x: (x.tm, x.id)):
        traj = r.trajectory
        ents.append(QueueEntry(r.id, r.lane, r.t0, r.v0, r.L, r.tc, ts=traj.t0, tm=r.tm, vm=r.vm, tf=r.tf,
                               traj=traj, flags=r.flags))
    return Schedule(tuple(ents))


def _vehicle_fuel(r, coeffs, dt):
    total = 0.0
    for i, seg in enumerate(r.history):
        end = r.history[i + 1].t0 if i + 1 < len(r.history) else r.tm
        total += fuel_total(seg, coeffs, dt, t_start=seg.t0, t_end=end)
    return total


def compute_metrics(result):
    recs = result.records
    tt = np.array([r.travel_time for r in recs])
    tx = np.array([r.exit_travel_time for r in recs])
    fuel = np.array([r.fuel for r in recs])
    counts = result.stats.counts
    kinds = [v.kind for v in result.safety]

    def n_flag(bit):
        return sum(1 for r in recs if r.flags & bit)

    return Metrics(
        vehicles=len(recs),
        mean_travel_time=float(tt.mean()),
        p50_travel_time=float(np.percentile(tt, 50)),
        p90_travel_time=float(np.percentile(tt, 90)),
        p95_travel_time=float(np.percentile(tt, 95)),
        mean_exit_travel_time=float(tx.mean()),
        makespan=float(max(r.tm for r in recs)),
        total_fuel=float(math.fsum(fuel)),
        mean_fuel=float(fuel.mean()),
        mean_swaps=float(np.mean(counts)),
        max_swaps=int(max(counts)),
        violations=n_flag(kernels.VIOLATION),
        faults=n_flag(kernels.FAULT),
        relaxed=n_flag(kernels.RELAXED),
        floored=n_flag(kernels.FLOORED),
        clamped=n_flag(kernels.CLAMPED),
        deferrals=len(result.deferrals),
        conflict_overlaps=kinds.count("a"),
        spacing_violations=kinds.count("b"),
        interior_gap_violations=kinds.count("c"),
        max_continuity_error=float(max(result.continuity_errors, default=0.0)),
    )


def run(scenario, policy=None):
    """Simulate ``scenario`` under ``policy`` (default: the scenario's own)."""
    pol = scenario.policy if policy is None else policy
    sim = _Sim(scenario, pol)
    sim.run()
    out = scenario.output
    for r in sim.records:
        r.fuel = _vehicle_fuel(r, out.fuel, out.fuel_dt)
    safety = verify_schedule(_final_schedule(sim.records), scenario.geometry, scenario.limits)
    res = SimResult(scenario, pol, sim.records, sim.events, sim.stats, sim.deferrals, safety, sim.continuity)
    res.metrics = compute_metrics(res)
    return res


@dataclass(frozen=True)
class Comparison:
    policies: tuple
    metrics: tuple  # one Metrics per policy
    deltas: dict  # (i, j) -> {metric: value_j - value_i}


_DELTA_FIELDS = ("mean_travel_time", "mean_exit_travel_time", "makespan", "total_fuel", "mean_fuel", "mean_swaps")


def compare(scenario, policies):
    """Run every policy on the same arrival stream and diff the metrics."""
    policies = tuple(policies)
    if len(policies) < 2:
        raise ValueError("compare needs at least two policies")
    metrics = tuple(run(scenario, p).metrics for p in policies)
    deltas = {}
    for i in range(len(policies)):
        for j in range(i + 1, len(policies)):
            deltas[(i, j)] = {f: getattr(metrics[j], f) - getattr(metrics[i], f) for f in _DELTA_FIELDS}
    return Comparison(policies, metrics, deltas)


@dataclass(frozen=True)
class VehicleState:
    id: int
    lane: int
    position: float
    speed: float
    control: float
    order: int


def snapshot(result, t):
    """State of every vehicle inside the control or merging zone at ``t``."""
    out = []
    for r in result.records:
        if r.t0 <= t <= r.tf:
            p, v, u = r.state_at(t)
            out.append(VehicleState(r.id, r.lane, p, v, u, r.order_at(t)))
    return out
