"""Crossing queue, conflict classification and terminal-time assignment.

The terminal time of each vehicle follows the recursive rule

* queue predecessor on the same lane:  ``tm_pred + delta / vm_pred``
* predecessor on a crossing road:      ``tm_pred + S / vm_pred``
* same road, other lane or direction:  ``max(tm_pred, tm_k + delta / vm_k)``

where ``k`` is the nearest vehicle ahead on the same lane.  Every value
is floored at the earliest feasible arrival ``t_c``.  On top of the
recursion the forward pass also waits for the merging-zone exit of every
earlier vehicle on a crossing lane, which makes conflict intervals
disjoint even when the immediate predecessor is not itself in conflict.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .config import Relation
from .trajectory import CubicTrajectory, InfeasiblePlan

FLAG_NAMES = {
    kernels.RELAXED: "relaxed",
    kernels.FLOORED: "floored",
    kernels.VIOLATION: "violation",
    kernels.FAULT: "fault",
    kernels.CLAMPED: "clamped",
    kernels.KEPT: "kept",
}


def flag_names(flags):
    return [name for bit, name in FLAG_NAMES.items() if flags & bit]


def classify(lane_i, lane_j, geometry):
    """Relation of lane ``lane_j`` as seen from lane ``lane_i``."""
    M = geometry.n_lanes
    if not (0 <= lane_i < M and 0 <= lane_j < M):
        raise KeyError(f"unknown lane pair ({lane_i}, {lane_j}) for {M} lanes")
    return Relation(geometry.conflict_table[lane_i][lane_j])


def terminal_time(relation, pred, k, t_c, S, delta, head=None):
    """One step of the recursive rule, without the safety closure.

    ``pred`` and ``k`` need ``tm`` and ``vm`` attributes; ``k`` may be
    None, in which case its term is dropped.  ``relation`` is the relation
    between the predecessor's lane and this vehicle's lane.  For the first
    vehicle in the queue (``pred is None``) ``head`` is returned, floored
    at ``t_c``.
    """
    if pred is None:
        if head is None:
            raise ValueError("the first vehicle needs a policy-determined head time")
        return max(head, t_c)
    if relation == Relation.SAME_LANE:
        return max(pred.tm + delta / pred.vm, t_c)
    if relation == Relation.CONFLICT:
        return max(pred.tm + S / pred.vm, t_c)
    cand = pred.tm
    if k is not None:
        cand = max(cand, k.tm + delta / k.vm)
    return max(cand, t_c)


@dataclass
class QueueEntry:
    """One vehicle's live record.

    ``ts, ps, vs`` is the state at which the current plan segment starts;
    for a fresh arrival that is ``(t0, 0, v0)``.
    """

    id: int
    lane: int
    t0: float
    v0: float
    L: float
    tc: float
    ts: float = None
    ps: float = 0.0
    vs: float = None
    order: int = -1
    tm: float = math.nan
    vm: float = math.nan
    tf: float = math.nan
    target: float = math.nan
    traj: CubicTrajectory = None
    flags: int = 0
    same_lane_pred: int = None
    slot: float = -math.inf

    def __post_init__(self):
        if self.ts is None:
            self.ts = self.t0
        if self.vs is None:
            self.vs = self.v0

    @property
    def has_plan(self):
        return self.traj is not None

    def state_at(self, t):
        """(p, v) at ``t`` from the current plan, or the entry state."""
        if self.traj is None:
            return self.ps, self.vs
        p, v, _ = self.traj.at(t)
        return p, v


@dataclass(frozen=True)
class Schedule:
    entries: tuple
    replanned: tuple = ()  # ids whose plan was recomputed
    now: float = None

    @property
    def occupancy(self):
        """MZ occupancy interval ``(tm, tf)`` per entry, in queue order."""
        return [(e.tm, e.tf) for e in self.entries]

    @property
    def ids(self):
        return tuple(e.id for e in self.entries)

    def terminal_times(self):
        return np.array([e.tm for e in self.entries])

    def objective(self):
        if not self.entries:
            return 0.0
        return self.entries[-1].tm - self.entries[0].tm


def param_vector(scenario, policy=None):
    """Kernel parameter vector for a scenario and policy."""
    pol = scenario.policy if policy is None else policy
    lim = scenario.limits
    return np.array([
        scenario.geometry.mz_side, lim.delta, lim.v_min, lim.v_max, lim.u_min, lim.u_max,
        pol.rho, pol.sigma, 1.0 if pol.repair else 0.0,
        float(pol.terminal_mode), float(pol.head_mode),
    ], dtype=np.float64)


def relation_matrix(geometry):
    return np.ascontiguousarray(np.array(geometry.conflict_table, dtype=np.int32).reshape(
        geometry.n_lanes, geometry.n_lanes))


class PassBuffers:
    """Arrays handed to the forward-pass kernel, in sequence order."""

    def __init__(self, seq, now):
        n = len(seq)
        self.lane = np.empty(n, dtype=np.int32)
        self.has_plan = np.empty(n, dtype=np.int32)
        self.flags = np.empty(n, dtype=np.int32)
        self.L = np.empty(n)
        self.tc = np.empty(n)
        self.ts = np.empty(n)
        self.ps = np.empty(n)
        self.vs = np.empty(n)
        self.tm = np.empty(n)
        self.vm = np.empty(n)
        self.tf = np.empty(n)
        self.target = np.empty(n)
        self.slot = np.full(n, -1e300)
        self.ca = np.zeros(n)
        self.cb = np.zeros(n)
        for q, e in enumerate(seq):
            self.lane[q] = e.lane
            self.has_plan[q] = 1 if e.traj is not None else 0
            self.flags[q] = e.flags
            self.L[q] = e.L
            self.tc[q] = e.tc
            if now is None or e.traj is None:
                self.ts[q], self.ps[q], self.vs[q] = e.ts, e.ps, e.vs
            else:
                p, v, _ = e.traj.at(now)
                self.ts[q], self.ps[q], self.vs[q] = now, p, v
            self.tm[q] = e.tm
            self.vm[q] = e.vm
            self.tf[q] = e.tf
            self.target[q] = e.target

    def run(self, start, rel, prm):
        kernels.forward_pass(int(start), self.lane, self.L, self.tc, self.ts, self.ps, self.vs,
                             self.has_plan, self.tm, self.vm, self.tf, self.target, self.slot,
                             self.ca, self.cb, self.flags, rel, rel.shape[0], prm)


def terminal_vector(seq, rel, prm, start=0, now=None):
    """Terminal times of ``seq`` after a forward pass from ``start``."""
    buf = PassBuffers(seq, now)
    buf.run(start, rel, prm)
    return buf.tm


def schedule_sequence(seq, scenario, policy=None, start=0, now=None, strict=False):
    """Assign terminal times, plans and exit times to an ordered queue.

    Entries before ``start`` are read, not changed.  From ``start`` on,
    every entry whose target terminal time changed is replanned from its
    state at ``now`` (or from its stored plan start when ``now`` is None);
    the others keep their plan.  The vehicle at position 0 of a pass that
    starts at 0 gets the policy's head time.  With ``strict`` a faulty
    plan raises :class:`InfeasiblePlan` naming the vehicle.
    """
    seq = list(seq)
    rel = relation_matrix(scenario.geometry)
    prm = param_vector(scenario, policy)
    buf = PassBuffers(seq, now)
    buf.run(start, rel, prm)

    lanes_last = {}
    out = []
    replanned = []
    for q, e in enumerate(seq):
        pred_id = lanes_last.get(e.lane)
        lanes_last[e.lane] = e.id
        if q < start:
            out.append(dataclasses.replace(e, order=q, same_lane_pred=pred_id))
            continue
        fl = int(buf.flags[q])
        changes = dict(order=q, same_lane_pred=pred_id, tm=float(buf.tm[q]), vm=float(buf.vm[q]),
                       tf=float(buf.tf[q]), target=float(buf.target[q]), flags=fl,
                       slot=float(buf.slot[q]))
        if not fl & kernels.KEPT:
            ts, ps, vs = float(buf.ts[q]), float(buf.ps[q]), float(buf.vs[q])
            if strict and fl & kernels.FAULT:
                raise InfeasiblePlan(f"vehicle {e.id}: no valid plan to reach the merging zone at {buf.target[q]:.6f}")
            traj = CubicTrajectory.from_local(float(buf.ca[q]), float(buf.cb[q]), ts, ps, vs, float(buf.tm[q]))
            changes.update(ts=ts, ps=ps, vs=vs, traj=traj)
            replanned.append(e.id)
        out.append(dataclasses.replace(e, **changes))
    return Schedule(tuple(out), tuple(replanned), now)


@dataclass(frozen=True)
class SafetyViolation:
    kind: str  # "a" conflict overlap, "b" entry spacing, "c" interior gap
    ids: tuple
    time: float
    value: float
    detail: str = field(default="", compare=False)


def verify_schedule(sched, geometry, limits, dt=0.01, tol=1e-9):
    """Safety check of a schedule.

    (a) merging-zone intervals of crossing-lane pairs must be disjoint,
    (b) same-lane followers must enter at least ``delta / vm_k`` after
    the vehicle ahead, (c) the rear-end gap inside the control zone,
    sampled every ``dt``, must be at least ``delta``.  Category (c) is
    reported, not enforced by the scheduler.
    """
    found = []
    ents = list(sched.entries)
    T = geometry.conflict_table
    for i in range(len(ents)):
        a = ents[i]
        for j in range(i + 1, len(ents)):
            b = ents[j]
            if T[a.lane][b.lane] != Relation.CONFLICT:
                continue
            overlap = min(a.tf, b.tf) - max(a.tm, b.tm)
            if overlap > tol * max(1.0, abs(a.tf)):
                found.append(SafetyViolation("a", (a.id, b.id), max(a.tm, b.tm), overlap,
                                             f"vehicles {a.id} and {b.id} share the merging zone for {overlap:.6g} s"))
    # physical order on each lane is by entry time
    by_lane = {}
    for e in sorted(ents, key=lambda x: (x.t0, x.id)):
        by_lane.setdefault(e.lane, []).append(e)
    for lane_ents in by_lane.values():
        for k, i in zip(lane_ents[:-1], lane_ents[1:]):
            need = k.tm + limits.delta / max(k.vm, kernels.VM_GUARD)
            if i.tm < need - tol * max(1.0, abs(need)):
                found.append(SafetyViolation("b", (k.id, i.id), i.tm, need - i.tm,
                                             f"vehicle {i.id} enters {need - i.tm:.6g} s early behind {k.id}"))
            if k.traj is None or i.traj is None:
                continue
            lo = max(k.traj.t0, i.traj.t0)
            hi = min(k.tm, i.tm)
            if hi <= lo:
                continue
            n = int(math.floor((hi - lo) / dt)) + 1
            ts = lo + dt * np.arange(n)
            gap = _positions(k.traj, ts) - _positions(i.traj, ts)
            worst = int(np.argmin(gap))
            if gap[worst] < limits.delta - 1e-6:
                found.append(SafetyViolation("c", (k.id, i.id), float(ts[worst]), float(gap[worst]),
                                             f"gap {gap[worst]:.4g} m between {k.id} and {i.id}"))
    return found


def _positions(traj, t):
    return traj.at(t)[0]
