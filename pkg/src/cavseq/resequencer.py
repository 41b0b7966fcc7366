"""Newcomer insertion search and swap-count analytics.

On every arrival the newcomer is appended to the queue and then moved
one slot forward at a time.  A slot is admissible only while the vehicle
currently holding it is scheduled no earlier than the newcomer's
earliest feasible arrival.  Because terminal times are nondecreasing
along the queue, the first inadmissible slot ends the search.  The
newcomer never moves ahead of the vehicle in front of it on its own lane.
Vehicles already inside or past the merging zone have terminal times
before the newcomer's earliest arrival, so they stop the search through
the same test.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .scheduler import param_vector, relation_matrix, terminal_vector

TIE_TOL = 1e-9


@dataclass(frozen=True)
class SequenceCandidate:
    order: tuple
    terminal_times: tuple
    objective: float
    swap_count: int
    position: int  # newcomer slot in the new order

    @property
    def displacement(self):
        return len(self.order) - 1 - self.position


@dataclass(frozen=True)
class FeasibleSet:
    """Admissible insertions of one newcomer, identity first."""

    candidates: tuple
    evaluations: int  # includes the rejected slot that ended the search
    lower: int

    def __iter__(self):
        return iter(self.candidates)

    def __len__(self):
        return len(self.candidates)

    @property
    def identity(self):
        return self.candidates[0]


def insertion_bounds(queue, newcomer):
    """(lowest slot the search may reach, queue length) for the newcomer."""
    n = len(queue)
    for q in range(n - 1, -1, -1):
        if queue[q].lane == newcomer.lane:
            return q + 1, n
    return 0, n


def insert_at(queue, newcomer, j):
    return list(queue[:j]) + [newcomer] + list(queue[j:])


def feasible_sequences(queue, newcomer, scenario, policy=None, now=None, ahead=None):
    """Enumerate slots from the back of the queue toward the front.

    ``queue`` holds the active vehicles, already scheduled.  ``ahead`` is
    the id of the retired vehicle just in front of ``queue[0]`` in the
    crossing order, if any.  When the search runs through the whole
    active queue, that vehicle is the next slot; it is tested (and
    counted) unless it is the newcomer's same-lane predecessor, and it
    always fails because it has already crossed.  Each admissible slot
    ``j`` is evaluated by a forward pass from ``j``.
    """
    rel = relation_matrix(scenario.geometry)
    prm = param_vector(scenario, policy)
    lo, n = insertion_bounds(queue, newcomer)
    found = []
    evaluations = 0
    stopped = False
    for j in range(n, lo - 1, -1):
        evaluations += 1
        if j < n and queue[j].tm < newcomer.tc:
            stopped = True
            break
        seq = insert_at(queue, newcomer, j)
        tm = terminal_vector(seq, rel, prm, start=j, now=now)
        found.append(SequenceCandidate(
            order=tuple(e.id for e in seq),
            terminal_times=tuple(float(x) for x in tm),
            objective=float(tm[-1] - tm[0]),
            swap_count=evaluations,
            position=j,
        ))
    if not stopped and lo == 0 and ahead is not None and ahead != newcomer.same_lane_pred:
        evaluations += 1
    return FeasibleSet(tuple(found), evaluations, lo)


def best_sequence(cands):
    """Smallest makespan gap; near-ties go to the least displaced candidate."""
    cands = list(cands)
    if not cands:
        raise ValueError("no candidate sequences")
    ordered = sorted(cands, key=lambda c: (c.displacement, c.position))
    best = ordered[0]
    for c in ordered[1:]:
        if c.objective < best.objective - TIE_TOL:
            best = c
    return best


def worst_case_swaps(geometry, vehicle_length, delta):
    """Upper bound on slots examined for one arrival.

    Each other segment can hold at most ``L_r / (l_v + delta)`` vehicles
    that the newcomer might pass.
    """
    L = geometry.segment_lengths
    unit = vehicle_length + delta
    total = math.fsum(L)
    return max((total - Lp) / unit for Lp in L) + 1.0


def expected_swaps(rates):
    """Mean slots examined under independent Poisson arrivals.

    Returns ``(E[N], per_segment)`` where ``per_segment[p]`` is
    ``sum_{r != p} rate_r / rate_p + 1``.  The weighted mean is evaluated
    in exact rational arithmetic, so it equals the segment count exactly.
    """
    lam = [Fraction(float(x)) for x in rates]
    if not lam or any(x <= 0 for x in lam):
        raise ValueError("rates must be positive")
    total = sum(lam)
    per = [(total - lp) / lp + 1 for lp in lam]
    mean = sum(lp * e for lp, e in zip(lam, per)) / total
    return float(mean), np.array([float(e) for e in per])


@dataclass
class ComplexityStats:
    counts: list = field(default_factory=list)
    worst_case: float = math.inf
    expected: float = math.nan

    def record(self, n):
        self.counts.append(int(n))

    @property
    def mean(self):
        return float(np.mean(self.counts)) if self.counts else math.nan

    @property
    def within_bound(self):
        return all(1 <= c <= self.worst_case for c in self.counts)
