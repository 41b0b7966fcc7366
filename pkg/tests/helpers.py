"""Small builders shared by the test modules."""

from cavseq.config import Scenario
from cavseq.scheduler import QueueEntry
from cavseq.trajectory import InitialCondition, earliest_arrival

SC = Scenario()
G = SC.geometry
LIM = SC.limits
E2W, W2E, N2S, S2N = range(4)


def entry(i, lane, t0, v0, scenario=SC):
    """Fresh queue entry with its earliest arrival filled in."""
    L = scenario.geometry.segment_lengths[lane]
    return QueueEntry(i, lane, t0, v0, L, earliest_arrival(InitialCondition(t0, v0, L), scenario.limits))
