"""Coordination of connected automated vehicles at a signal-free intersection.

Energy-optimal closed-form trajectories, a recursive merging-zone
schedule, newcomer resequencing for throughput, and a discrete-event
simulator tying them together.
"""

__version__ = "0.1.0"

from .config import (ArrivalModel, Geometry, Lane, OutputSpec, PolicySpec, Relation, Scenario, ScenarioError,
                     VehicleLimits, load_scenario, render_scenario, validate)
from .engine import compare, run, snapshot
from .kernels import IMPLEMENTATION
from .resequencer import best_sequence, expected_swaps, feasible_sequences, worst_case_swaps
from .scheduler import QueueEntry, classify, schedule_sequence, terminal_time, verify_schedule
from .trajectory import (CubicTrajectory, FuelCoefficients, InfeasiblePlan, InitialCondition, check_limits,
                         earliest_arrival, evaluate, fuel_total, solve_fixed_speed, solve_free_speed,
                         solve_free_time, solve_penalized_speed)

__all__ = [
    "ArrivalModel", "Geometry", "Lane", "OutputSpec", "PolicySpec", "Relation", "Scenario", "ScenarioError",
    "VehicleLimits", "load_scenario", "render_scenario", "validate",
    "compare", "run", "snapshot", "IMPLEMENTATION",
    "best_sequence", "expected_swaps", "feasible_sequences", "worst_case_swaps",
    "QueueEntry", "classify", "schedule_sequence", "terminal_time", "verify_schedule",
    "CubicTrajectory", "FuelCoefficients", "InfeasiblePlan", "InitialCondition", "check_limits",
    "earliest_arrival", "evaluate", "fuel_total", "solve_fixed_speed", "solve_free_speed", "solve_free_time",
    "solve_penalized_speed",
]
