"""Online network utility maximization: threshold allocator, baselines, oracles, learner."""

from .allocator import RunResult, run_online, solve_pseudo_utility, step
from .baselines import ReservationParams, run_greedy, run_reservation
from .core import (
    Arrival,
    DomainError,
    Instance,
    LinearUtility,
    LogUtility,
    Network,
    UtilizationState,
    ValueFunction,
    linear_arrival,
    log_arrival,
    make_value_function,
    validate_conditions,
)
from .oracle import empirical_ratio, offline_optimum, solve_offline_dual, solve_offline_grid

__all__ = [
    "Arrival", "DomainError", "Instance", "LinearUtility", "LogUtility", "Network",
    "ReservationParams", "RunResult", "UtilizationState", "ValueFunction",
    "empirical_ratio", "linear_arrival", "log_arrival", "make_value_function",
    "offline_optimum", "run_greedy", "run_online", "run_reservation",
    "solve_offline_dual", "solve_offline_grid", "solve_pseudo_utility", "step",
    "validate_conditions",
]
