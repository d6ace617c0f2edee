"""Greedy and reservation-based comparison heuristics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .allocator import RunResult
from .core import DomainError, Instance


@dataclass(frozen=True)
class ReservationParams:
    """Reserve a fraction ``p`` of every link for arrivals valued at least ``q * M``."""

    p: float
    q: float
    M: float

    def __post_init__(self):
        if not (0.0 <= self.p <= 1.0 and 0.0 <= self.q <= 1.0):
            raise DomainError(f"p and q must lie in [0, 1], got p={self.p}, q={self.q}")
        if not self.M > 0:
            raise DomainError("M must be positive")

    @property
    def threshold(self) -> float:
        return self.q * self.M


def run_greedy(inst: Instance) -> RunResult:
    """Allocate min(b_i, residual capacity on the path) to every arrival."""
    enc = inst.encoded
    omega = np.zeros(inst.link_count)
    ys, gains = K.greedy_run(enc.kind, enc.coef, enc.scale, enc.budget, enc.ptr,
                             enc.idx, omega)
    return RunResult.from_kernel(ys, gains, omega)


def run_reservation(inst: Instance, rp: ReservationParams) -> RunResult:
    """Greedy allocation with a static set-aside for high-valuation arrivals.

    An arrival is high-valuation when g'(0)/|L_i| >= q*M. Low-valuation
    arrivals may only use the unreserved share 1 - p of each link (counted
    against their own cumulative usage); high-valuation arrivals may use any
    residual capacity.
    """
    enc = inst.encoded
    omega = np.zeros(inst.link_count)
    ys, gains = K.reservation_run(enc.kind, enc.coef, enc.scale, enc.budget, enc.ptr,
                                  enc.idx, omega, rp.p, rp.threshold)
    return RunResult.from_kernel(ys, gains, omega)
