"""The online threshold allocator: per-arrival pseudo-utility maximization."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .core import (
    Arrival,
    DomainError,
    Instance,
    LogUtility,
    UtilizationState,
    ValueFunction,
    encode_arrivals,
    phi_integral,
    phi_integral_array,
)

Y_TOL = 1e-9


@dataclass
class RunResult:
    total_utility: float
    decisions: np.ndarray
    final_state: UtilizationState
    per_arrival_utilities: np.ndarray

    @classmethod
    def from_kernel(cls, ys, gains, omega) -> "RunResult":
        return cls(float(np.sum(gains)), ys, UtilizationState(omega), gains)


def pseudo_utility(arr: Arrival, state: UtilizationState, vf: ValueFunction, y: float) -> float:
    """J(y) = g(y) - sum over requested links of the integrated price."""
    cost = sum(phi_integral(vf, state.omega[l], min(state.omega[l] + y, 1.0))
               for l in arr.links)
    return arr.utility.value(y) - cost


def pseudo_utility_grid(arr: Arrival, state: UtilizationState, vf: ValueFunction,
                        ys: np.ndarray) -> np.ndarray:
    """J evaluated at every point of ``ys`` via the closed-form price integral."""
    ys = np.asarray(ys, dtype=float)
    u = arr.utility
    if isinstance(u, LogUtility):
        gain = u.a * u.k * np.log1p(ys)
    else:
        gain = u.s * ys
    cost = sum(phi_integral_array(vf, state.omega[l], np.minimum(state.omega[l] + ys, 1.0))
               for l in arr.links)
    return gain - cost


def y_max(arr: Arrival, state: UtilizationState) -> float:
    return max(0.0, min(arr.budget, min(1.0 - state.omega[l] for l in arr.links)))


def solve_pseudo_utility(arr: Arrival, state: UtilizationState, vf: ValueFunction,
                         tol: float = Y_TOL) -> float:
    """Allocation for one arrival given current utilization.

    J'(y) is nonincreasing, so the largest maximizer is found by bisection on
    its sign. Ties (J' = 0 on an interval) resolve toward the larger rate.
    """
    if not state.feasible():
        raise DomainError("utilization state outside [0, 1]")
    enc = encode_arrivals([arr])
    return float(K.solve_one(enc.kind[0], enc.coef[0], enc.scale[0], enc.budget[0],
                             enc.idx, state.omega, vf.m, vf.beta, vf.rate, tol))


def step(state: UtilizationState, arr: Arrival, vf: ValueFunction,
         tol: float = Y_TOL) -> tuple[float, UtilizationState]:
    """One allocation plus state update; the input state is left untouched."""
    y = solve_pseudo_utility(arr, state, vf, tol)
    new = state.copy()
    K._commit(np.asarray(arr.links, dtype=np.int64), new.omega, y)
    return y, new


def run_online(inst: Instance, vf: ValueFunction, tol: float = Y_TOL) -> RunResult:
    enc = inst.encoded
    omega = np.zeros(inst.link_count)
    ys, gains = K.oa_run(enc.kind, enc.coef, enc.scale, enc.budget, enc.ptr, enc.idx,
                         omega, vf.m, vf.beta, vf.rate, tol)
    return RunResult.from_kernel(ys, gains, omega)


def decision_log_rows(inst: Instance, result: RunResult):
    """Yield decision-log rows, replaying the run to recover post-update utilization."""
    omega = np.zeros(inst.link_count)
    for i, (arr, y, gain) in enumerate(zip(inst.arrivals, result.decisions,
                                           result.per_arrival_utilities)):
        K._commit(np.asarray(arr.links, dtype=np.int64), omega, float(y))
        yield {
            "arrival_index": i,
            "y": repr(float(y)),
            "utility_gain": repr(float(gain)),
            "links": ";".join(str(l) for l in arr.links),
            "post_omega": ";".join(repr(float(omega[l])) for l in arr.links),
        }


LOG_FIELDS = ["arrival_index", "y", "utility_gain", "links", "post_omega"]


def write_decision_log(fh, inst: Instance, result: RunResult, comment: str | None = None):
    if comment:
        fh.write(f"# {comment}\n")
    writer = csv.DictWriter(fh, fieldnames=LOG_FIELDS, lineterminator="\n")
    writer.writeheader()
    writer.writerows(decision_log_rows(inst, result))


def decision_log_text(inst: Instance, result: RunResult) -> str:
    buf = io.StringIO()
    write_decision_log(buf, inst, result)
    return buf.getvalue()


def read_decision_log(fh) -> list[dict]:
    rows = [line for line in fh if not line.startswith("#")]
    out = []
    for row in csv.DictReader(rows):
        out.append({
            "arrival_index": int(row["arrival_index"]),
            "y": float(row["y"]),
            "utility_gain": float(row["utility_gain"]),
            "links": [int(x) for x in row["links"].split(";")],
            "post_omega": [float(x) for x in row["post_omega"].split(";")],
        })
    return out
