"""Property suites behind ``onum validate`` and random instance generators."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .adversary import WorstCaseSpec, measure, two_arrival_worst_case
from .allocator import pseudo_utility, pseudo_utility_grid, run_online, solve_pseudo_utility, y_max
from .core import (
    Arrival,
    Instance,
    LinearUtility,
    LogUtility,
    Network,
    UtilizationState,
    ValueFunction,
    make_value_function,
    validate_conditions,
)
from .oracle import solve_offline_dual, solve_offline_grid


def random_arrival(rng: np.random.Generator, L: int, m: float, M: float,
                   linear_share: float = 0.0, budget_max: float = 1.0) -> Arrival:
    """Arrival whose normalized marginal stays inside [m, M] (needs M >= 2m for log arrivals)."""
    k = int(rng.integers(1, L + 1))
    links = tuple(sorted(rng.choice(L, size=k, replace=False).tolist()))
    b = float(rng.uniform(0.0, budget_max))
    if rng.random() < linear_share:
        return Arrival(LinearUtility(k * float(rng.uniform(m, M))), links, b)
    a = float(rng.uniform(m * (1.0 + b), M))
    return Arrival(LogUtility(a, float(k)), links, b)


def random_instance(rng: np.random.Generator, L: int, N: int, m: float = 1.0, M: float = 10.0,
                    linear_share: float = 0.0) -> Instance:
    return Instance(Network(L), tuple(random_arrival(rng, L, m, M, linear_share)
                                      for _ in range(N)))


def case1_instance(rng: np.random.Generator, L: int, N: int, vf: ValueFunction) -> Instance:
    """Random instance whose per-link total budget stays below the flat segment length."""
    inst = random_instance(rng, L, N, vf.m, vf.M)
    load = np.zeros(L)
    for arr in inst.arrivals:
        load[list(arr.links)] += arr.budget
    shrink = 0.95 * vf.beta / max(load.max(), 1e-12)
    if shrink >= 1:
        return inst
    arrivals = tuple(replace(arr, budget=arr.budget * shrink) for arr in inst.arrivals)
    return Instance(inst.network, arrivals)


def random_state(rng: np.random.Generator, L: int) -> UtilizationState:
    omega = rng.uniform(0.0, 1.0, size=L)
    omega[rng.random(L) < 0.2] = 0.0
    omega[rng.random(L) < 0.05] = 1.0
    return UtilizationState(omega)


# ---------------------------------------------------------------------------
# Suites
# ---------------------------------------------------------------------------

@dataclass
class SuiteResult:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0


def suite_conditions(seed: int = 0, draws: int = 20, grid_points: int = 1000,
                     inject_bad_alpha: bool = False) -> SuiteResult:
    rng = np.random.default_rng(seed)
    failures = 0
    for _ in range(draws):
        m = float(rng.uniform(0.1, 10.0))
        vf = make_value_function(m, m * float(rng.uniform(1.0, 100.0)))
        if inject_bad_alpha:
            vf = replace(vf, alpha=vf.alpha / 2)
        failures += not validate_conditions(vf, grid_points).passed
    return SuiteResult("value-function conditions", failures == 0, f"{failures}/{draws} failed")


def suite_inner_solver(seed: int = 0, pairs: int = 100, grid: int = 10_000) -> SuiteResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(pairs):
        L = int(rng.integers(1, 6))
        m = float(rng.uniform(0.5, 2.0))
        vf = make_value_function(m, m * float(rng.uniform(2.0, 30.0)))
        arr = random_arrival(rng, L, vf.m, vf.M, linear_share=0.3)
        state = random_state(rng, L)
        worst = max(worst, inner_solver_shortfall(arr, state, vf, grid))
    return SuiteResult("inner solver optimality", worst <= 1e-6, f"max shortfall {worst:.2e}")


def inner_solver_shortfall(arr: Arrival, state: UtilizationState, vf: ValueFunction,
                           grid: int) -> float:
    """How far the bisection objective falls short of the best grid point."""
    y = solve_pseudo_utility(arr, state, vf)
    ys = np.linspace(0.0, y_max(arr, state), grid)
    best = float(pseudo_utility_grid(arr, state, vf, ys).max())
    return max(0.0, best - pseudo_utility(arr, state, vf, y))


def suite_case1(seed: int = 0, count: int = 10) -> SuiteResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(count):
        vf = make_value_function(1.0, float(rng.uniform(2.0, 20.0)))
        inst = case1_instance(rng, int(rng.integers(1, 6)), int(rng.integers(1, 30)), vf)
        alg = run_online(inst, vf).total_utility
        opt = solve_offline_dual(inst).primal
        worst = max(worst, abs(opt - alg) / max(opt, 1e-12))
    return SuiteResult("case-1 exactness", worst <= 1e-4, f"max rel diff {worst:.2e}")


def suite_ratio_bound(seed: int = 0, count: int = 20) -> SuiteResult:
    rng = np.random.default_rng(seed)
    worst = -math.inf
    for _ in range(count):
        L = int(rng.integers(1, 6))
        vf = make_value_function(1.0, float(rng.uniform(2.0, 20.0)))
        inst = random_instance(rng, L, int(rng.integers(1, 51)), vf.m, vf.M, linear_share=0.3)
        alg = run_online(inst, vf).total_utility
        upper = solve_offline_dual(inst).dual
        worst = max(worst, upper / alg - L * vf.alpha)
    return SuiteResult("competitive bound", worst <= 1e-6,
                       f"max excess over L*alpha {worst:.3f}")


def suite_oracle(seed: int = 0, count: int = 5) -> SuiteResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    dual_ok = True
    for _ in range(count):
        inst = random_instance(rng, int(rng.integers(1, 4)), int(rng.integers(1, 5)))
        sol = solve_offline_dual(inst)
        grid = solve_offline_grid(inst, 101).value
        worst = max(worst, abs(sol.primal - grid) / max(grid, 1e-12))
        dual_ok &= sol.dual >= grid - 1e-6
    return SuiteResult("oracle cross-check", worst <= 0.01 and dual_ok,
                       f"max rel diff {worst:.2e}, weak duality {'ok' if dual_ok else 'VIOLATED'}")


def suite_worst_case() -> SuiteResult:
    row = measure(WorstCaseSpec(L=3, m=1.0, M=math.e, t1=1000, t2=1000, eps=1e-3))
    vf = make_value_function(1.0, math.e)
    two = run_online(two_arrival_worst_case(3, 1.0, math.e), vf).total_utility
    ok = (row.final_rejected and row.ratio <= row.L_alpha + 1e-6
          and abs(row.ratio - row.L_alpha) / row.L_alpha <= 0.02
          and abs(two - vf.beta) <= 1e-9)
    return SuiteResult("worst-case tightness", ok,
                       f"ratio {row.ratio:.4f} vs L*alpha {row.L_alpha:.4f}")


def run_all(seed: int = 0, inject_bad_alpha: bool = False) -> list[SuiteResult]:
    suites: list[Callable[[], SuiteResult]] = [
        lambda: suite_conditions(seed, inject_bad_alpha=inject_bad_alpha),
        lambda: suite_inner_solver(seed),
        lambda: suite_case1(seed),
        lambda: suite_ratio_bound(seed),
        lambda: suite_oracle(seed),
        suite_worst_case,
    ]
    out = []
    for fn in suites:
        t0 = time.perf_counter()
        res = fn()
        res.seconds = time.perf_counter() - t0
        out.append(res)
    return out

