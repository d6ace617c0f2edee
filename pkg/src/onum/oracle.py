"""Offline optimum: dual-price subgradient iteration plus a brute-force grid oracle."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .allocator import run_online
from .core import Arrival, DomainError, Instance, LogUtility, ValueFunction

GRID_MAX_ARRIVALS = 5


def best_response(arr: Arrival, lambda_path: float) -> float:
    """argmax over 0 <= y <= b of g(y) - lambda_path * y (largest maximizer on ties)."""
    if lambda_path < 0:
        raise DomainError("path price must be nonnegative")
    u = arr.utility
    if isinstance(u, LogUtility):
        if lambda_path == 0:
            return arr.budget
        return min(max(u.a * u.k / lambda_path - 1.0, 0.0), arr.budget)
    return arr.budget if u.s >= lambda_path else 0.0


class _Problem:
    """Vectorized view of an instance for the dual iteration."""

    def __init__(self, inst: Instance):
        n, L = len(inst), inst.link_count
        self.A = np.zeros((n, L))
        self.is_log = np.zeros(n, dtype=bool)
        self.slope = np.zeros(n)  # a*k for log, s for linear
        self.b = np.zeros(n)
        for i, arr in enumerate(inst.arrivals):
            self.A[i, list(arr.links)] = 1.0
            u = arr.utility
            self.is_log[i] = isinstance(u, LogUtility)
            self.slope[i] = u.a * u.k if self.is_log[i] else u.s
            self.b[i] = arr.budget
        self.c = np.asarray(inst.network.capacities, dtype=float)

    def utility(self, y: np.ndarray) -> np.ndarray:
        return np.where(self.is_log, self.slope * np.log1p(y), self.slope * y)

    def best_response(self, lam_path: np.ndarray) -> np.ndarray:
        with np.errstate(divide="ignore"):
            y_log = np.where(lam_path > 0, self.slope / np.where(lam_path > 0, lam_path, 1.0) - 1.0,
                             np.inf)
        y_log = np.clip(y_log, 0.0, self.b)
        y_lin = np.where(self.slope >= lam_path, self.b, 0.0)
        return np.where(self.is_log, y_log, y_lin)

    def dual_value(self, lam: np.ndarray) -> tuple[float, np.ndarray]:
        lam_path = self.A @ lam
        y = self.best_response(lam_path)
        val = float(np.sum(self.utility(y) - lam_path * y) + lam @ self.c)
        return val, y

    def repair(self, y: np.ndarray) -> np.ndarray:
        """Scale users on overloaded links down until every link fits, then top up greedily."""
        y = np.clip(y, 0.0, self.b)
        for _ in range(100):
            load = self.A.T @ y
            over = load > self.c * (1 + 1e-12)
            if not over.any():
                break
            ratio = np.where(over, self.c / np.where(load > 0, load, 1.0), 1.0)
            factor = np.min(np.where(self.A > 0, ratio[None, :], 1.0), axis=1)
            y = y * factor
        # fill leftover capacity in arrival order; utilities are nondecreasing
        residual = np.maximum(self.c - self.A.T @ y, 0.0)
        for i in range(len(y)):
            links = self.A[i] > 0
            extra = min(self.b[i] - y[i], residual[links].min()) if links.any() else 0.0
            if extra > 0:
                y[i] += extra
                residual[links] -= extra
        return y

    def feasible(self, y: np.ndarray, tol: float = 1e-9) -> bool:
        return bool(np.all(y >= -tol) and np.all(y <= self.b + tol)
                    and np.all(self.A.T @ y <= self.c + tol))


@dataclass
class DualState:
    lam: np.ndarray
    gamma0: float
    iterations: int = 0

    def step_size(self, t: int) -> float:
        return self.gamma0 / math.sqrt(t)


@dataclass
class OfflineSolution:
    allocations: np.ndarray
    primal: float
    dual: float
    gap: float
    slack: np.ndarray
    converged: bool
    iterations: int
    prices: np.ndarray = field(repr=False, default=None)


def solve_offline_dual(inst: Instance, max_iters: int = 5000, gamma0: float = 1.0,
                       tol: float = 1e-4, check_every: int = 50) -> OfflineSolution:
    """Projected subgradient on link prices with step gamma0/sqrt(t).

    The best dual value seen is an upper bound on the offline optimum; the
    repaired (feasible) primal is a lower bound. Non-convergence is reported
    through ``converged`` rather than raised.
    """
    if max_iters < 1 or not gamma0 > 0:
        raise DomainError("max_iters >= 1 and gamma0 > 0 required")
    prob = _Problem(inst)
    n = len(inst)
    if n == 0:
        return OfflineSolution(np.zeros(0), 0.0, 0.0, 0.0, prob.c.copy(), True, 0,
                               np.zeros(inst.link_count))

    state = DualState(np.zeros(inst.link_count), gamma0)
    best_dual, best_lam = math.inf, state.lam.copy()
    best_y, best_primal = np.zeros(n), -math.inf
    y_avg = np.zeros(n)
    converged = False

    def consider(y):
        nonlocal best_y, best_primal
        yr = prob.repair(y)
        val = float(np.sum(prob.utility(yr)))
        if val > best_primal:
            best_primal, best_y = val, yr

    for t in range(1, max_iters + 1):
        dual, y = prob.dual_value(state.lam)
        if dual < best_dual:
            best_dual, best_lam = dual, state.lam.copy()
        y_avg += (y - y_avg) / t
        load = prob.A.T @ y
        state.lam = np.maximum(state.lam - state.step_size(t) * (prob.c - load), 0.0)
        state.iterations = t
        if t % check_every == 0 or t == max_iters:
            consider(y)
            consider(y_avg)
            if _rel_gap(best_dual, best_primal) <= tol:
                converged = True
                break

    consider(prob.best_response(prob.A @ best_lam))
    gap = _rel_gap(best_dual, best_primal)
    return OfflineSolution(
        allocations=best_y,
        primal=best_primal,
        dual=best_dual,
        gap=gap,
        slack=prob.c - prob.A.T @ best_y,
        converged=converged or gap <= tol,
        iterations=state.iterations,
        prices=best_lam,
    )


def _rel_gap(dual: float, primal: float) -> float:
    if not math.isfinite(dual) or not math.isfinite(primal):
        return math.inf
    return max(dual - primal, 0.0) / max(abs(dual), 1e-12)


@dataclass
class GridSolution:
    value: float
    allocations: np.ndarray
    error_bound: float


def solve_offline_grid(inst: Instance, grid_n: int = 101) -> GridSolution:
    """Exhaustive search over {0, b/n, ..., b} per arrival (at most five arrivals).

    The last arrival's coordinate is resolved by a prefix-maximum lookup over
    its feasible grid points, which visits the same candidate set as the full
    Cartesian product. ``error_bound`` bounds the distance to the continuous
    optimum: rounding the optimum down to the grid costs at most
    sum_i g_i'(0) * b_i / grid_n.
    """
    n = len(inst)
    if n > GRID_MAX_ARRIVALS:
        raise DomainError(f"grid oracle limited to {GRID_MAX_ARRIVALS} arrivals, got {n}")
    if grid_n < 11:
        raise DomainError("grid_n must be >= 11")
    if n == 0:
        return GridSolution(0.0, np.zeros(0), 0.0)

    prob = _Problem(inst)
    steps = np.arange(grid_n + 1) / grid_n
    pts = [steps * prob.b[i] for i in range(n)]
    vals = [_utility_at(prob, i, pts[i]) for i in range(n)]
    cap = prob.c + 1e-12
    A = prob.A

    last = n - 1
    last_prefix = np.maximum.accumulate(vals[last])
    last_links = A[last] > 0

    def finish(load, value):
        # load: (K, L) capacity used by the enumerated arrivals
        ok = np.all(load <= cap, axis=1)
        resid = np.min(np.where(last_links, cap - load, np.inf), axis=1)
        j = np.searchsorted(pts[last], resid, side="right") - 1
        ok &= j >= 0
        j = np.maximum(j, 0)
        total = np.where(ok, value + last_prefix[j], -np.inf)
        k = int(np.argmax(total))
        return float(total[k]), k, int(np.argmax(vals[last][: j[k] + 1]))

    best = (-np.inf, None)
    if n == 1:
        v, _, jl = finish(np.zeros((1, inst.link_count)), np.zeros(1))
        best = (v, [jl])
    else:
        mids = list(range(1, last))
        if mids:
            mesh = np.meshgrid(*[np.arange(grid_n + 1)] * len(mids), indexing="ij")
            mid_idx = [m.ravel() for m in mesh]
            mid_load = sum(pts[i][mid_idx[k]][:, None] * A[i][None, :] for k, i in enumerate(mids))
            mid_val = sum(vals[i][mid_idx[k]] for k, i in enumerate(mids))
        else:
            mid_idx, mid_load, mid_val = [], np.zeros((1, inst.link_count)), np.zeros(1)
        for j0 in range(grid_n + 1):
            load = mid_load + pts[0][j0] * A[0][None, :]
            v, k, jl = finish(load, mid_val + vals[0][j0])
            if v > best[0]:
                best = (v, [j0] + [int(mi[k]) for mi in mid_idx] + [jl])

    value, choice = best
    alloc = np.array([pts[i][choice[i]] for i in range(n)])
    err = float(sum(inst.arrivals[i].utility.marginal(0.0) * prob.b[i] for i in range(n)) / grid_n)
    return GridSolution(value, alloc, err)


def _utility_at(prob: _Problem, i: int, y: np.ndarray) -> np.ndarray:
    if prob.is_log[i]:
        return prob.slope[i] * np.log1p(y)
    return prob.slope[i] * y


def offline_optimum(inst: Instance, grid_limit: int = 4, **dual_kwargs) -> float:
    """Best certified feasible value: dual-repaired primal, or the grid optimum when cheaper."""
    best = solve_offline_dual(inst, **dual_kwargs).primal
    if 0 < len(inst) <= grid_limit:
        best = max(best, solve_offline_grid(inst).value)
    return best


def empirical_ratio(inst: Instance, vf: ValueFunction, upper: bool = False,
                    **dual_kwargs) -> float:
    """OPT/ALG for one instance.

    With ``upper=True`` the dual bound stands in for OPT, giving a ratio that
    can only overstate the true one. ALG = 0 returns ``inf`` when OPT > 0 and
    1.0 when both vanish.
    """
    alg = run_online(inst, vf).total_utility
    if upper:
        opt = solve_offline_dual(inst, **dual_kwargs).dual
    else:
        opt = offline_optimum(inst, **dual_kwargs)
    if alg <= 0:
        return math.inf if opt > 1e-12 else 1.0
    return opt / alg
