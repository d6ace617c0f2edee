"""Shared domain types: networks, arrivals, utilities and the link value function."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import NamedTuple, Sequence, Union

import numpy as np


class DomainError(ValueError):
    """Raised when parameters fall outside an operation's domain."""


# ---------------------------------------------------------------------------
# Network / utilities / arrivals
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Network:
    link_count: int
    capacities: tuple[float, ...] = ()

    def __post_init__(self):
        if self.link_count < 1:
            raise DomainError(f"link_count must be >= 1, got {self.link_count}")
        caps = tuple(float(c) for c in self.capacities) or (1.0,) * self.link_count
        if len(caps) != self.link_count:
            raise DomainError("one capacity per link required")
        if any(c <= 0 for c in caps):
            raise DomainError("capacities must be positive")
        object.__setattr__(self, "capacities", caps)


@dataclass(frozen=True)
class LogUtility:
    """g(y) = a * k * ln(1 + y); k is normally the size of the requested link set."""

    a: float
    k: float = 1.0

    def value(self, y: float) -> float:
        return self.a * self.k * math.log1p(y)

    def marginal(self, y: float) -> float:
        return self.a * self.k / (1.0 + y)


@dataclass(frozen=True)
class LinearUtility:
    """g(y) = s * y, constant marginal s."""

    s: float

    def value(self, y: float) -> float:
        return self.s * y

    def marginal(self, y: float) -> float:
        return self.s


Utility = Union[LogUtility, LinearUtility]


@dataclass(frozen=True)
class Arrival:
    utility: Utility
    links: tuple[int, ...]
    budget: float

    def __post_init__(self):
        links = tuple(sorted({int(l) for l in self.links}))
        if not links:
            raise DomainError("arrival must request at least one link")
        if links[0] < 0:
            raise DomainError("link indices must be nonnegative")
        if not self.budget >= 0:
            raise DomainError(f"budget must be >= 0, got {self.budget}")
        object.__setattr__(self, "links", links)
        object.__setattr__(self, "budget", float(self.budget))


@dataclass(frozen=True)
class Instance:
    network: Network
    arrivals: tuple[Arrival, ...] = ()

    def __post_init__(self):
        arrivals = tuple(self.arrivals)
        for i, arr in enumerate(arrivals):
            if arr.links[-1] >= self.network.link_count:
                raise DomainError(
                    f"arrival {i} requests link {arr.links[-1]} "
                    f"but network has {self.network.link_count} links")
        object.__setattr__(self, "arrivals", arrivals)

    def __len__(self):
        return len(self.arrivals)

    @property
    def link_count(self) -> int:
        return self.network.link_count

    @cached_property
    def encoded(self) -> "EncodedArrivals":
        return encode_arrivals(self.arrivals)


class EncodedArrivals(NamedTuple):
    """Flat array form of an arrival sequence (links in CSR layout)."""

    kind: np.ndarray
    coef: np.ndarray
    scale: np.ndarray
    budget: np.ndarray
    ptr: np.ndarray
    idx: np.ndarray


def encode_arrivals(arrivals: Sequence[Arrival]) -> EncodedArrivals:
    n = len(arrivals)
    kind = np.zeros(n, dtype=np.int64)
    coef = np.zeros(n)
    scale = np.ones(n)
    budget = np.zeros(n)
    ptr = np.zeros(n + 1, dtype=np.int64)
    for i, arr in enumerate(arrivals):
        u = arr.utility
        if isinstance(u, LogUtility):
            coef[i], scale[i] = u.a, u.k
        else:
            kind[i], coef[i] = 1, u.s
        budget[i] = arr.budget
        ptr[i + 1] = ptr[i] + len(arr.links)
    idx = np.fromiter((l for arr in arrivals for l in arr.links), dtype=np.int64,
                      count=int(ptr[-1]))
    return EncodedArrivals(kind, coef, scale, budget, ptr, idx)


def log_arrival(a: float, links: Sequence[int], budget: float, k: float | None = None) -> Arrival:
    """Log arrival with scale defaulting to the number of requested links."""
    links = tuple(links)
    return Arrival(LogUtility(a, float(len(set(links)) if k is None else k)), links, budget)


def linear_arrival(s: float, links: Sequence[int], budget: float) -> Arrival:
    return Arrival(LinearUtility(s), tuple(links), budget)


# ---------------------------------------------------------------------------
# Value function
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ValueFunction:
    """Piecewise link price: flat at ``m`` below ``beta``, exponential above.

    ``rate`` is the growth rate of the exponential segment. It defaults to
    ``alpha``; the two are stored separately so that a curve can be paired
    with an inconsistent ``alpha`` when probing the condition checker.
    """

    m: float
    M: float
    alpha: float
    beta: float
    rate: float | None = None

    def __post_init__(self):
        if self.rate is None:
            object.__setattr__(self, "rate", self.alpha)

    def __call__(self, y: float) -> float:
        return phi_eval(self, y)


def make_value_function(m: float, M: float) -> ValueFunction:
    """Canonical value function: alpha = ln(M/m) + 1 and beta = 1/alpha."""
    if not m > 0:
        raise DomainError(f"m must be positive, got {m}")
    if not M >= m:
        raise DomainError(f"M must be >= m, got m={m}, M={M}")
    alpha = math.log(M / m) + 1.0
    return ValueFunction(m=float(m), M=float(M), alpha=alpha, beta=1.0 / alpha)


def phi_eval(vf: ValueFunction, y: float) -> float:
    if not 0.0 <= y <= 1.0:
        raise DomainError(f"utilization {y} outside [0, 1]")
    if y < vf.beta:
        return vf.m
    return vf.m * math.exp(vf.rate * (y - vf.beta))


def phi_integral(vf: ValueFunction, y0: float, y1: float) -> float:
    """Closed-form integral of the price curve over [y0, y1]."""
    if not 0.0 <= y0 <= y1 <= 1.0:
        raise DomainError(f"bad integration bounds [{y0}, {y1}]")
    m, beta, r = vf.m, vf.beta, vf.rate
    flat = m * (min(y1, beta) - min(y0, beta))
    lo, hi = max(y0, beta) - beta, max(y1, beta) - beta
    if hi <= lo:
        return flat
    # e^{r hi} - e^{r lo} written to stay accurate for short slices
    return flat + (m / r) * math.exp(r * lo) * math.expm1(r * (hi - lo))


def phi_integral_array(vf: ValueFunction, y0, y1) -> np.ndarray:
    """Vectorized :func:`phi_integral` (no bounds checking)."""
    y0, y1 = np.asarray(y0, dtype=float), np.asarray(y1, dtype=float)
    m, beta, r = vf.m, vf.beta, vf.rate
    flat = m * (np.minimum(y1, beta) - np.minimum(y0, beta))
    lo, hi = np.maximum(y0, beta) - beta, np.maximum(y1, beta) - beta
    return flat + (m / r) * np.exp(r * lo) * np.expm1(r * (hi - lo))


def phi_inverse(vf: ValueFunction, price: float) -> float:
    """Largest utilization whose price does not exceed ``price`` (clipped to [0, 1])."""
    if price < vf.m:
        return 0.0
    y = vf.beta + math.log(price / vf.m) / vf.rate
    return min(max(y, vf.beta), 1.0)


@dataclass
class UtilizationState:
    """Per-link utilization levels; the only mutable state of an online run."""

    omega: np.ndarray

    @classmethod
    def zeros(cls, link_count: int) -> "UtilizationState":
        return cls(np.zeros(link_count))

    def copy(self) -> "UtilizationState":
        return UtilizationState(self.omega.copy())

    def feasible(self, tol: float = 0.0) -> bool:
        return bool(np.all(self.omega >= -tol) and np.all(self.omega <= 1.0 + tol))


# ---------------------------------------------------------------------------
# Sufficient-condition checks
# ---------------------------------------------------------------------------

@dataclass
class ConditionReport:
    endpoints_ok: bool
    monotone_ok: bool
    growth_ok: bool
    min_growth_slack: float
    endpoint_errors: tuple[float, float] = field(default=(0.0, 0.0))

    @property
    def passed(self) -> bool:
        return self.endpoints_ok and self.monotone_ok and self.growth_ok


def validate_conditions(vf: ValueFunction, grid_points: int = 1000,
                        endpoint_rtol: float = 1e-9,
                        growth_slack: float = 1e-6) -> ConditionReport:
    """Check the three competitiveness conditions on a uniform grid over [beta, 1].

    (a) phi(beta) = m and phi(1) = M, (b) phi nondecreasing,
    (c) alpha * phi(y) - phi'(y) >= -growth_slack with phi' by central differences.
    Condition (c) is homogeneous in the price level, so it is checked on phi/m;
    otherwise the finite-difference error would grow with m and swamp the slack.
    Never raises on a failed condition.
    """
    if grid_points < 2:
        raise DomainError("grid_points must be >= 2")
    ys = np.linspace(vf.beta, 1.0, grid_points)
    vals = np.array([phi_eval(vf, float(y)) for y in ys])

    err_lo = abs(phi_eval(vf, vf.beta) - vf.m) / vf.m
    err_hi = abs(phi_eval(vf, 1.0) - vf.M) / vf.M
    endpoints_ok = err_lo <= endpoint_rtol and err_hi <= endpoint_rtol
    monotone_ok = bool(np.all(np.diff(vals) >= 0.0))

    width = 1.0 - vf.beta
    if width < 1e-6:
        # flat or numerically flat curve: no room for a finite difference
        slack = vf.alpha
    else:
        h = min(1e-5 / max(vf.rate, 1.0), width / 4)
        inner = np.clip(ys, vf.beta + h, 1.0 - h)
        fwd = np.array([phi_eval(vf, float(y + h)) for y in inner])
        bwd = np.array([phi_eval(vf, float(y - h)) for y in inner])
        deriv = (fwd - bwd) / (2 * h)
        at = np.array([phi_eval(vf, float(y)) for y in inner])
        slack = float(np.min(vf.alpha * at - deriv)) / vf.m
    return ConditionReport(
        endpoints_ok=bool(endpoints_ok),
        monotone_ok=monotone_ok,
        growth_ok=bool(slack >= -growth_slack),
        min_growth_slack=float(slack),
        endpoint_errors=(float(err_lo), float(err_hi)),
    )


def marginal_range(arr: Arrival) -> tuple[float, float]:
    """(min, max) of g'(y)/|L_i| over y in [0, b_i]."""
    n = len(arr.links)
    u = arr.utility
    return u.marginal(arr.budget) / n, u.marginal(0.0) / n


def check_marginal_bounds(inst: Instance, m: float, M: float) -> bool:
    for arr in inst.arrivals:
        lo, hi = marginal_range(arr)
        if lo < m or hi > M:
            return False
    return True
