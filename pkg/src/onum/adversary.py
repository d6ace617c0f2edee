"""Worst-case arrival sequences that drive OPT/ALG toward L * alpha."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

from .allocator import run_online
from .core import DomainError, Instance, Network, linear_arrival, make_value_function


@dataclass(frozen=True)
class WorstCaseSpec:
    """Parameters of the tightness construction.

    ``t1`` flat-priced arrivals fill the target link to 1/alpha, ``t2``
    arrivals with slopes creeping up by eps/t2 push it along the exponential
    segment, and a final all-links arrival at m*L + eps/2 gets priced out.
    """

    L: int
    m: float
    M: float
    t1: int
    t2: int
    eps: float | None = None
    target: int = 0

    def __post_init__(self):
        if self.L < 1 or self.t1 < 1 or self.t2 < 0:
            raise DomainError("need L >= 1, t1 >= 1, t2 >= 0")
        if not 0 < self.m <= self.M:
            raise DomainError("need 0 < m <= M")
        if self.eps is None:
            object.__setattr__(self, "eps", 1.0 / max(self.t2, 1))
        if not self.eps > 0:
            raise DomainError("eps must be positive")
        if self.m * self.L + self.eps / 2 > self.M * self.L:
            raise DomainError("final arrival would exceed the marginal upper bound")
        if self.t2 and self.m + self.eps > self.M:
            raise DomainError("second-group slopes would exceed M")
        if not 0 <= self.target < self.L:
            raise DomainError("target link out of range")

    @property
    def alpha(self) -> float:
        return make_value_function(self.m, self.M).alpha

    @property
    def final_slope(self) -> float:
        return self.m * self.L + self.eps / 2


def build_worst_case(spec: WorstCaseSpec) -> Instance:
    ell = (spec.target,)
    first = [linear_arrival(spec.m, ell, 1.0 / (spec.alpha * spec.t1)) for _ in range(spec.t1)]
    second = [linear_arrival(spec.m + i * spec.eps / spec.t2, ell, 1.0)
              for i in range(1, spec.t2 + 1)]
    last = linear_arrival(spec.final_slope, range(spec.L), 1.0)
    return Instance(Network(spec.L), tuple(first + second + [last]))


def two_arrival_worst_case(L: int, m: float, M: float, target: int = 0) -> Instance:
    """Two-arrival instance: slope m on one link with budget beta, then slope m*L on all links."""
    vf = make_value_function(m, M)
    return Instance(Network(L), (
        linear_arrival(m, (target,), vf.beta),
        linear_arrival(m * L, range(L), 1.0),
    ))


@dataclass
class RatioRow:
    L: int
    t1: int
    t2: int
    eps: float
    alg: float
    opt: float
    ratio: float
    L_alpha: float
    final_rejected: bool


def measure(spec: WorstCaseSpec) -> RatioRow:
    inst = build_worst_case(spec)
    vf = make_value_function(spec.m, spec.M)
    res = run_online(inst, vf)
    # offline choice for L > 1: give the whole capacity to the last arrival
    opt = spec.final_slope
    alg = res.total_utility
    return RatioRow(
        L=spec.L, t1=spec.t1, t2=spec.t2, eps=spec.eps, alg=alg, opt=opt,
        ratio=opt / alg if alg > 0 else math.inf,
        L_alpha=spec.L * (math.log(spec.M / spec.m) + 1.0),
        final_rejected=bool(res.decisions[-1] == 0.0),
    )


def ratio_curve(L_values, m: float, M: float, t: int, eps: float | None = None) -> list[RatioRow]:
    rows = []
    for L in L_values:
        if L < 2:
            raise DomainError("ratio_curve needs L >= 2; use two_arrival_worst_case for L = 1")
        rows.append(measure(WorstCaseSpec(L=L, m=m, M=M, t1=t, t2=t, eps=eps)))
    return rows


CURVE_FIELDS = ["L", "t1", "t2", "eps", "ALG", "OPT", "ratio", "L_alpha"]


def write_curve(rows, fh, comment: str | None = None) -> None:
    if comment:
        fh.write(f"# {comment}\n")
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(CURVE_FIELDS)
    for r in rows:
        w.writerow([r.L, r.t1, r.t2, repr(r.eps), repr(r.alg), repr(r.opt), repr(r.ratio),
                    repr(r.L_alpha)])
