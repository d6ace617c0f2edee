"""Compiled inner loops for the online allocators.

Every online runner (OA, greedy, reservation) goes through these kernels so
that single-arrival solves, full runs and per-arm learner evaluations share
one arithmetic path and agree bit for bit.
"""

import math

import numpy as np
from numba import njit

LOG = 0
LINEAR = 1


@njit(cache=True, nogil=True)
def marginal(kind, coef, scale, y):
    if kind == LOG:
        return coef * scale / (1.0 + y)
    return coef


@njit(cache=True, nogil=True)
def value(kind, coef, scale, y):
    if kind == LOG:
        return coef * scale * math.log1p(y)
    return coef * y


@njit(cache=True, nogil=True)
def phi(y, m, beta, rate):
    if y < beta:
        return m
    return m * math.exp(rate * (y - beta))


@njit(cache=True, nogil=True)
def _dJ(kind, coef, scale, links, omega, y, m, beta, rate):
    total = 0.0
    for j in range(links.shape[0]):
        total += phi(omega[links[j]] + y, m, beta, rate)
    return marginal(kind, coef, scale, y) - total


@njit(cache=True, nogil=True)
def solve_one(kind, coef, scale, budget, links, omega, m, beta, rate, tol):
    """Largest maximizer of g(y) - sum_l int phi over [0, y_max] by bisection on J'."""
    y_max = budget
    for j in range(links.shape[0]):
        head = 1.0 - omega[links[j]]
        if head < y_max:
            y_max = head
    if y_max <= 0.0:
        return 0.0
    if _dJ(kind, coef, scale, links, omega, 0.0, m, beta, rate) < 0.0:
        return 0.0
    if _dJ(kind, coef, scale, links, omega, y_max, m, beta, rate) >= 0.0:
        return y_max
    lo = 0.0
    hi = y_max
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if _dJ(kind, coef, scale, links, omega, mid, m, beta, rate) >= 0.0:
            lo = mid
        else:
            hi = mid
    return lo


@njit(cache=True, nogil=True)
def _commit(links, omega, y):
    for j in range(links.shape[0]):
        w = omega[links[j]] + y
        omega[links[j]] = w if w < 1.0 else 1.0


@njit(cache=True, nogil=True)
def oa_run(kind, coef, scale, budget, ptr, idx, omega, m, beta, rate, tol):
    """Run OA in place on ``omega``; returns (allocations, utility gains)."""
    n = kind.shape[0]
    ys = np.zeros(n)
    gains = np.zeros(n)
    for i in range(n):
        links = idx[ptr[i]:ptr[i + 1]]
        y = solve_one(kind[i], coef[i], scale[i], budget[i], links, omega,
                      m, beta, rate, tol)
        _commit(links, omega, y)
        ys[i] = y
        gains[i] = value(kind[i], coef[i], scale[i], y)
    return ys, gains


@njit(cache=True, nogil=True)
def reservation_run(kind, coef, scale, budget, ptr, idx, omega, p, threshold):
    """Reservation heuristic in place on ``omega``.

    Arrivals whose normalized peak marginal reaches ``threshold`` see the full
    residual capacity; the rest only see the unreserved share 1 - p, tracked
    by their own usage counter.
    """
    n = kind.shape[0]
    ys = np.zeros(n)
    gains = np.zeros(n)
    low = np.zeros(omega.shape[0])
    for i in range(n):
        links = idx[ptr[i]:ptr[i + 1]]
        high = marginal(kind[i], coef[i], scale[i], 0.0) / links.shape[0] >= threshold
        y = budget[i]
        for j in range(links.shape[0]):
            head = 1.0 - omega[links[j]]
            if not high:
                res = (1.0 - p) - low[links[j]]
                if res < head:
                    head = res
            if head < y:
                y = head
        if y < 0.0:
            y = 0.0
        _commit(links, omega, y)
        if not high:
            for j in range(links.shape[0]):
                low[links[j]] += y
        ys[i] = y
        gains[i] = value(kind[i], coef[i], scale[i], y)
    return ys, gains


@njit(cache=True, nogil=True)
def greedy_run(kind, coef, scale, budget, ptr, idx, omega):
    n = kind.shape[0]
    ys = np.zeros(n)
    gains = np.zeros(n)
    for i in range(n):
        links = idx[ptr[i]:ptr[i + 1]]
        y = budget[i]
        for j in range(links.shape[0]):
            head = 1.0 - omega[links[j]]
            if head < y:
                y = head
        if y < 0.0:
            y = 0.0
        _commit(links, omega, y)
        ys[i] = y
        gains[i] = value(kind[i], coef[i], scale[i], y)
    return ys, gains
