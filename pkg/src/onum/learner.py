"""Full-feedback exponential-weights tuning of allocator parameters across episodes."""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .allocator import run_online
from .baselines import ReservationParams, run_reservation
from .core import DomainError, Instance, make_value_function
from .ingest import rng_stream

DEFAULT_ETA = 10.0
DEFAULT_EPISODES = 30
GRID_STEPS = 20

Arm = tuple[float, float]


@dataclass(frozen=True)
class ArmGrid:
    arms: tuple[Arm, ...]
    step: float
    names: tuple[str, str] = ("m", "M")

    def __len__(self):
        return len(self.arms)


def build_arm_grid(m: float, M: float, steps: int = GRID_STEPS) -> ArmGrid:
    """All (m~, M~) with m <= m~ <= M~ <= M on a (steps+1)-point uniform grid."""
    if not m < M:
        raise DomainError(f"need m < M, got m={m}, M={M}")
    if steps < 1:
        raise DomainError("steps must be >= 1")
    h = (M - m) / steps
    pts = [m + j * h for j in range(steps)] + [M]
    arms = tuple((pts[i], pts[j]) for i in range(steps + 1) for j in range(i, steps + 1))
    return ArmGrid(arms, h)


def build_pq_grid(steps: int = GRID_STEPS) -> ArmGrid:
    pts = [j / steps for j in range(steps + 1)]
    return ArmGrid(tuple((p, q) for p in pts for q in pts), 1.0 / steps, names=("p", "q"))


@dataclass
class LearnerState:
    """Exponential weights kept in log space so long runs never underflow to zero."""

    log_weights: np.ndarray
    eta: float = DEFAULT_ETA
    episode: int = 0
    history: list = field(default_factory=list)
    skipped: list = field(default_factory=list)

    @classmethod
    def uniform(cls, n_arms: int, eta: float = DEFAULT_ETA) -> "LearnerState":
        return cls(np.zeros(n_arms), eta)

    @property
    def weights(self) -> np.ndarray:
        return np.exp(self.log_weights)

    @property
    def probabilities(self) -> np.ndarray:
        z = np.exp(self.log_weights - self.log_weights.max())
        return z / z.sum()


def update_weights(state: LearnerState, utilities) -> LearnerState:
    """w <- w * exp(eta * (u - u*) / u*) with u* the best arm's utility this episode.

    Episodes where no arm earns anything (u* <= 0) leave the weights unchanged
    and are recorded in ``skipped``.
    """
    u = np.asarray(utilities, dtype=float)
    history = state.history + [u]
    u_star = u.max()
    if not u_star > 0:
        return replace(state, episode=state.episode + 1, history=history,
                       skipped=state.skipped + [state.episode])
    return replace(state, log_weights=state.log_weights + state.eta * (u - u_star) / u_star,
                   episode=state.episode + 1, history=history)


def _map(fn, items, workers: int):
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def oa_evaluator(episode: Instance) -> Callable[[Arm], float]:
    return lambda arm: run_online(episode, make_value_function(*arm)).total_utility


def reservation_evaluator(M: float) -> Callable[[Instance], Callable[[Arm], float]]:
    def per_episode(episode):
        return lambda arm: run_reservation(episode, ReservationParams(arm[0], arm[1], M)).total_utility
    return per_episode


def run_episode_all_arms(episode: Instance, grid: ArmGrid, workers: int = 1,
                         evaluator=oa_evaluator) -> np.ndarray:
    """Utility of every arm on one episode, each from a fresh zero-utilization state."""
    return np.array(_map(evaluator(episode), grid.arms, workers))


@dataclass
class AdaptiveResult:
    grid: ArmGrid
    chosen: list[Arm]
    played: np.ndarray
    best: np.ndarray
    history: np.ndarray        # episodes x arms, in grid order
    probabilities: np.ndarray  # final distribution, in grid order
    prob_history: np.ndarray   # distribution used at each episode
    skipped: list[int]

    def write_csv(self, fh, comment: str | None = None) -> None:
        if comment:
            fh.write(f"# {comment}\n")
        a, b = self.grid.names
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["episode", f"chosen_{a}", f"chosen_{b}", "played_utility", "best_arm_utility"])
        for e, (arm, u, ub) in enumerate(zip(self.chosen, self.played, self.best)):
            w.writerow([e, repr(float(arm[0])), repr(float(arm[1])), repr(float(u)), repr(float(ub))])


def _adaptive(episodes: Sequence[Instance], grid: ArmGrid, eta: float, seed: int,
              evaluator, workers: int) -> AdaptiveResult:
    if not episodes:
        raise DomainError("at least one episode required")
    # work in arm-content order so sampling does not depend on how the grid is listed
    order = sorted(range(len(grid)), key=lambda i: grid.arms[i])
    canon = ArmGrid(tuple(grid.arms[i] for i in order), grid.step, grid.names)
    rng = rng_stream(seed, "arm-sampling")
    state = LearnerState.uniform(len(canon), eta)
    chosen, played, best, probs = [], [], [], []
    for ep in episodes:
        p = state.probabilities
        k = min(int(np.searchsorted(np.cumsum(p), rng.random() * p.sum(), side="right")),
                len(p) - 1)
        u = run_episode_all_arms(ep, canon, workers, evaluator)
        chosen.append(canon.arms[k])
        played.append(u[k])
        best.append(u.max())
        probs.append(p)
        state = update_weights(state, u)
    back = np.argsort(order)
    return AdaptiveResult(
        grid=grid,
        chosen=chosen,
        played=np.array(played),
        best=np.array(best),
        history=np.array(state.history)[:, back],
        probabilities=state.probabilities[back],
        prob_history=np.array(probs)[:, back],
        skipped=state.skipped,
    )


def run_adaptive(episodes: Sequence[Instance], grid: ArmGrid, eta: float = DEFAULT_ETA,
                 seed: int = 0, workers: int = 1) -> AdaptiveResult:
    """Sample an arm per episode, play it, observe every arm, update the weights."""
    return _adaptive(episodes, grid, eta, seed, oa_evaluator, workers)


def run_adaptive_reservation(episodes: Sequence[Instance], M: float, pq_grid: ArmGrid | None = None,
                             eta: float = DEFAULT_ETA, seed: int = 0,
                             workers: int = 1) -> AdaptiveResult:
    grid = pq_grid if pq_grid is not None else build_pq_grid()
    return _adaptive(episodes, grid, eta, seed, reservation_evaluator(M), workers)


def best_fixed_arm(training: Sequence[Instance], grid: ArmGrid, workers: int = 1,
                   evaluator=oa_evaluator) -> tuple[Arm, float]:
    """Arm with the highest mean utility over the training set; ties go to the smaller arm."""
    if not training:
        raise DomainError("training set is empty")
    means = np.mean([run_episode_all_arms(ep, grid, workers, evaluator) for ep in training], axis=0)
    top = means.max()
    k = min((i for i in range(len(grid)) if means[i] == top), key=lambda i: grid.arms[i])
    return grid.arms[k], float(means[k])
